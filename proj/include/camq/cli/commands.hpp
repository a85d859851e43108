#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace camq::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeFailure = 2 };

struct AuditConfig {
  std::vector<std::string> models{"vgg16",        "resnet50",      "densenet121",
                                  "mobilenet_v2", "squeezenet1_0", "efficientnet_b0"};
  std::vector<std::string> precisions{"f32", "int16", "int8"};
  /// "random:<seed>" or a directory holding <model>.safetensors.
  std::string weights;
  std::string image_dir;
  std::string mask_dir;
  std::string mask_generator;  // command template with {input} and {output}
  std::string cache_dir;       // empty disables the CAM cache
  std::string output_dir = "camq_out";
  std::size_t n = 50;
  std::uint64_t seed = 0;
  double epsilon = 1e-7;
  std::string kld_orientation = "cam_weighted";
  int workers = 1;
  std::string formats = "csv,md,json";
  double failure_threshold = 0.05;  // tolerated fraction of failed (model, image) pairs
  int overlays = 0;                 // number of images that get an overlay figure
  std::string workdir = ".";

  nlohmann::json to_json() const;
};

/// "field: problem" lines; empty when the config is usable. Touches no model.
std::vector<std::string> validate(const AuditConfig& config);

/// Relative paths resolve against the config's workdir.
std::string resolve_path(const AuditConfig& config, const std::string& path);

int cmd_audit(const AuditConfig& config, std::ostream& err);
int cmd_score(const std::string& gt_path, const std::string& cam_path, double epsilon,
              const std::string& kld_orientation, std::ostream& out, std::ostream& err);
int cmd_overlay(const std::string& image_path, const std::string& mask_path, const std::vector<std::string>& cam_paths,
                const std::string& out_path, std::ostream& err);
int cmd_report(const std::string& records_path, const std::string& out_dir, const std::string& formats,
               std::ostream& err);

/// Parses arguments (and an optional --config file) and dispatches.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace camq::cli
