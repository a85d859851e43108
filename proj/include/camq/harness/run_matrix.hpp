#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "camq/grid.hpp"
#include "camq/harness/dataset.hpp"
#include "camq/harness/records.hpp"
#include "camq/model_spec.hpp"
#include "camq/quantsim.hpp"

namespace camq::harness {

inline constexpr const char* kClassPolicy = "own_argmax";

struct RunOptions {
  std::filesystem::path cache_dir;  // empty disables the CAM cache
  int workers = 1;
  metrics::MetricOptions metric_options;
  saliency::MaskGenerator generator;
  /// CAMs and masks of these images are returned for overlay rendering.
  std::set<std::string> keep_maps_for;
  /// Receives progress and warning lines.
  std::function<void(const std::string&)> log;
};

struct RunStats {
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t models_loaded = 0;
};

/// Maps retained for one (model, image) at model input resolution.
struct KeptMaps {
  std::string model;
  std::string image_id;
  std::vector<std::pair<quant::Precision, GridF>> cams;
  GridF mask;
};

struct RunResult {
  std::vector<RunRecord> records;  // model order, then image order, then precision order
  std::vector<Failure> failures;
  std::vector<KeptMaps> kept;
  RunStats stats;
};

/// Cache file stem for one CAM: a hash of everything the heatmap depends on.
std::string cam_cache_key(const ModelSpec& spec, const std::string& weights_id, quant::Precision precision,
                          const std::string& image_id);

/// For every model and image, the F32 CAM is computed once and every
/// requested precision yields a record against the mask; int16/int8 also
/// yield a record against the F32 CAM. A failing (model, image) pair is
/// logged and contributes no records. Models load only when some CAM is
/// missing from the cache.
RunResult run_matrix(const std::vector<ModelSpec>& models, const std::vector<quant::PrecisionLevel>& precisions,
                     const DatasetIndex& data, const RunOptions& options);

}  // namespace camq::harness
