#include "camq/cli/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "camq/harness/dataset.hpp"
#include "camq/harness/overlay.hpp"
#include "camq/harness/report.hpp"
#include "camq/harness/run_matrix.hpp"
#include "camq/heatmap_io.hpp"
#include "camq/image.hpp"
#include "camq/metrics.hpp"
#include "camq/nn/weights.hpp"
#include "camq/nn/zoo.hpp"
#include "camq/saliency.hpp"

namespace camq::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string weights_for(const AuditConfig& c, const std::string& model) {
  if (c.weights.rfind("random:", 0) == 0) return c.weights;
  return (fs::path(resolve_path(c, c.weights)) / (model + ".safetensors")).string();
}

GridF load_map(const std::string& path) {
  if (fs::path(path).extension() == ".bin") {
    auto stored = read_heatmap(path);
    if (!stored) throw std::runtime_error("heatmap not found: " + path + " (needs its .json sidecar)");
    return stored->values;
  }
  return saliency::load_mask(path).values;
}

json preprocessing_json(const Preprocessing& pp) {
  return {{"resize_shorter_side", pp.resize},
          {"center_crop", pp.crop},
          {"crop_offset_rounding", "half_to_even"},
          {"interpolation", "area when shrinking, bilinear when enlarging"},
          {"mean", pp.mean},
          {"std", pp.std},
          {"mask_interpolation", "bilinear, same geometry as the image"}};
}

}  // namespace

json AuditConfig::to_json() const {
  return {{"models", models},
          {"precisions", precisions},
          {"weights", weights},
          {"image_dir", image_dir},
          {"mask_dir", mask_dir},
          {"mask_generator", mask_generator},
          {"cache_dir", cache_dir},
          {"output_dir", output_dir},
          {"n", n},
          {"seed", seed},
          {"epsilon", epsilon},
          {"kld_orientation", kld_orientation},
          {"workers", workers},
          {"formats", formats},
          {"failure_threshold", failure_threshold},
          {"overlays", overlays},
          {"workdir", workdir}};
}

std::string resolve_path(const AuditConfig& config, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(config.workdir) / p).lexically_normal().string();
}

std::vector<std::string> validate(const AuditConfig& c) {
  std::vector<std::string> errors;
  if (c.models.empty()) errors.push_back("models: at least one model is required");
  std::set<std::string> seen;
  for (const auto& m : c.models) {
    if (!nn::is_supported_architecture(m)) errors.push_back("models: unsupported model '" + m + "'");
    if (!seen.insert(m).second) errors.push_back("models: '" + m + "' listed twice");
  }
  if (c.precisions.empty()) errors.push_back("precisions: at least one precision is required");
  std::set<std::string> seen_prec;
  for (const auto& p : c.precisions) {
    try {
      const auto level = quant::parse_precision(p);
      if (!seen_prec.insert(std::string(quant::to_string(level.name))).second)
        errors.push_back("precisions: '" + p + "' listed twice");
    } catch (const std::exception& e) {
      errors.push_back(std::string("precisions: ") + e.what());
    }
  }
  if (!fs::is_directory(c.workdir)) errors.push_back("workdir: '" + c.workdir + "' is not a directory");
  if (c.weights.empty()) {
    errors.push_back("weights: required (directory of <model>.safetensors files, or random:<seed>)");
  } else if (c.weights.rfind("random:", 0) == 0) {
    try {
      nn::open_weights(c.weights);
    } catch (const std::exception& e) {
      errors.push_back(std::string("weights: ") + e.what());
    }
  } else {
    const std::string dir = resolve_path(c, c.weights);
    if (!fs::is_directory(dir)) {
      errors.push_back("weights: '" + dir + "' is not a directory");
    } else {
      for (const auto& m : c.models)
        if (nn::is_supported_architecture(m) && !fs::is_regular_file(weights_for(c, m)))
          errors.push_back("weights: missing " + weights_for(c, m));
    }
  }
  if (c.image_dir.empty())
    errors.push_back("image_dir: required");
  else if (!fs::is_directory(resolve_path(c, c.image_dir)))
    errors.push_back("image_dir: '" + resolve_path(c, c.image_dir) + "' is not a directory");
  if (c.mask_dir.empty() && c.mask_generator.empty())
    errors.push_back("mask_dir: required when no mask_generator is configured");
  else if (!c.mask_dir.empty() && !fs::is_directory(resolve_path(c, c.mask_dir)))
    errors.push_back("mask_dir: '" + resolve_path(c, c.mask_dir) + "' is not a directory");
  if (!c.mask_generator.empty() &&
      (c.mask_generator.find("{input}") == std::string::npos || c.mask_generator.find("{output}") == std::string::npos))
    errors.push_back("mask_generator: command must contain {input} and {output}");
  if (c.output_dir.empty()) errors.push_back("output_dir: required");
  if (c.n == 0) errors.push_back("n: must be positive");
  if (!(c.epsilon > 0.0)) errors.push_back("epsilon: must be positive");
  try {
    metrics::parse_kld_orientation(c.kld_orientation);
  } catch (const std::exception& e) {
    errors.push_back(std::string("kld_orientation: ") + e.what());
  }
  if (c.workers < 1) errors.push_back("workers: must be at least 1");
  try {
    harness::parse_formats(c.formats);
  } catch (const std::exception& e) {
    errors.push_back(std::string("formats: ") + e.what());
  }
  if (!(c.failure_threshold >= 0.0 && c.failure_threshold <= 1.0))
    errors.push_back("failure_threshold: must lie in [0, 1]");
  if (c.overlays < 0) errors.push_back("overlays: must not be negative");
  return errors;
}

int cmd_audit(const AuditConfig& c, std::ostream& err) {
  const auto errors = validate(c);
  if (!errors.empty()) {
    for (const auto& e : errors) err << "config error: " << e << "\n";
    return kConfigError;
  }
  std::vector<quant::PrecisionLevel> levels;
  std::vector<quant::Precision> precisions;
  for (const auto& p : c.precisions) {
    levels.push_back(quant::parse_precision(p));
    precisions.push_back(levels.back().name);
  }
  const saliency::MaskGenerator generator =
      c.mask_generator.empty()
          ? saliency::MaskGenerator{}
          : saliency::MaskGenerator(c.mask_generator,
                                    fs::path(resolve_path(c, c.cache_dir.empty() ? c.output_dir : c.cache_dir)) / "masks");

  harness::DatasetIndex data;
  try {
    data = harness::load_dataset(resolve_path(c, c.image_dir), resolve_path(c, c.mask_dir), c.n, c.seed, generator);
  } catch (const std::invalid_argument& e) {
    err << "config error: dataset: " << e.what() << "\n";
    return kConfigError;
  }

  std::vector<ModelSpec> specs;
  for (const auto& m : c.models) specs.push_back(make_model_spec(m, weights_for(c, m)));

  harness::RunOptions options;
  options.cache_dir = resolve_path(c, c.cache_dir);
  options.workers = c.workers;
  options.metric_options = {c.epsilon, metrics::parse_kld_orientation(c.kld_orientation)};
  options.generator = generator;
  options.log = [&err](const std::string& line) { err << line << "\n" << std::flush; };
  for (std::size_t i = 0; i < data.entries.size() && i < static_cast<std::size_t>(c.overlays); ++i)
    options.keep_maps_for.insert(data.entries[i].image_id);

  try {
    const harness::RunResult run = harness::run_matrix(specs, levels, data, options);

    harness::ReportInput report;
    report.models = c.models;
    report.precisions = precisions;
    report.records = run.records;
    report.failures = run.failures;
    json prov;
    prov["config"] = c.to_json();
    prov["seed"] = c.seed;
    prov["epsilon"] = c.epsilon;
    prov["kld_orientation"] = c.kld_orientation;
    prov["std_convention"] = "population";
    prov["class_policy"] = harness::kClassPolicy;
    json ranges = json::object();
    for (const auto& level : levels)
      if (!level.is_identity()) ranges[std::string(quant::to_string(level.name))] = {level.q_min, level.q_max};
    prov["precision_ranges"] = ranges;
    prov["quantization"] = {{"granularity", "per-tensor"},
                            {"statistics", "dynamic min/max per forward pass"},
                            {"rounding", "half away from zero"},
                            {"zero_point", "real-valued"},
                            {"sites", "conv and linear weights, block-output activations"},
                            {"biases", "full precision"}};
    json layers = json::object(), weights = json::object();
    for (const auto& s : specs) {
      layers[s.architecture] = select_target_layer(s);
      weights[s.architecture] = nn::open_weights(s.weights)->id();
    }
    prov["target_layers"] = layers;
    prov["weights"] = weights;
    prov["preprocessing"] = preprocessing_json(specs.front().preprocessing);
    json ids = json::array();
    for (const auto& e : data.entries) ids.push_back(e.image_id);
    prov["dataset"] = {{"sample_size", data.sample_size}, {"seed", data.seed}, {"image_ids", ids}};
    report.provenance = prov;

    const fs::path out_dir = resolve_path(c, c.output_dir);
    harness::emit_report(report, out_dir, harness::parse_formats(c.formats));

    if (!run.kept.empty()) {
      for (const auto& entry : data.entries) {
        std::vector<harness::OverlayRow> rows;
        for (const auto& k : run.kept) {
          if (k.image_id != entry.image_id) continue;
          harness::OverlayRow row;
          row.rgb = image::resize_and_crop(image::read_rgb(entry.image_path), specs.front().preprocessing);
          row.mask = k.mask;
          for (const auto& [p, cam] : k.cams) row.cams.push_back(cam);
          rows.push_back(std::move(row));
        }
        if (!rows.empty()) harness::emit_overlays(rows, out_dir / "overlays" / (entry.image_id + ".png"));
      }
    }

    err << "cache: " << run.stats.cache_hits << " hits, " << run.stats.cache_misses << " misses; "
        << run.stats.models_loaded << " models loaded\n";
    const double pairs = static_cast<double>(c.models.size() * data.entries.size());
    const double rate = pairs > 0 ? static_cast<double>(run.failures.size()) / pairs : 0.0;
    if (!run.failures.empty())
      err << run.failures.size() << " of " << pairs << " (model, image) pairs failed (rate " << rate << ")\n";
    if (rate > c.failure_threshold) {
      err << "failure rate exceeds threshold " << c.failure_threshold << "\n";
      return kRuntimeFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_score(const std::string& gt_path, const std::string& cam_path, double epsilon,
              const std::string& kld_orientation, std::ostream& out, std::ostream& err) {
  metrics::MetricOptions options;
  try {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    options = {epsilon, metrics::parse_kld_orientation(kld_orientation)};
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    const GridF gt = load_map(gt_path);
    GridF cam = load_map(cam_path);
    if (cam.rows() != gt.rows() || cam.cols() != gt.cols())
      cam = resize_bilinear(cam, gt.rows(), gt.cols());
    const auto t = metrics::metric_triple(gt, cam, options);
    const json j = {{"sim", t.sim},
                    {"cc", t.cc ? json(*t.cc) : json(nullptr)},
                    {"kld", t.kld},
                    {"degenerate", t.degenerate},
                    {"epsilon", epsilon},
                    {"kld_orientation", kld_orientation}};
    out << j.dump() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_overlay(const std::string& image_path, const std::string& mask_path, const std::vector<std::string>& cam_paths,
                const std::string& out_path, std::ostream& err) {
  if (cam_paths.empty()) {
    err << "error: no CAMs given\n";
    return kConfigError;
  }
  try {
    harness::OverlayRow row;
    row.rgb = image::read_rgb(image_path);
    row.mask = saliency::load_mask(mask_path).values;
    for (const auto& p : cam_paths) row.cams.push_back(load_map(p));
    harness::emit_overlays({row}, out_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_report(const std::string& records_path, const std::string& out_dir, const std::string& formats,
               std::ostream& err) {
  harness::ReportFormats f;
  try {
    f = harness::parse_formats(formats);
  } catch (const std::exception& e) {
    err << "config error: formats: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    harness::rerender_report(records_path, out_dir, f);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit how quantization shifts Grad-CAM++ heatmaps of CNN classifiers", "camq"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags override its values");
  app.require_subcommand(1);

  AuditConfig cfg;
  auto* audit = app.add_subcommand("audit", "Run the model x precision x image matrix and write reports");
  audit->add_option("--models", cfg.models, "Architectures")->delimiter(',')->capture_default_str();
  audit->add_option("--precisions", cfg.precisions, "Precision levels (f32,int16,int8)")->delimiter(',')->capture_default_str();
  audit->add_option("--weights", cfg.weights, "Directory of <model>.safetensors, or random:<seed>");
  audit->add_option("--image-dir,--image_dir", cfg.image_dir, "Directory of input images");
  audit->add_option("--mask-dir,--mask_dir", cfg.mask_dir, "Directory of <image id>.png masks");
  audit->add_option("--mask-generator,--mask_generator", cfg.mask_generator,
                    "Command producing a mask, with {input} and {output} placeholders");
  audit->add_option("--cache-dir,--cache_dir", cfg.cache_dir, "CAM cache directory (env CAMQ_CACHE_DIR)");
  audit->add_option("--output-dir,--output_dir", cfg.output_dir, "Report directory")->capture_default_str();
  audit->add_option("--n", cfg.n, "Number of sampled images")->capture_default_str();
  audit->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
  audit->add_option("--epsilon", cfg.epsilon, "KLD epsilon")->capture_default_str();
  audit->add_option("--kld-orientation,--kld_orientation", cfg.kld_orientation, "cam_weighted or gt_weighted")
      ->capture_default_str();
  audit->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
  audit->add_option("--formats", cfg.formats, "Report formats (csv,md,json)")->capture_default_str();
  audit->add_option("--failure-threshold,--failure_threshold", cfg.failure_threshold,
                    "Tolerated fraction of failed (model, image) pairs")->capture_default_str();
  audit->add_option("--overlays", cfg.overlays, "Write overlay figures for the first N images")->capture_default_str();
  audit->add_option("--workdir", cfg.workdir, "Base for relative paths")->capture_default_str();

  std::string gt_path, cam_path, score_orientation = "cam_weighted";
  double score_eps = metrics::kDefaultEpsilon;
  auto* score = app.add_subcommand("score", "Print SIM/CC/KLD of two maps as JSON");
  score->add_option("gt", gt_path, "Ground-truth map (image or .bin heatmap)")->required();
  score->add_option("cam", cam_path, "CAM (image or .bin heatmap)")->required();
  score->add_option("--epsilon", score_eps, "KLD epsilon")->capture_default_str();
  score->add_option("--kld-orientation,--kld_orientation", score_orientation)->capture_default_str();

  std::string ov_image, ov_mask, ov_out;
  std::vector<std::string> ov_cams;
  auto* overlay = app.add_subcommand("overlay", "Compose image | mask | CAM overlays into one PNG");
  overlay->add_option("--image", ov_image, "Image")->required();
  overlay->add_option("--mask", ov_mask, "Mask")->required();
  overlay->add_option("--cams", ov_cams, "CAM files in display order")->delimiter(',');
  overlay->add_option("--out", ov_out, "Output PNG")->required();

  std::string rec_path, rep_out, rep_formats = "csv,md,json";
  auto* report = app.add_subcommand("report", "Re-render reports from records.json");
  report->add_option("records", rec_path, "records.json")->required();
  report->add_option("--output-dir,--output_dir", rep_out, "Output directory (default: next to records.json)");
  report->add_option("--formats", rep_formats)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  if (audit->parsed()) {
    // the environment overrides the config file, an explicit flag overrides both
    const bool flag_given = [&] {
      for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a.rfind("--cache-dir", 0) == 0 || a.rfind("--cache_dir", 0) == 0) return true;
      }
      return false;
    }();
    if (const char* env = std::getenv("CAMQ_CACHE_DIR"); env && *env && !flag_given) cfg.cache_dir = env;
    return cmd_audit(cfg, err);
  }
  if (score->parsed()) return cmd_score(gt_path, cam_path, score_eps, score_orientation, out, err);
  if (overlay->parsed()) return cmd_overlay(ov_image, ov_mask, ov_cams, ov_out, err);
  if (report->parsed()) {
    if (rep_out.empty()) rep_out = fs::path(rec_path).parent_path().string();
    if (rep_out.empty()) rep_out = ".";
    return cmd_report(rec_path, rep_out, rep_formats, err);
  }
  return kConfigError;
}

}  // namespace camq::cli
