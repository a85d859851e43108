#include "camq/harness/run_matrix.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "camq/cam.hpp"
#include "camq/hash.hpp"
#include "camq/heatmap_io.hpp"
#include "camq/image.hpp"
#include "camq/nn/zoo.hpp"
#include "camq/quantized_model.hpp"

namespace camq::harness {
namespace fs = std::filesystem;
namespace {

using quant::Precision;
using quant::PrecisionLevel;

// Builds the network and its quantized wrappers on first use.
class LazyModel {
 public:
  explicit LazyModel(const ModelSpec& spec) : spec_(spec) {
    if (!nn::is_supported_architecture(spec.architecture))
      throw std::invalid_argument("unsupported model: " + spec.architecture);
    target_ = select_target_layer(spec);
    weights_ = nn::open_weights(spec.weights);
    weights_id_ = weights_->id();
  }

  const std::string& weights_id() const { return weights_id_; }
  const std::string& target() const { return target_; }
  bool loaded() const { return base_ != nullptr; }

  std::shared_ptr<const QuantizedModel> get(const PrecisionLevel& level) {
    std::lock_guard lock(mutex_);
    if (!base_)
      base_ = std::make_shared<const nn::Network>(nn::build_model(spec_.architecture, *weights_));
    auto& slot = wrapped_[level.name];
    if (!slot) slot = std::make_shared<const QuantizedModel>(base_, level, spec_.architecture);
    return slot;
  }

 private:
  ModelSpec spec_;
  std::unique_ptr<nn::WeightSource> weights_;
  std::string target_;
  std::string weights_id_;
  std::mutex mutex_;
  std::shared_ptr<const nn::Network> base_;
  std::map<Precision, std::shared_ptr<const QuantizedModel>> wrapped_;
};

struct Cam {
  GridF map;
  int class_index = -1;
  int predicted_class = -1;
  bool zero_gradient = false;
};

struct ImageOutcome {
  std::vector<RunRecord> records;
  std::optional<Failure> failure;
  std::optional<KeptMaps> kept;
};

}  // namespace

std::string cam_cache_key(const ModelSpec& spec, const std::string& weights_id, Precision precision,
                          const std::string& image_id) {
  const Preprocessing& pp = spec.preprocessing;
  std::ostringstream s;
  s.precision(9);
  s << "camq-cam-v1|model=" << spec.architecture << "|weights=" << weights_id
    << "|target=" << select_target_layer(spec) << "|precision=" << quant::to_string(precision)
    << "|image=" << image_id << "|class=" << kClassPolicy << "|resize=" << pp.resize << "|crop=" << pp.crop
    << "|mean=" << pp.mean[0] << "," << pp.mean[1] << "," << pp.mean[2] << "|std=" << pp.std[0] << ","
    << pp.std[1] << "," << pp.std[2];
  return hex64(fnv1a64(s.str()));
}

RunResult run_matrix(const std::vector<ModelSpec>& models, const std::vector<PrecisionLevel>& precisions,
                     const DatasetIndex& data, const RunOptions& options) {
  if (models.empty()) throw std::invalid_argument("no models given");
  if (precisions.empty()) throw std::invalid_argument("no precisions given");

  RunResult result;
  std::atomic<std::size_t> hits{0}, misses{0};
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(line);
  };

  for (const ModelSpec& spec : models) {
    LazyModel model(spec);
    const std::string weights_id = model.weights_id();
    const Preprocessing& pp = spec.preprocessing;

    auto cam_for = [&](const PrecisionLevel& level, const std::string& image_id, const nn::Tensor& input) {
      fs::path path;
      if (!options.cache_dir.empty()) {
        path = options.cache_dir / (cam_cache_key(spec, weights_id, level.name, image_id) + ".bin");
        try {
          if (auto stored = read_heatmap(path)) {
            const HeatmapMeta& m = stored->meta;
            if (m.model == spec.architecture && m.precision == quant::to_string(level.name) &&
                m.image_id == image_id && m.height == input.height() && m.width == input.width()) {
              ++hits;
              return Cam{std::move(stored->values), m.class_index, m.predicted_class, m.zero_gradient};
            }
          }
        } catch (const std::exception& e) {
          log("warning: ignoring unreadable cache entry " + path.string() + ": " + e.what());
        }
      }
      ++misses;
      const auto wrapped = model.get(level);
      CamResult r = compute_gradcampp(*wrapped, input, model.target());
      if (r.zero_gradient)
        log("warning: zero gradient for " + spec.architecture + "/" + std::string(quant::to_string(level.name)) +
            "/" + image_id);
      Cam cam{std::move(r.heatmap), r.class_index, r.predicted_class, r.zero_gradient};
      if (!path.empty()) {
        const HeatmapMeta meta{spec.architecture, std::string(quant::to_string(level.name)), image_id,
                               cam.class_index, static_cast<int>(cam.map.rows()), static_cast<int>(cam.map.cols()),
                               cam.predicted_class, cam.zero_gradient};
        write_heatmap(path, cam.map, meta);
      }
      return cam;
    };

    auto process = [&](const DatasetEntry& entry) {
      ImageOutcome out;
      try {
        const cv::Mat rgb = image::read_rgb(entry.image_path);
        const nn::Tensor input = image::to_tensor(image::resize_and_crop(rgb, pp), pp);
        const fs::path mask_path =
            entry.mask_path.empty() ? options.generator.ensure(entry.image_path, entry.image_id) : entry.mask_path;
        const saliency::SalientObjectMask mask = saliency::load_mask(mask_path);
        if (mask.converted) log("warning: mask " + mask_path.string() + " is not grayscale; using luminance");
        const GridF gt = image::crop_map(mask.values, rgb.rows, rgb.cols, pp);

        const Cam f32 = cam_for(PrecisionLevel::f32(), entry.image_id, input);
        std::vector<std::pair<Precision, Cam>> cams;
        for (const PrecisionLevel& level : precisions)
          cams.emplace_back(level.name, level.is_identity() ? f32 : cam_for(level, entry.image_id, input));

        for (const auto& [precision, cam] : cams) {
          RunRecord rec;
          rec.model = spec.architecture;
          rec.precision = precision;
          rec.image_id = entry.image_id;
          rec.class_index = cam.class_index;
          rec.predicted_class = cam.predicted_class;
          rec.f32_predicted_class = f32.predicted_class;
          rec.zero_gradient = cam.zero_gradient;
          rec.comparison = Comparison::VsGt;
          rec.metrics = metrics::metric_triple(gt, cam.map, options.metric_options);
          out.records.push_back(rec);
          if (precision != Precision::F32) {
            rec.comparison = Comparison::VsF32;
            rec.metrics = metrics::metric_triple(f32.map, cam.map, options.metric_options);
            out.records.push_back(rec);
          }
        }
        if (options.keep_maps_for.count(entry.image_id)) {
          KeptMaps kept{spec.architecture, entry.image_id, {}, gt};
          for (const auto& [precision, cam] : cams) kept.cams.emplace_back(precision, cam.map);
          out.kept = std::move(kept);
        }
      } catch (const std::exception& e) {
        out.records.clear();
        out.kept.reset();
        out.failure = Failure{spec.architecture, entry.image_id, e.what()};
        log("failure: " + spec.architecture + "/" + entry.image_id + ": " + e.what());
      }
      return out;
    };

    const std::size_t n = data.entries.size();
    std::vector<ImageOutcome> outcomes(n);
    std::atomic<std::size_t> next{0}, done{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        outcomes[i] = process(data.entries[i]);
        const std::size_t d = ++done;
        if (d == n || d % 10 == 0) log(spec.architecture + ": " + std::to_string(d) + "/" + std::to_string(n) + " images");
      }
    };
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    for (auto& o : outcomes) {
      for (auto& r : o.records) result.records.push_back(std::move(r));
      if (o.failure) result.failures.push_back(std::move(*o.failure));
      if (o.kept) result.kept.push_back(std::move(*o.kept));
    }
    if (model.loaded()) ++result.stats.models_loaded;
  }
  result.stats.cache_hits = hits;
  result.stats.cache_misses = misses;
  return result;
}

}  // namespace camq::harness
