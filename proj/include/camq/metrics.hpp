#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "camq/grid.hpp"

// Saliency alignment metrics. All accumulation happens in double regardless
// of the input scalar type.
namespace camq::metrics {

inline constexpr double kDefaultEpsilon = 1e-7;

/// Non-negative grid whose entries sum to one. Only to_prob and uniform_prob
/// construct one.
class ProbMap {
 public:
  const GridD& values() const { return values_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  Eigen::Index size() const { return values_.size(); }

 private:
  explicit ProbMap(GridD values) : values_(std::move(values)) {}
  GridD values_;

  template <typename Derived>
  friend ProbMap to_prob(const Eigen::ArrayBase<Derived>& map);
  friend ProbMap uniform_prob(Eigen::Index rows, Eigen::Index cols);
};

template <typename Derived>
ProbMap to_prob(const Eigen::ArrayBase<Derived>& map) {
  GridD values = map.template cast<double>();
  if (values.size() == 0) throw std::invalid_argument("degenerate map");
  if (!values.allFinite()) throw std::invalid_argument("non-finite input");
  if ((values < 0.0).any()) throw std::invalid_argument("negative values in map");
  const double total = values.sum();
  if (!(total > 0.0)) throw std::invalid_argument("degenerate map");
  values /= total;
  return ProbMap(std::move(values));
}

inline ProbMap uniform_prob(Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("degenerate map");
  return ProbMap(GridD::Constant(rows, cols, 1.0 / static_cast<double>(rows * cols)));
}

inline void require_same_shape(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2) {
  if (r1 != r2 || c1 != c2) throw std::invalid_argument("dimension mismatch");
}

/// Histogram intersection: sum of elementwise minima.
inline double sim(const ProbMap& gt, const ProbMap& cam) {
  require_same_shape(gt.rows(), gt.cols(), cam.rows(), cam.cols());
  return gt.values().min(cam.values()).sum();
}

enum class KldOrientation {
  /// sum_i cam_i * log(eps + cam_i / (eps + gt_i)), the weighting as published.
  CamWeighted,
  /// sum_i gt_i * log(eps + gt_i / (eps + cam_i)), the usual saliency convention.
  GtWeighted,
};

std::string_view to_string(KldOrientation o);
KldOrientation parse_kld_orientation(std::string_view text);

inline double kld(const ProbMap& gt, const ProbMap& cam, double epsilon = kDefaultEpsilon,
                  KldOrientation orientation = KldOrientation::CamWeighted) {
  require_same_shape(gt.rows(), gt.cols(), cam.rows(), cam.cols());
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const GridD& p = orientation == KldOrientation::CamWeighted ? cam.values() : gt.values();
  const GridD& q = orientation == KldOrientation::CamWeighted ? gt.values() : cam.values();
  return (p * (epsilon + p / (epsilon + q)).log()).sum();
}

/// Pearson correlation of the flattened grids.
template <typename DerivedA, typename DerivedB>
double cc(const Eigen::ArrayBase<DerivedA>& a, const Eigen::ArrayBase<DerivedB>& b) {
  require_same_shape(a.rows(), a.cols(), b.rows(), b.cols());
  if (a.size() == 0) throw std::invalid_argument("constant map");
  const GridD x = a.template cast<double>();
  const GridD y = b.template cast<double>();
  const GridD dx = x - x.mean();
  const GridD dy = y - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw std::invalid_argument("constant map");
  return (dx * dy).sum() / std::sqrt(sxx * syy);
}

struct MetricTriple {
  double sim = 0.0;
  std::optional<double> cc;  // missing when either map is constant
  double kld = 0.0;
  bool degenerate = false;   // a map was all-zero or constant
};

struct MetricOptions {
  double epsilon = kDefaultEpsilon;
  KldOrientation orientation = KldOrientation::CamWeighted;
};

/// SIM and KLD on sum-one distributions, CC on the maps as given. An all-zero
/// map is replaced by the uniform distribution for SIM/KLD; a constant map
/// leaves CC missing. Both cases set the degenerate flag.
template <typename DerivedA, typename DerivedB>
MetricTriple metric_triple(const Eigen::ArrayBase<DerivedA>& gt_map,
                           const Eigen::ArrayBase<DerivedB>& cam_map,
                           const MetricOptions& options = {}) {
  require_same_shape(gt_map.rows(), gt_map.cols(), cam_map.rows(), cam_map.cols());
  MetricTriple out;
  auto prob_or_uniform = [&out](const auto& map) {
    if (map.size() > 0 && (map.template cast<double>().sum() > 0.0)) return to_prob(map);
    out.degenerate = true;
    return uniform_prob(map.rows(), map.cols());
  };
  const ProbMap gt = prob_or_uniform(gt_map);
  const ProbMap cam = prob_or_uniform(cam_map);
  out.sim = sim(gt, cam);
  out.kld = kld(gt, cam, options.epsilon, options.orientation);
  try {
    out.cc = cc(gt_map, cam_map);
  } catch (const std::invalid_argument&) {
    out.degenerate = true;
  }
  return out;
}

}  // namespace camq::metrics
