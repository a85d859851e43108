#include "camq/metrics.hpp"

#include <string>

namespace camq::metrics {

std::string_view to_string(KldOrientation o) {
  return o == KldOrientation::CamWeighted ? "cam_weighted" : "gt_weighted";
}

KldOrientation parse_kld_orientation(std::string_view text) {
  if (text == "cam_weighted") return KldOrientation::CamWeighted;
  if (text == "gt_weighted") return KldOrientation::GtWeighted;
  throw std::invalid_argument("unknown KLD orientation '" + std::string(text) +
                              "' (expected cam_weighted or gt_weighted)");
}

}  // namespace camq::metrics
