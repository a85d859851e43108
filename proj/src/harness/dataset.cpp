#include "camq/harness/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace camq::harness {
namespace fs = std::filesystem;
namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

// uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw std::invalid_argument("sample larger than population");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

DatasetIndex load_dataset(const fs::path& image_dir, const fs::path& mask_dir, std::size_t n,
                          std::uint64_t seed, const saliency::MaskGenerator& generator) {
  if (mask_dir.empty() && !generator.configured())
    throw std::invalid_argument("no mask directory given and generator not configured");
  if (!fs::is_directory(image_dir))
    throw std::invalid_argument("image directory '" + image_dir.string() + "' does not exist");
  if (!mask_dir.empty() && !fs::is_directory(mask_dir))
    throw std::invalid_argument("mask directory '" + mask_dir.string() + "' does not exist");
  if (n == 0) throw std::invalid_argument("sample size must be positive");

  std::map<std::string, fs::path> images;
  for (const auto& e : fs::directory_iterator(image_dir)) {
    if (!e.is_regular_file() || !is_image(e.path())) continue;
    const std::string id = e.path().stem().string();
    if (!images.emplace(id, e.path()).second)
      throw std::invalid_argument("duplicate image id '" + id + "' in '" + image_dir.string() + "'");
  }

  std::vector<DatasetEntry> candidates;
  for (const auto& [id, path] : images) {
    fs::path mask;
    if (!mask_dir.empty() && fs::is_regular_file(mask_dir / (id + ".png"))) mask = mask_dir / (id + ".png");
    if (mask.empty() && !generator.configured()) continue;
    candidates.push_back({id, path, mask});
  }
  if (candidates.size() < n)
    throw std::invalid_argument("insufficient images: requested " + std::to_string(n) + ", found " +
                                std::to_string(candidates.size()) + " with masks (short by " +
                                std::to_string(n - candidates.size()) + ")");

  DatasetIndex index;
  index.sample_size = n;
  index.seed = seed;
  for (std::size_t i : sample_indices(candidates.size(), n, seed)) index.entries.push_back(candidates[i]);
  std::sort(index.entries.begin(), index.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.image_id < b.image_id; });
  return index;
}

}  // namespace camq::harness
