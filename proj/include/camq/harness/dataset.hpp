#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camq/saliency.hpp"

namespace camq::harness {

struct DatasetEntry {
  std::string image_id;              // file stem
  std::filesystem::path image_path;
  std::filesystem::path mask_path;   // empty when the mask comes from the generator

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct DatasetIndex {
  std::vector<DatasetEntry> entries;  // sorted by image_id
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
};

/// Image files (.jpg, .jpeg, .png, .bmp; any case) in image_dir, paired with
/// <mask_dir>/<id>.png. Images without a mask file are candidates only when
/// the generator is configured. Draws a seeded sample of n candidates.
///
/// Throws before touching any model when neither a mask directory nor a
/// generator is available, and names the shortfall when fewer than n
/// candidates exist.
DatasetIndex load_dataset(const std::filesystem::path& image_dir, const std::filesystem::path& mask_dir,
                          std::size_t n, std::uint64_t seed,
                          const saliency::MaskGenerator& generator = {});

/// Seeded choice of k distinct indices from [0, n), platform independent.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace camq::harness
