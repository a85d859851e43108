#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace camq::nn {

/// Role of a parameter tensor; random sources use it to pick an initializer.
enum class ParamKind { ConvWeight, ConvBias, BnWeight, BnBias, BnMean, BnVar, LinearWeight, LinearBias };

/// Named parameter tensors in PyTorch state_dict naming and row-major layout.
class WeightSource {
 public:
  virtual ~WeightSource() = default;
  /// Throws when the tensor is missing or its shape differs.
  virtual std::vector<float> get(const std::string& name, const std::vector<std::int64_t>& shape,
                                 ParamKind kind) = 0;
  /// Stable identifier of the weight content, part of cache keys.
  virtual std::string id() const = 0;
};

/// Reader for the safetensors container (F32, F16, BF16 and F64 tensors).
class SafetensorsFile final : public WeightSource {
 public:
  explicit SafetensorsFile(const std::string& path);
  std::vector<float> get(const std::string& name, const std::vector<std::int64_t>& shape,
                         ParamKind kind) override;
  std::string id() const override { return id_; }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::vector<std::string> names() const;

 private:
  struct Entry {
    std::string dtype;
    std::vector<std::int64_t> shape;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
  };
  std::string path_;
  std::string id_;
  std::uint64_t data_offset_ = 0;
  std::map<std::string, Entry> entries_;
  std::ifstream file_;
  std::mutex mutex_;
};

/// Deterministic random parameters: Kaiming-normal (fan_out) convolutions,
/// identity batch norms, uniform(+-1/sqrt(fan_in)) linear weights. Each
/// tensor's stream is seeded from the global seed and the tensor name.
class RandomWeights final : public WeightSource {
 public:
  explicit RandomWeights(std::uint64_t seed) : seed_(seed) {}
  std::vector<float> get(const std::string& name, const std::vector<std::int64_t>& shape,
                         ParamKind kind) override;
  std::string id() const override { return "random:" + std::to_string(seed_); }

 private:
  std::uint64_t seed_;
};

/// "random:<seed>" or a path to a .safetensors file.
std::unique_ptr<WeightSource> open_weights(const std::string& spec);

}  // namespace camq::nn
