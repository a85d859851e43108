#include "camq/nn/weights.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <stdexcept>

#include <Eigen/Core>
#include "json.hpp"

#include "camq/hash.hpp"

namespace camq::nn {
namespace {

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

std::int64_t numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  if (dtype == "F64") return 8;
  return 0;
}

template <typename T>
void convert(const std::vector<char>& raw, std::vector<float>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<float>(v);
  }
}

}  // namespace

SafetensorsFile::SafetensorsFile(const std::string& path) : path_(path), file_(path, std::ios::binary) {
  if (!file_) throw std::runtime_error("cannot open weights file '" + path + "'");
  unsigned char len_bytes[8];
  if (!file_.read(reinterpret_cast<char*>(len_bytes), 8))
    throw std::runtime_error("truncated safetensors header in '" + path + "'");
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
  const auto file_size = std::filesystem::file_size(path);
  if (header_len > file_size - 8) throw std::runtime_error("corrupt safetensors header in '" + path + "'");
  std::string header(header_len, '\0');
  file_.read(header.data(), static_cast<std::streamsize>(header_len));
  data_offset_ = 8 + header_len;

  const auto meta = nlohmann::json::parse(header);
  for (const auto& [name, info] : meta.items()) {
    if (name == "__metadata__") continue;
    Entry e;
    e.dtype = info.at("dtype").get<std::string>();
    e.shape = info.at("shape").get<std::vector<std::int64_t>>();
    e.begin = info.at("data_offsets").at(0).get<std::uint64_t>();
    e.end = info.at("data_offsets").at(1).get<std::uint64_t>();
    if (e.end < e.begin || data_offset_ + e.end > file_size)
      throw std::runtime_error("tensor '" + name + "' lies outside '" + path + "'");
    entries_.emplace(name, std::move(e));
  }
  id_ = "safetensors:" + hex64(fnv1a64(header)) + ":" + std::to_string(file_size);
}

std::vector<std::string> SafetensorsFile::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::vector<float> SafetensorsFile::get(const std::string& name, const std::vector<std::int64_t>& shape,
                                        ParamKind) {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw std::runtime_error("weights file lacks tensor '" + name + "'");
  const Entry& e = it->second;
  if (e.shape != shape)
    throw std::runtime_error("tensor '" + name + "' has shape " + shape_str(e.shape) + ", expected " +
                             shape_str(shape));
  const std::size_t width = dtype_size(e.dtype);
  if (width == 0) throw std::runtime_error("tensor '" + name + "' has unsupported dtype " + e.dtype);
  const auto n = static_cast<std::size_t>(numel(shape));
  if (e.end - e.begin != n * width) throw std::runtime_error("tensor '" + name + "' has inconsistent size");

  std::vector<char> raw(n * width);
  {
    std::lock_guard lock(mutex_);
    file_.seekg(static_cast<std::streamoff>(data_offset_ + e.begin));
    if (!file_.read(raw.data(), static_cast<std::streamsize>(raw.size())))
      throw std::runtime_error("failed reading tensor '" + name + "'");
  }
  std::vector<float> out(n);
  if (e.dtype == "F32")
    convert<float>(raw, out);
  else if (e.dtype == "F64")
    convert<double>(raw, out);
  else if (e.dtype == "F16")
    convert<Eigen::half>(raw, out);
  else
    convert<Eigen::bfloat16>(raw, out);
  return out;
}

std::vector<float> RandomWeights::get(const std::string& name, const std::vector<std::int64_t>& shape,
                                      ParamKind kind) {
  const auto n = static_cast<std::size_t>(numel(shape));
  std::vector<float> out(n, 0.0f);
  std::mt19937_64 rng(fnv1a64(name, seed_ ^ 0x9e3779b97f4a7c15ULL));
  const std::int64_t receptive = shape.size() > 2 ? numel(shape) / (shape[0] * shape[1]) : 1;
  switch (kind) {
    case ParamKind::ConvWeight: {
      const double fan_out = static_cast<double>(shape.at(0) * receptive);
      std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_out)));
      for (auto& v : out) v = dist(rng);
      break;
    }
    case ParamKind::LinearWeight:
    case ParamKind::LinearBias: {
      const double fan_in = kind == ParamKind::LinearWeight ? static_cast<double>(shape.at(1))
                                                            : static_cast<double>(n);
      const auto bound = static_cast<float>(1.0 / std::sqrt(fan_in));
      std::uniform_real_distribution<float> dist(-bound, bound);
      for (auto& v : out) v = dist(rng);
      break;
    }
    case ParamKind::BnWeight:
    case ParamKind::BnVar: std::fill(out.begin(), out.end(), 1.0f); break;
    case ParamKind::ConvBias:
    case ParamKind::BnBias:
    case ParamKind::BnMean: break;
  }
  return out;
}

std::unique_ptr<WeightSource> open_weights(const std::string& spec) {
  constexpr std::string_view prefix = "random:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string digits = spec.substr(prefix.size());
    std::size_t used = 0;
    unsigned long long seed = 0;
    try {
      seed = std::stoull(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (digits.empty() || used != digits.size())
      throw std::invalid_argument("bad random weight spec '" + spec + "'");
    return std::make_unique<RandomWeights>(seed);
  }
  return std::make_unique<SafetensorsFile>(spec);
}

}  // namespace camq::nn
