#pragma once

// Named parameter registry plus checkpoint serialization.
//
// Checkpoint layout: a single JSON line (parameter names, shapes, dtype,
// byte offsets, optional metadata) terminated by '\n', followed by raw
// little-endian 32-bit float blobs at the stated offsets (relative to the
// first byte after the newline). The loader validates every shape against
// the live model and rejects mismatches.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "atgmoe/random.hpp"
#include "atgmoe/tensor.hpp"
#include <json.hpp>

namespace atgmoe::nc {

template <class S>
class ParamStore {
 public:
  // Registers a parameter initialized from N(0, stddev); stddev 0 => zeros.
  Tensor<S> add(const std::string& name, Shape shape, Rng& rng, double stddev) {
    if (index_.count(name)) throw std::logic_error("param registered twice: " + name);
    int64_t n = shape_numel(shape);
    std::vector<S> data(static_cast<size_t>(n));
    if (stddev != 0.0)
      for (auto& v : data) v = static_cast<S>(rng.normal(0.0, stddev));
    auto t = Tensor<S>::from_data(std::move(shape), std::move(data), true);
    index_[name] = names_.size();
    names_.push_back(name);
    params_.push_back(t);
    return t;
  }

  Tensor<S> add_constant_init(const std::string& name, Shape shape, S value) {
    if (index_.count(name)) throw std::logic_error("param registered twice: " + name);
    auto t = Tensor<S>::full(std::move(shape), value, true);
    index_[name] = names_.size();
    names_.push_back(name);
    params_.push_back(t);
    return t;
  }

  size_t size() const { return params_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor<S>& param(size_t i) { return params_[i]; }
  const Tensor<S>& param(size_t i) const { return params_[i]; }

  Tensor<S>& param(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return params_[it->second];
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  int64_t total_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

  void save(const std::string& path, const nlohmann::json& meta = {}) const {
    nlohmann::json header;
    header["format"] = "atgmoe-ckpt-v1";
    header["dtype"] = "f32";
    if (!meta.is_null() && !meta.empty()) header["meta"] = meta;
    nlohmann::json entries = nlohmann::json::array();
    uint64_t off = 0;
    for (size_t i = 0; i < params_.size(); ++i) {
      nlohmann::json e;
      e["name"] = names_[i];
      e["shape"] = params_[i].shape();
      e["offset"] = off;
      off += static_cast<uint64_t>(params_[i].numel()) * 4u;
      entries.push_back(e);
    }
    header["params"] = entries;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f << header.dump() << "\n";
    for (const auto& p : params_) {
      const auto& v = p.values();
      std::vector<float> buf(v.size());
      for (size_t j = 0; j < v.size(); ++j) buf[j] = static_cast<float>(v[j]);
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
  }

  // Loads values into the registered parameters. Every registered parameter
  // must be present with an identical shape; extra entries are rejected.
  nlohmann::json load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint header missing: " + path);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", "") != "atgmoe-ckpt-v1")
      throw std::runtime_error("unrecognized checkpoint format in " + path);
    std::streampos blob_start = f.tellg();
    std::map<std::string, std::pair<Shape, uint64_t>> found;
    for (const auto& e : header.at("params")) {
      Shape s = e.at("shape").get<Shape>();
      found[e.at("name").get<std::string>()] = {s, e.at("offset").get<uint64_t>()};
    }
    if (found.size() != params_.size())
      throw std::runtime_error("checkpoint parameter count " + std::to_string(found.size()) +
                               " does not match model (" + std::to_string(params_.size()) + ")");
    for (size_t i = 0; i < params_.size(); ++i) {
      auto it = found.find(names_[i]);
      if (it == found.end())
        throw std::runtime_error("checkpoint missing parameter " + names_[i]);
      if (it->second.first != params_[i].shape())
        throw std::runtime_error("checkpoint shape mismatch for " + names_[i] + ": file " +
                                 shape_str(it->second.first) + " vs model " +
                                 shape_str(params_[i].shape()));
      f.seekg(blob_start + static_cast<std::streamoff>(it->second.second));
      std::vector<float> buf(static_cast<size_t>(params_[i].numel()));
      f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
      if (!f) throw std::runtime_error("checkpoint blob truncated at " + names_[i]);
      auto& dst = params_[i].mutable_values();
      for (size_t j = 0; j < buf.size(); ++j) dst[j] = static_cast<S>(buf[j]);
    }
    return header.contains("meta") ? header["meta"] : nlohmann::json::object();
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<S>> params_;
  std::map<std::string, size_t> index_;
};

}  // namespace atgmoe::nc
