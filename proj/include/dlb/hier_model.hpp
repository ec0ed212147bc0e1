#pragma once

// Hierarchical learned placement model.
//
// A key is normalized into a KeyVector (input stage), routed through one
// model per disperse layer (each regressor's output is rounded to a child
// index), and a leaf model predicts a local offset inside the leaf's
// sub-circle (mapping stage). The global ring position is
//
//   position = local_offset + (model_id - 1) * t
//
// with t = T / num_leaves, so leaf i owns exactly [(i-1)t, i*t) (join stage).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlb/errors.hpp"
#include "dlb/mlp.hpp"
#include "dlb/ring.hpp"

namespace dlb {

struct HierConfig {
  std::vector<std::uint32_t> fanouts{16};
  std::uint64_t ring_size = RingConfig::kDefaultSize;

  std::size_t disperse_layers() const { return fanouts.size(); }

  std::uint64_t num_leaves() const {
    std::uint64_t n = 1;
    for (auto f : fanouts) n *= f;
    return n;
  }

  // Number of models in disperse layer `layer` (0-based); layer ==
  // disperse_layers() gives the leaf count.
  std::uint64_t models_in_layer(std::size_t layer) const {
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < layer; ++i) n *= fanouts[i];
    return n;
  }

  std::uint64_t sub_circle_width() const { return ring_size / num_leaves(); }

  void validate() const {
    if (fanouts.empty()) throw ValidationError("hierarchy needs at least one disperse layer");
    for (auto f : fanouts)
      if (f == 0) throw ValidationError("fanouts must be positive");
    if (ring_size < 2) throw ValidationError("ring size must be >= 2");
    const auto leaves = num_leaves();
    if (leaves > ring_size || ring_size % leaves != 0)
      throw ValidationError("leaf count " + std::to_string(leaves) +
                            " does not divide ring size " + std::to_string(ring_size));
  }

  bool operator==(const HierConfig&) const = default;
};

struct KeyNorm {
  double min = 0.0;
  double max = 1.0;

  bool operator==(const KeyNorm&) const = default;
};

struct KeyVector {
  std::vector<double> values;
};

inline KeyVector vectorize_key(double key, const KeyNorm& norm) {
  if (!(norm.min < norm.max)) throw ValidationError("key normalization needs min < max");
  if (!std::isfinite(key)) throw UnsupportedKey("key is not a finite number");
  double v = (key - norm.min) / (norm.max - norm.min);
  v = std::clamp(v, 0.0, 1.0);
  return {{v}};
}

/// String keys are accepted when they parse completely as a decimal number.
inline KeyVector vectorize_key(std::string_view key, const KeyNorm& norm) {
  double v = 0.0;
  const char* first = key.data();
  const char* last = key.data() + key.size();
  if (!key.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (key.empty() || ec != std::errc{} || ptr != last)
    throw UnsupportedKey("key '" + std::string(key) + "' is not a decimal number");
  return vectorize_key(v, norm);
}

struct Placement {
  std::uint32_t model_id = 1;  // 1-based leaf index
  RingPosition position;
};

class HierModel {
 public:
  HierModel() = default;

  /// Freshly initialized (untrained) model with the default sub-model shape.
  static HierModel initialized(const HierConfig& config, KeyNorm norm, std::uint64_t seed) {
    config.validate();
    HierModel m;
    m.config_ = config;
    m.norm_ = norm;
    std::uint64_t stream = 0;
    for (std::size_t layer = 0; layer < config.disperse_layers(); ++layer) {
      std::vector<Mlp> models;
      for (std::uint64_t p = 0; p < config.models_in_layer(layer); ++p)
        models.push_back(make_mlp(default_layer_dims(), derive_seed(seed, stream++)));
      m.disperse_.push_back(std::move(models));
    }
    for (std::uint64_t i = 0; i < config.num_leaves(); ++i)
      m.leaves_.push_back(make_mlp(default_layer_dims(), derive_seed(seed, stream++)));
    m.validate();
    return m;
  }

  HierModel(HierConfig config, KeyNorm norm, std::vector<std::vector<Mlp>> disperse,
            std::vector<Mlp> leaves)
      : config_(std::move(config)),
        norm_(norm),
        disperse_(std::move(disperse)),
        leaves_(std::move(leaves)) {
    validate();
  }

  void validate() const {
    config_.validate();
    if (!(norm_.min < norm_.max) || !std::isfinite(norm_.min) || !std::isfinite(norm_.max))
      throw ValidationError("key normalization needs finite min < max");
    if (disperse_.size() != config_.disperse_layers())
      throw ValidationError("disperse layer count does not match fanouts");
    for (std::size_t l = 0; l < disperse_.size(); ++l) {
      if (disperse_[l].size() != config_.models_in_layer(l))
        throw ValidationError("disperse layer " + std::to_string(l) + " has wrong model count");
      for (const auto& m : disperse_[l]) m.validate();
    }
    if (leaves_.size() != config_.num_leaves())
      throw ValidationError("leaf model count does not match fanouts");
    for (const auto& m : leaves_) m.validate();
    for (const auto& layer : disperse_)
      for (const auto& m : layer)
        if (m.input_dim() != 1) throw ValidationError("sub-models must take a length-1 key vector");
    for (const auto& m : leaves_)
      if (m.input_dim() != 1) throw ValidationError("sub-models must take a length-1 key vector");
  }

  const HierConfig& config() const { return config_; }
  const KeyNorm& key_norm() const { return norm_; }
  const std::vector<std::vector<Mlp>>& disperse_models() const { return disperse_; }
  const std::vector<Mlp>& leaf_models() const { return leaves_; }
  std::uint64_t sub_circle_width() const { return config_.sub_circle_width(); }

  /// Walks the disperse layers; returns the 1-based leaf model id.
  std::uint32_t route(const KeyVector& x) const {
    std::uint64_t index = 0;
    for (std::size_t layer = 0; layer < disperse_.size(); ++layer) {
      const std::uint32_t fan = config_.fanouts[layer];
      const double out = forward(disperse_[layer][index], x.values);
      index = index * fan + (child_from_output(out, fan) - 1);
    }
    return static_cast<std::uint32_t>(index + 1);
  }

  /// Nearest-integer rounding clamped to [1, fanout].
  static std::uint32_t child_from_output(double out, std::uint32_t fanout) {
    if (std::isnan(out)) return 1;
    const double r = std::round(out);
    if (r <= 1.0) return 1;
    if (r >= static_cast<double>(fanout)) return fanout;
    return static_cast<std::uint32_t>(r);
  }

  /// Local offset inside the leaf's sub-circle, rounded and clamped to [0, t-1].
  std::uint64_t local_offset(std::uint32_t model_id, const KeyVector& x) const {
    const double out = forward(leaves_.at(model_id - 1), x.values);
    const auto t = config_.sub_circle_width();
    if (std::isnan(out)) return 0;
    const double r = std::round(out);
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(t - 1)) return t - 1;
    return static_cast<std::uint64_t>(r);
  }

  template <typename Key>
  Placement place(const Key& key) const {
    const KeyVector x = vectorize_key(key, norm_);
    const std::uint32_t id = route(x);
    const std::uint64_t mu = local_offset(id, x);
    return {id, RingPosition{mu + (std::uint64_t{id} - 1) * config_.sub_circle_width()}};
  }

  template <typename Key>
  RingPosition map_position(const Key& key) const {
    return place(key).position;
  }

  // Mutable access for the trainer.
  std::vector<std::vector<Mlp>>& mutable_disperse_models() { return disperse_; }
  std::vector<Mlp>& mutable_leaf_models() { return leaves_; }

  bool operator==(const HierModel&) const = default;

 private:
  HierConfig config_;
  KeyNorm norm_;
  std::vector<std::vector<Mlp>> disperse_;
  std::vector<Mlp> leaves_;
};

template <typename Key>
RingPosition map_position(const HierModel& model, const Key& key) {
  return model.map_position(key);
}

inline std::uint32_t route(const HierModel& model, const KeyVector& x) { return model.route(x); }

// ---- model file -------------------------------------------------------------

inline constexpr int kHierModelFormatVersion = 1;

inline nlohmann::json serialize(const HierModel& model) {
  nlohmann::json j;
  j["version"] = kHierModelFormatVersion;
  j["fanouts"] = model.config().fanouts;
  j["T"] = model.config().ring_size;
  j["t"] = model.sub_circle_width();
  j["key_norm"] = {{"min", model.key_norm().min}, {"max", model.key_norm().max}};
  auto disperse = nlohmann::json::array();
  for (const auto& layer : model.disperse_models()) {
    auto models = nlohmann::json::array();
    for (const auto& m : layer) models.push_back(mlp_to_json(m));
    disperse.push_back(std::move(models));
  }
  j["disperse"] = std::move(disperse);
  auto leaves = nlohmann::json::array();
  for (const auto& m : model.leaf_models()) leaves.push_back(mlp_to_json(m));
  j["leaves"] = std::move(leaves);
  return j;
}

inline HierModel deserialize(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError("model document is not a JSON object");
    const int version = j.at("version").get<int>();
    if (version != kHierModelFormatVersion)
      throw UnsupportedVersion("model format version " + std::to_string(version) +
                               " not supported");
    HierConfig config;
    config.fanouts = j.at("fanouts").get<std::vector<std::uint32_t>>();
    config.ring_size = j.at("T").get<std::uint64_t>();
    config.validate();
    if (j.at("t").get<std::uint64_t>() != config.sub_circle_width())
      throw ValidationError("sub-circle width t does not equal T / leaves");
    KeyNorm norm{j.at("key_norm").at("min").get<double>(), j.at("key_norm").at("max").get<double>()};
    std::vector<std::vector<Mlp>> disperse;
    for (const auto& layer : j.at("disperse")) {
      std::vector<Mlp> models;
      for (const auto& m : layer) models.push_back(mlp_from_json(m));
      disperse.push_back(std::move(models));
    }
    std::vector<Mlp> leaves;
    for (const auto& m : j.at("leaves")) leaves.push_back(mlp_from_json(m));
    return HierModel(std::move(config), norm, std::move(disperse), std::move(leaves));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
}

inline std::string serialize_to_string(const HierModel& model) { return serialize(model).dump(); }

inline HierModel deserialize_from_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model document is not valid JSON: ") + e.what());
  }
  return deserialize(j);
}

}  // namespace dlb
