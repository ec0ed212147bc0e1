#pragma once

// Small dense regression network: ReLU hidden layers, identity scalar output,
// squared-error backpropagation and an Adam optimizer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlb/errors.hpp"
#include "dlb/rng.hpp"

namespace dlb {

enum class Activation { kRelu, kIdentity };

inline std::string_view activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "identity";
}

inline Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

/// Parameter tensors in the shape of an Mlp. Also used for gradients and
/// optimizer moments.
struct MlpParams {
  // weights[l] is dims[l+1] x dims[l], row-major (row = output unit)
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpParams zeros_like(std::span<const std::size_t> dims) {
    MlpParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      p.weights.emplace_back(dims[l] * dims[l + 1], 0.0);
      p.biases.emplace_back(dims[l + 1], 0.0);
    }
    return p;
  }

  void set_zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }

  bool same_shape(const MlpParams& o) const {
    if (weights.size() != o.weights.size() || biases.size() != o.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].size() != o.weights[l].size() || biases[l].size() != o.biases[l].size())
        return false;
    }
    return true;
  }

  template <typename F>
  void for_each(F&& f) {
    for (auto& w : weights) for (auto& v : w) f(v);
    for (auto& b : biases) for (auto& v : b) f(v);
  }

  bool operator==(const MlpParams&) const = default;
};

struct Mlp {
  std::vector<std::size_t> layer_dims;
  MlpParams params;
  Activation hidden_activation = Activation::kRelu;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += layer_dims[l + 1] * (layer_dims[l] + 1);
    return n;
  }

  void validate() const {
    if (layer_dims.size() < 2) throw ShapeError("mlp needs at least one layer");
    for (auto d : layer_dims)
      if (d == 0) throw ShapeError("mlp layer dims must be positive");
    if (layer_dims.back() != 1) throw ShapeError("mlp output dim must be 1");
    auto expect = MlpParams::zeros_like(layer_dims);
    if (!expect.same_shape(params)) throw ShapeError("mlp parameters do not match layer dims");
    for (const auto& w : params.weights)
      for (double v : w)
        if (!std::isfinite(v)) throw NumericalError("mlp has non-finite weight");
    for (const auto& b : params.biases)
      for (double v : b)
        if (!std::isfinite(v)) throw NumericalError("mlp has non-finite bias");
  }

  bool operator==(const Mlp&) const = default;
};

/// Hidden sizes used for every sub-model: input -> 8 -> 32 -> 64 -> 1.
inline std::vector<std::size_t> default_layer_dims(std::size_t input_dim = 1) {
  return {input_dim, 8, 32, 64, 1};
}

/// Glorot-uniform weights, zero biases.
inline Mlp make_mlp(std::vector<std::size_t> dims, std::uint64_t seed,
                    Activation hidden = Activation::kRelu) {
  Mlp m;
  m.layer_dims = std::move(dims);
  m.hidden_activation = hidden;
  if (m.layer_dims.size() < 2) throw ShapeError("mlp needs at least one layer");
  m.params = MlpParams::zeros_like(m.layer_dims);
  Xoshiro256 rng(seed);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double fan = static_cast<double>(m.layer_dims[l] + m.layer_dims[l + 1]);
    const double limit = std::sqrt(6.0 / fan);
    for (auto& w : m.params.weights[l]) w = rng.uniform(-limit, limit);
  }
  m.validate();
  return m;
}

/// Scratch buffers for one forward/backward pass, plus a transposed weight
/// cache (in x out) so every inner loop is a contiguous axpy.
class MlpWorkspace {
 public:
  explicit MlpWorkspace(const Mlp& m) { reset(m); }

  void reset(const Mlp& m) {
    const auto& d = m.layer_dims;
    acts_.assign(d.size(), {});
    deltas_.assign(d.size(), {});
    for (std::size_t l = 0; l < d.size(); ++l) {
      acts_[l].assign(d[l], 0.0);
      deltas_[l].assign(d[l], 0.0);
    }
    transposed_.assign(m.num_layers(), {});
    refresh(m);
  }

  // Must be called whenever the model weights change.
  void refresh(const Mlp& m) {
    const auto& d = m.layer_dims;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      const std::size_t in = d[l], out = d[l + 1];
      auto& t = transposed_[l];
      t.resize(in * out);
      const auto& w = m.params.weights[l];
      for (std::size_t j = 0; j < out; ++j)
        for (std::size_t i = 0; i < in; ++i) t[i * out + j] = w[j * in + i];
    }
  }

  double run_forward(const Mlp& m, std::span<const double> x) {
    const auto& d = m.layer_dims;
    std::copy(x.begin(), x.end(), acts_[0].begin());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      const std::size_t in = d[l], out = d[l + 1];
      const double* a = acts_[l].data();
      const double* t = transposed_[l].data();
      double* z = acts_[l + 1].data();
      const double* b = m.params.biases[l].data();
      for (std::size_t j = 0; j < out; ++j) z[j] = b[j];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        const double* row = t + i * out;
        for (std::size_t j = 0; j < out; ++j) z[j] += ai * row[j];
      }
      if (l + 1 < m.num_layers() && m.hidden_activation == Activation::kRelu) {
        for (std::size_t j = 0; j < out; ++j) z[j] = z[j] > 0.0 ? z[j] : 0.0;
      }
    }
    return acts_.back()[0];
  }

  /// Adds scale * d/dparams (out - target)^2 into grads. Requires a prior
  /// run_forward on the same input. Returns the squared error.
  double accumulate_backward(const Mlp& m, double target, double scale, MlpParams& grads) {
    const auto& d = m.layer_dims;
    const std::size_t L = m.num_layers();
    const double out = acts_.back()[0];
    const double err = out - target;
    deltas_[L][0] = 2.0 * err * scale;
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t in = d[l], outd = d[l + 1];
      const double* delta = deltas_[l + 1].data();
      const double* a = acts_[l].data();
      double* gw = grads.weights[l].data();
      double* gb = grads.biases[l].data();
      for (std::size_t j = 0; j < outd; ++j) {
        const double dj = delta[j];
        gb[j] += dj;
        if (dj == 0.0) continue;
        double* grow = gw + j * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += dj * a[i];
      }
      if (l == 0) break;
      double* prev = deltas_[l].data();
      std::fill(prev, prev + in, 0.0);
      const double* w = m.params.weights[l].data();
      for (std::size_t j = 0; j < outd; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        const double* wrow = w + j * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += dj * wrow[i];
      }
      if (m.hidden_activation == Activation::kRelu) {
        // a[i] is the post-ReLU activation of layer l; zero means inactive
        for (std::size_t i = 0; i < in; ++i)
          if (!(a[i] > 0.0)) prev[i] = 0.0;
      }
    }
    return err * err;
  }

 private:
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
  std::vector<std::vector<double>> transposed_;
};

inline void check_input(const Mlp& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw ShapeError("mlp input has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(m.input_dim()));
  for (double v : x)
    if (!std::isfinite(v)) throw NumericalError("mlp input is not finite");
}

/// Scalar prediction. Pure: no state besides the model weights.
inline double forward(const Mlp& m, std::span<const double> x) {
  check_input(m, x);
  const auto& d = m.layer_dims;
  std::vector<double> a(x.begin(), x.end()), z;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t in = d[l], out = d[l + 1];
    const auto& w = m.params.weights[l];
    z.assign(m.params.biases[l].begin(), m.params.biases[l].end());
    // same accumulation order as MlpWorkspace::run_forward
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t j = 0; j < out; ++j) z[j] += a[i] * w[j * in + i];
    if (l + 1 < m.num_layers() && m.hidden_activation == Activation::kRelu)
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    a.swap(z);
  }
  return a[0];
}

/// Gradient of (forward(x) - target)^2 with respect to every parameter.
inline MlpParams backward(const Mlp& m, std::span<const double> x, double target) {
  check_input(m, x);
  if (!std::isfinite(target)) throw NumericalError("backward: target is not finite");
  MlpWorkspace ws(m);
  MlpParams grads = MlpParams::zeros_like(m.layer_dims);
  const double out = ws.run_forward(m, x);
  if (!std::isfinite(out)) throw NumericalError("backward: non-finite network output");
  ws.accumulate_backward(m, target, 1.0, grads);
  for (const auto& w : grads.weights)
    for (double v : w)
      if (!std::isfinite(v)) throw NumericalError("backward: non-finite gradient");
  return grads;
}

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  MlpParams first_moment;
  MlpParams second_moment;

  static AdamState for_model(const Mlp& m, double lr = 0.01) {
    AdamState s;
    s.lr = lr;
    s.first_moment = MlpParams::zeros_like(m.layer_dims);
    s.second_moment = MlpParams::zeros_like(m.layer_dims);
    return s;
  }
};

/// One bias-corrected Adam update in place.
inline void adam_step(Mlp& m, const MlpParams& grads, AdamState& s) {
  if (!grads.same_shape(m.params) || !s.first_moment.same_shape(m.params) ||
      !s.second_moment.same_shape(m.params))
    throw ShapeError("adam_step: gradient/moment shapes do not match the model");
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& mo,
                    std::vector<double>& ve) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      mo[k] = s.beta1 * mo[k] + (1.0 - s.beta1) * g[k];
      ve[k] = s.beta2 * ve[k] + (1.0 - s.beta2) * g[k] * g[k];
      const double mhat = mo[k] / c1;
      const double vhat = ve[k] / c2;
      p[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  };
  for (std::size_t l = 0; l < m.params.weights.size(); ++l) {
    update(m.params.weights[l], grads.weights[l], s.first_moment.weights[l],
           s.second_moment.weights[l]);
    update(m.params.biases[l], grads.biases[l], s.first_moment.biases[l],
           s.second_moment.biases[l]);
  }
}

// ---- serialization ----------------------------------------------------------

inline constexpr int kMlpFormatVersion = 1;

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["version"] = kMlpFormatVersion;
  j["layer_dims"] = m.layer_dims;
  j["activation"] = std::string(activation_name(m.hidden_activation));
  auto weights = nlohmann::json::array();
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < out; ++r) {
      const auto* begin = m.params.weights[l].data() + r * in;
      rows.push_back(std::vector<double>(begin, begin + in));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  j["biases"] = m.params.biases;
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kMlpFormatVersion)
      throw UnsupportedVersion("mlp format version " + std::to_string(version) + " not supported");
    Mlp m;
    m.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    m.hidden_activation = activation_from_name(j.at("activation").get<std::string>());
    if (m.layer_dims.size() < 2) throw ShapeError("mlp needs at least one layer");
    const auto& weights = j.at("weights");
    if (!weights.is_array() || weights.size() != m.layer_dims.size() - 1)
      throw ParseError("mlp weights do not match layer_dims");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      std::vector<double> flat;
      for (const auto& row : weights[l]) {
        auto r = row.get<std::vector<double>>();
        if (r.size() != m.layer_dims[l]) throw ParseError("mlp weight row has wrong length");
        flat.insert(flat.end(), r.begin(), r.end());
      }
      m.params.weights.push_back(std::move(flat));
    }
    m.params.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed mlp document: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("malformed mlp document: ") + e.what());
  }
}

}  // namespace dlb
