#pragma once

// Training for HierModel: rank labeling of the key set, per-layer child
// labels, per-leaf partitioning, and the Adam training loop over every
// sub-model. The reported loss is the sum over all sub-models of their mean
// squared error in label units.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dlb/errors.hpp"
#include "dlb/hier_model.hpp"
#include "dlb/mlp.hpp"
#include "dlb/rng.hpp"

namespace dlb {

/// Label of each key = rank in sorted order * (T / |K|). Returned in the
/// order of `keys`. Keys must be distinct.
inline std::vector<double> make_mapping_labels(std::span<const double> keys, std::uint64_t ring_size) {
  if (keys.empty()) throw TooFewKeys("make_mapping_labels: empty key list");
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  const double step = static_cast<double>(ring_size) / static_cast<double>(keys.size());
  std::vector<double> labels(keys.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (rank > 0 && keys[order[rank]] == keys[order[rank - 1]])
      throw DuplicateKey("make_mapping_labels: duplicate key " + std::to_string(keys[order[rank]]));
    labels[order[rank]] = static_cast<double>(rank) * step;
  }
  return labels;
}

/// 1-based index c of the half-open interval [(c-1)w, c*w) holding label,
/// w = T / count, clamped to [1, count].
inline std::uint32_t interval_of(double label, std::uint64_t count, std::uint64_t ring_size) {
  const double w = static_cast<double>(ring_size) / static_cast<double>(count);
  double c = std::floor(label / w);
  // guard against the division rounding across an interval edge
  if (c * w > label) c -= 1.0;
  else if ((c + 1.0) * w <= label) c += 1.0;
  if (c < 0.0) c = 0.0;
  if (c > static_cast<double>(count - 1)) c = static_cast<double>(count - 1);
  return static_cast<std::uint32_t>(c) + 1;
}

/// Per disperse layer, the global 1-based id of the model in the next layer
/// that owns each label. Layer l has prod(fanouts[0..l]) candidates.
inline std::vector<std::vector<std::uint32_t>> make_disperse_labels(std::span<const double> labels,
                                                                    std::span<const std::uint32_t> fanouts,
                                                                    std::uint64_t ring_size) {
  std::vector<std::vector<std::uint32_t>> out;
  std::uint64_t count = 1;
  for (auto fan : fanouts) {
    count *= fan;
    std::vector<std::uint32_t> layer(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) layer[i] = interval_of(labels[i], count, ring_size);
    out.push_back(std::move(layer));
  }
  return out;
}

struct LabeledSet {
  std::vector<double> keys;            // sorted ascending, distinct
  std::vector<double> mapping_labels;  // aligned with keys
  std::vector<std::vector<std::uint32_t>> disperse_labels;  // [layer][key], global ids
};

/// Sorts and deduplicates raw keys, then labels them.
inline LabeledSet label_keys(std::span<const double> raw_keys, const HierConfig& config) {
  config.validate();
  LabeledSet set;
  set.keys.assign(raw_keys.begin(), raw_keys.end());
  for (double k : set.keys)
    if (!std::isfinite(k)) throw UnsupportedKey("training keys must be finite");
  std::sort(set.keys.begin(), set.keys.end());
  set.keys.erase(std::unique(set.keys.begin(), set.keys.end()), set.keys.end());
  set.mapping_labels = make_mapping_labels(set.keys, config.ring_size);
  set.disperse_labels = make_disperse_labels(set.mapping_labels, config.fanouts, config.ring_size);
  return set;
}

struct LeafSubset {
  std::vector<std::size_t> members;  // indices into LabeledSet::keys
  std::vector<double> targets;       // local offset within the sub-circle
};

/// Splits keys by their label path. Leaf targets are local:
/// label - (model_id - 1) * t.
inline std::vector<LeafSubset> partition_for_leaves(const LabeledSet& labeled, const HierConfig& config) {
  config.validate();
  std::vector<LeafSubset> leaves(config.num_leaves());
  const double t = static_cast<double>(config.sub_circle_width());
  const auto& leaf_ids = labeled.disperse_labels.back();
  for (std::size_t i = 0; i < labeled.keys.size(); ++i) {
    const std::uint32_t id = leaf_ids[i];
    auto& leaf = leaves[id - 1];
    leaf.members.push_back(i);
    leaf.targets.push_back(labeled.mapping_labels[i] - static_cast<double>(id - 1) * t);
  }
  return leaves;
}

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  std::uint64_t seed = 7;
  // 0 = hardware concurrency
  unsigned threads = 0;
};

struct ModelLoss {
  std::string name;  // "disperse[layer][index]" or "leaf[id]"
  double final_loss = 0.0;  // loss of the weights that were kept
  std::size_t samples = 0;
};

struct TrainReport {
  std::vector<ModelLoss> models;
  std::size_t epochs = 0;
  // loss_curve[0] is before the first update; loss_curve[e] after epoch e.
  std::vector<double> loss_curve;

  double initial_loss() const { return loss_curve.front(); }
  double final_loss() const { return loss_curve.back(); }

  void write_csv(std::ostream& os) const {
    os << "epoch,total_loss\n";
    for (std::size_t e = 0; e < loss_curve.size(); ++e) {
      os << e << ',' << nlohmann::json(loss_curve[e]).dump() << '\n';
    }
  }
};

namespace detail {

struct RegressionResult {
  Mlp model;
  std::vector<double> loss_curve;  // mean squared error in target units
  double best_loss = 0.0;          // loss of the returned weights
};

/// Fits one sub-model. Inputs are standardized (zero mean, unit variance)
/// and targets rescaled to [-1, 1] during optimization and the scaling is folded into the first and last
/// layers afterwards, so the returned network consumes raw inputs and
/// predicts raw targets.
inline RegressionResult fit_regressor(std::span<const double> xs, std::span<const double> ys,
                                      const TrainOptions& opt, std::uint64_t seed) {
  RegressionResult result;
  result.model = make_mlp(default_layer_dims(), seed);
  Mlp& model = result.model;
  const std::size_t n = xs.size();
  result.loss_curve.assign(opt.epochs + 1, 0.0);
  if (n == 0) return result;

  double x_mean = 0.0, x_var = 0.0;
  for (double x : xs) x_mean += x;
  x_mean /= static_cast<double>(n);
  for (double x : xs) x_var += (x - x_mean) * (x - x_mean);
  x_var /= static_cast<double>(n);
  const double x_scale = x_var > 0.0 ? 1.0 / std::sqrt(x_var) : 1.0;
  const double x_shift = -x_mean * x_scale;
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double y_mid = 0.5 * (*ymax_it + *ymin_it);
  const double y_half = *ymax_it > *ymin_it ? 0.5 * (*ymax_it - *ymin_it) : 1.0;

  std::vector<double> sx(n), sy(n);
  for (std::size_t i = 0; i < n; ++i) {
    sx[i] = xs[i] * x_scale + x_shift;
    sy[i] = (ys[i] - y_mid) / y_half;
  }

  MlpWorkspace ws(model);
  auto scaled_mse = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = ws.run_forward(model, std::span<const double>(&sx[i], 1)) - sy[i];
      total += e * e;
    }
    return total / static_cast<double>(n);
  };

  AdamState adam = AdamState::for_model(model, opt.learning_rate);
  MlpParams grads = MlpParams::zeros_like(model.layer_dims);
  Xoshiro256 rng(derive_seed(seed, 0x5eed));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double unscale = y_half * y_half;

  // Minibatch Adam at a fixed step size keeps jittering around the optimum,
  // so the weights from the epoch with the lowest full-set loss are kept.
  result.loss_curve[0] = scaled_mse() * unscale;
  double best = result.loss_curve[0];
  MlpParams best_params = model.params;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t stop = std::min(n, start + opt.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      grads.set_zero();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        ws.run_forward(model, std::span<const double>(&sx[i], 1));
        ws.accumulate_backward(model, sy[i], scale, grads);
      }
      adam_step(model, grads, adam);
      ws.refresh(model);
    }
    const double mse = scaled_mse();
    if (!std::isfinite(mse)) throw NumericalError("training diverged (non-finite loss)");
    result.loss_curve[epoch] = mse * unscale;
    if (result.loss_curve[epoch] < best) {
      best = result.loss_curve[epoch];
      best_params = model.params;
    }
  }
  model.params = std::move(best_params);
  result.best_loss = best;

  // Fold the affine maps: first layer sees x*x_scale + x_shift, the output
  // is y_half * net + y_mid.
  auto& w0 = model.params.weights.front();
  auto& b0 = model.params.biases.front();
  for (std::size_t j = 0; j < b0.size(); ++j) {
    b0[j] += w0[j] * x_shift;
    w0[j] *= x_scale;
  }
  for (auto& w : model.params.weights.back()) w *= y_half;
  auto& bl = model.params.biases.back();
  for (auto& b : bl) b = b * y_half + y_mid;
  model.validate();
  return result;
}

template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct TrainResult {
  HierModel model;
  TrainReport report;
};

/// Trains every disperse model on (key -> child index) and every leaf on
/// (key -> local offset). Leaves see the keys their labels route them to,
/// not the keys the trained disperse models would send. Deterministic for a
/// given seed regardless of thread count.
inline TrainResult train(std::span<const double> raw_keys, const HierConfig& config,
                         const TrainOptions& opt) {
  config.validate();
  if (opt.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (opt.batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(opt.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");

  LabeledSet labeled = label_keys(raw_keys, config);
  const std::size_t n = labeled.keys.size();
  if (n < std::max<std::uint64_t>(2, config.num_leaves()))
    throw TooFewKeys("need at least " + std::to_string(std::max<std::uint64_t>(2, config.num_leaves())) +
                     " distinct keys, got " + std::to_string(n));

  const KeyNorm norm{labeled.keys.front(), labeled.keys.back()};
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = vectorize_key(labeled.keys[i], norm).values[0];

  // One job per sub-model: disperse models first (layer-major), then leaves.
  struct Job {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
  };
  std::vector<Job> jobs;
  for (std::size_t layer = 0; layer < config.disperse_layers(); ++layer) {
    const std::uint32_t fan = config.fanouts[layer];
    const std::uint64_t models = config.models_in_layer(layer);
    const std::size_t first = jobs.size();
    for (std::uint64_t p = 0; p < models; ++p)
      jobs.push_back({"disperse[" + std::to_string(layer) + "][" + std::to_string(p) + "]", {}, {}});
    const double width = static_cast<double>(config.ring_size) / static_cast<double>(models * fan);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t parent = layer == 0 ? 0 : labeled.disperse_labels[layer - 1][i] - 1;
      const std::uint32_t local = (labeled.disperse_labels[layer][i] - 1) % fan + 1;
      // continuous coordinate whose nearest integer is the child tag
      double target = labeled.mapping_labels[i] / width - static_cast<double>(parent * fan) + 0.5;
      target = std::clamp(target, local - 0.5, local + 0.5 - 1e-9);
      jobs[first + parent].xs.push_back(xs[i]);
      jobs[first + parent].ys.push_back(target);
    }
  }
  auto subsets = partition_for_leaves(labeled, config);
  for (std::size_t id = 0; id < subsets.size(); ++id) {
    Job job{"leaf[" + std::to_string(id + 1) + "]", {}, std::move(subsets[id].targets)};
    for (auto idx : subsets[id].members) job.xs.push_back(xs[idx]);
    jobs.push_back(std::move(job));
  }

  std::vector<detail::RegressionResult> fitted(jobs.size());
  detail::parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
    fitted[j] = detail::fit_regressor(jobs[j].xs, jobs[j].ys, opt, derive_seed(opt.seed, j));
  });

  TrainResult out;
  out.report.epochs = opt.epochs;
  out.report.loss_curve.assign(opt.epochs + 1, 0.0);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t e = 0; e <= opt.epochs; ++e) out.report.loss_curve[e] += fitted[j].loss_curve[e];
    out.report.models.push_back({jobs[j].name, fitted[j].best_loss, jobs[j].xs.size()});
  }

  std::vector<std::vector<Mlp>> disperse;
  std::size_t j = 0;
  for (std::size_t layer = 0; layer < config.disperse_layers(); ++layer) {
    std::vector<Mlp> models;
    for (std::uint64_t p = 0; p < config.models_in_layer(layer); ++p) models.push_back(std::move(fitted[j++].model));
    disperse.push_back(std::move(models));
  }
  std::vector<Mlp> leaves;
  for (; j < jobs.size(); ++j) leaves.push_back(std::move(fitted[j].model));
  out.model = HierModel(config, norm, std::move(disperse), std::move(leaves));
  return out;
}

}  // namespace dlb
