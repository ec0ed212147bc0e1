// dlb: command-line driver for the learned load-balancing workbench.
//
//   dlb gen-data      --dist lognormal --count 200000 --seed 7 --out train.dlbk
//   dlb train         --data train.dlbk --fanouts 16 --seed 7 --out model.json
//   dlb eval-balance  --data test.dlbk --model model.json --seed 7 --out compare.csv
//   dlb simulate      --balancer dlb --model model.json --dist lognormal --seed 7 --out trace.csv
//   dlb compare       --model lognormal=ln.json --dists lognormal --seed 7 --out sim_compare.csv
//   dlb fig1          --seed 7 --out bins.csv
//
// Exit codes: 0 success, 2 usage/config error, 3 data/format error,
// 4 numerical failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "dlb/datagen.hpp"
#include "dlb/errors.hpp"
#include "dlb/experiments.hpp"
#include "dlb/hier_model.hpp"
#include "dlb/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Output files land in --out-dir, or $DLB_OUT_DIR when that is set.
struct OutputDir {
  std::string dir = ".";

  fs::path resolve(const std::string& file) const {
    fs::path p(file);
    if (p.is_absolute()) return p;
    const char* env = std::getenv("DLB_OUT_DIR");
    const fs::path base = env && *env ? fs::path(env) : fs::path(dir);
    fs::create_directories(base);
    return base / p;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw dlb::FormatError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw dlb::FormatError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw dlb::FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

dlb::HierModel load_model(const std::string& path) {
  if (path.empty()) throw dlb::ValidationError("missing model: pass --model <file>");
  if (!fs::exists(path)) throw dlb::ValidationError("missing model: '" + path + "' does not exist");
  return dlb::deserialize_from_string(read_text(path));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Distribution parameters shared by gen-data, simulate and compare. Unset
// values fall back to the per-distribution defaults.
struct DistFlags {
  std::string dist = "lognormal";
  std::optional<double> mu, sigma, mean, stddev, low, high;

  void add_to(CLI::App* app) {
    app->add_option("--dist", dist, "uniform | normal | lognormal")->capture_default_str();
    app->add_option("--mu", mu, "lognormal mu");
    app->add_option("--sigma", sigma, "lognormal sigma");
    app->add_option("--mean", mean, "normal mean");
    app->add_option("--stddev", stddev, "normal stddev");
    app->add_option("--low", low, "uniform lower bound");
    app->add_option("--high", high, "uniform upper bound");
  }

  dlb::DistributionSpec spec_for(dlb::DistKind kind) const {
    auto spec = dlb::DistributionSpec::defaults_for(kind);
    switch (kind) {
      case dlb::DistKind::kUniform:
        spec.a = low.value_or(spec.a);
        spec.b = high.value_or(spec.b);
        break;
      case dlb::DistKind::kNormal:
        spec.a = mean.value_or(spec.a);
        spec.b = stddev.value_or(spec.b);
        break;
      case dlb::DistKind::kLognormal:
        spec.a = mu.value_or(spec.a);
        spec.b = sigma.value_or(spec.b);
        break;
    }
    return spec;
  }

  dlb::DistributionSpec spec() const { return spec_for(dlb::dist_from_name(dist)); }
};

struct ClusterFlags {
  dlb::SimOptions opt;
  std::string hash = "murmur3";

  void add_to(CLI::App* app) {
    auto& c = opt.cluster;
    app->add_option("--servers", c.num_servers, "number of servers")->capture_default_str();
    app->add_option("--slots", c.slots_per_server, "concurrent jobs per server")->capture_default_str();
    app->add_option("--jobs", c.num_jobs, "number of jobs")->capture_default_str();
    app->add_option("--duration", c.job_duration_s, "job CPU time in seconds")->capture_default_str();
    app->add_option("--hash", hash, "hash for ch/chbl: bkdr | murmur3 | fnv1a")->capture_default_str();
    app->add_option("--vnodes", opt.virtual_nodes, "virtual nodes per server (ch/chbl)")->capture_default_str();
    app->add_option("--bound-c", opt.bound_c, "CHBL capacity factor c > 1")->capture_default_str();
    app->add_option("--epsilon", opt.epsilon, "DLB per-server job cap (0: jobs / servers)")->capture_default_str();
  }

  dlb::SimOptions resolved(std::uint64_t seed) const {
    auto o = opt;
    o.hash = dlb::HashFn::from_name(hash);
    o.seed = seed;
    return o;
  }
};

std::string fixed(double v, int precision = 2) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << v;
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-model load balancing workbench"};
  app.require_subcommand(1);
  OutputDir out_dir;
  app.add_option("--out-dir", out_dir.dir, "directory for output files (DLB_OUT_DIR overrides)");

  // gen-data
  DistFlags gen_dist;
  std::uint64_t gen_count = 200000, gen_seed = 0;
  std::string gen_out = "keys.dlbk";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic key set");
  gen_dist.add_to(gen);
  gen->add_option("--count", gen_count, "number of keys")->capture_default_str();
  gen->add_option("--seed", gen_seed, "random seed")->required();
  gen->add_option("--out", gen_out, "output dataset file")->capture_default_str();

  // train
  std::string train_data, train_fanouts = "16", train_out = "model.json", train_report = "train_report.csv";
  dlb::HierConfig train_cfg;
  dlb::TrainOptions train_opt;
  auto* tr = app.add_subcommand("train", "train a hierarchical placement model");
  tr->add_option("--data", train_data, "training dataset file")->required();
  tr->add_option("--fanouts", train_fanouts, "comma-separated children per disperse layer")->capture_default_str();
  tr->add_option("--ring-size", train_cfg.ring_size, "ring size T")->capture_default_str();
  tr->add_option("--epochs", train_opt.epochs, "training epochs")->capture_default_str();
  tr->add_option("--batch-size", train_opt.batch_size, "minibatch size")->capture_default_str();
  tr->add_option("--lr", train_opt.learning_rate, "Adam learning rate")->capture_default_str();
  tr->add_option("--threads", train_opt.threads, "worker threads (0: all cores)")->capture_default_str();
  tr->add_option("--seed", train_opt.seed, "random seed")->required();
  tr->add_option("--out", train_out, "model file")->capture_default_str();
  tr->add_option("--report", train_report, "loss curve CSV")->capture_default_str();

  // eval-balance
  std::string eval_data, eval_model, eval_methods, eval_out = "compare.csv";
  dlb::BalanceOptions eval_opt;
  auto* ev = app.add_subcommand("eval-balance", "compare per-server load std across balancers");
  ev->add_option("--data", eval_data, "test dataset file")->required();
  ev->add_option("--model", eval_model, "trained model (needed for dlb)");
  ev->add_option("--methods", eval_methods, "comma-separated methods (default: all)");
  ev->add_option("--servers", eval_opt.servers, "number of servers / bins")->capture_default_str();
  ev->add_option("--vnodes", eval_opt.virtual_nodes, "virtual nodes per server")->capture_default_str();
  ev->add_option("--bound-c", eval_opt.bound_c, "CHBL capacity factor c > 1")->capture_default_str();
  ev->add_option("--epsilon", eval_opt.epsilon, "DLB load threshold (0: ceil(1.25 m/n))")->capture_default_str();
  ev->add_option("--repeats", eval_opt.repeats, "repetitions for hash-based methods")->capture_default_str();
  ev->add_option("--seed", eval_opt.seed, "seed for ring layouts")->required();
  ev->add_option("--out", eval_out, "comparison CSV")->capture_default_str();

  // simulate
  std::string sim_balancer = "dlb", sim_model, sim_data, sim_out = "trace.csv";
  std::uint64_t sim_seed = 0;
  DistFlags sim_dist;
  ClusterFlags sim_cluster;
  auto* sim = app.add_subcommand("simulate", "run one balancer in the cluster simulator");
  sim->add_option("--balancer", sim_balancer, "ch | chbl | dlb")->capture_default_str();
  sim->add_option("--model", sim_model, "trained model (needed for dlb)");
  sim->add_option("--data", sim_data, "job keys file (default: generate from --dist)");
  sim_dist.add_to(sim);
  sim_cluster.add_to(sim);
  sim->add_option("--seed", sim_seed, "random seed")->required();
  sim->add_option("--out", sim_out, "trace CSV")->capture_default_str();

  // compare
  std::string cmp_dists = "lognormal,normal,uniform", cmp_out = "sim_compare.csv";
  std::vector<std::string> cmp_models;
  std::uint64_t cmp_seed = 0;
  bool cmp_traces = true;
  DistFlags cmp_dist;
  ClusterFlags cmp_cluster;
  auto* cmp = app.add_subcommand("compare", "simulated makespan of ch, chbl and dlb per distribution");
  cmp->add_option("--dists", cmp_dists, "comma-separated distributions")->capture_default_str();
  cmp->add_option("--model", cmp_models, "dist=model.json, once per distribution");
  cmp_dist.add_to(cmp);
  cmp_cluster.add_to(cmp);
  cmp->add_option("--seed", cmp_seed, "random seed")->required();
  cmp->add_flag("!--no-traces", cmp_traces, "skip per-run trace CSVs");
  cmp->add_option("--out", cmp_out, "summary CSV")->capture_default_str();

  // fig1
  std::uint64_t fig_count = 10240, fig_seed = 0;
  std::size_t fig_bins = 32;
  double fig_mean = 500000.0, fig_stddev = 100000.0;
  std::string fig_model, fig_out = "bins.csv";
  auto* fig = app.add_subcommand("fig1", "sorted bin counts of normal keys under each hash");
  fig->add_option("--count", fig_count, "number of keys")->capture_default_str();
  fig->add_option("--bins", fig_bins, "number of bins")->capture_default_str();
  fig->add_option("--mean", fig_mean, "normal mean")->capture_default_str();
  fig->add_option("--stddev", fig_stddev, "normal stddev")->capture_default_str();
  fig->add_option("--model", fig_model, "also map the keys through this model");
  fig->add_option("--seed", fig_seed, "random seed")->required();
  fig->add_option("--out", fig_out, "bins CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      auto spec = gen_dist.spec();
      spec.count = gen_count;
      spec.seed = gen_seed;
      const auto keys = dlb::generate(spec);
      const auto path = out_dir.resolve(gen_out);
      dlb::write_dataset(keys, path.string());
      std::cout << "wrote " << keys.size() << " " << dlb::dist_name(spec.kind) << " keys to " << path.string() << "\n";
    } else if (*tr) {
      const auto keys = dlb::read_dataset(train_data);
      train_cfg.fanouts.clear();
      for (const auto& f : split_list(train_fanouts)) train_cfg.fanouts.push_back(static_cast<std::uint32_t>(std::stoul(f)));
      auto result = dlb::train(keys, train_cfg, train_opt);
      const auto model_path = out_dir.resolve(train_out);
      write_text(model_path, dlb::serialize(result.model).dump() + "\n");
      std::ostringstream csv;
      result.report.write_csv(csv);
      write_text(out_dir.resolve(train_report), csv.str());
      std::cout << "trained " << result.report.models.size() << " sub-models over " << result.report.epochs
                << " epochs; total loss " << result.report.initial_loss() << " -> " << result.report.final_loss()
                << "\nmodel written to " << model_path.string() << "\n";
    } else if (*ev) {
      const auto keys = dlb::read_dataset(eval_data);
      const auto methods = eval_methods.empty() ? dlb::default_methods() : split_list(eval_methods);
      for (const auto& m : methods) dlb::MethodSpec::parse(m);
      std::optional<dlb::HierModel> model;
      if (std::find(methods.begin(), methods.end(), "dlb") != methods.end()) model = load_model(eval_model);
      const auto runs = dlb::eval_balance(keys, model ? &*model : nullptr, methods, eval_opt);
      const auto table = dlb::compare_table(runs);
      std::ostringstream csv;
      table.write_csv(csv);
      write_text(out_dir.resolve(eval_out), csv.str());
      std::cout << csv.str();
      std::cout << "# ch/chbl: " << eval_opt.virtual_nodes << " virtual nodes, c = " << eval_opt.bound_c
                << "; fnv1a stands in for the interpreter string hash\n";
    } else if (*sim) {
      const auto kind = dlb::balancer_from_name(sim_balancer);
      auto opt = sim_cluster.resolved(sim_seed);
      std::vector<double> keys;
      if (!sim_data.empty()) {
        keys = dlb::read_dataset(sim_data);
        opt.cluster.num_jobs = keys.size();
      } else {
        auto spec = sim_dist.spec();
        spec.count = opt.cluster.num_jobs;
        spec.seed = sim_seed;
        keys = dlb::generate(spec);
      }
      std::optional<dlb::HierModel> model;
      if (kind == dlb::BalancerKind::kDlb) model = load_model(sim_model);
      const auto trace = dlb::simulate_balancer(kind, keys, model ? &*model : nullptr, opt);
      std::ostringstream csv;
      dlb::write_trace_csv(trace, csv);
      write_text(out_dir.resolve(sim_out), csv.str());
      const auto s = dlb::summarize(trace, opt.cluster.num_servers);
      std::cout << "balancer " << sim_balancer << ": makespan " << fixed(s.makespan_s) << " s, mean finish "
                << fixed(s.mean_finish_s) << " s, busiest server "
                << *std::max_element(s.jobs_per_server.begin(), s.jobs_per_server.end()) << " jobs\n";
    } else if (*cmp) {
      std::map<std::string, std::string> model_paths;
      for (const auto& m : cmp_models) {
        const auto eq = m.find('=');
        if (eq == std::string::npos) throw dlb::ValidationError("--model expects dist=path, got '" + m + "'");
        model_paths[m.substr(0, eq)] = m.substr(eq + 1);
      }
      auto opt = cmp_cluster.resolved(cmp_seed);
      std::vector<dlb::SimCompareRow> rows;
      for (const auto& dist : split_list(cmp_dists)) {
        const auto kind = dlb::dist_from_name(dist);
        auto it = model_paths.find(dist);
        if (it == model_paths.end()) throw dlb::ValidationError("missing model for distribution '" + dist + "'");
        const auto model = load_model(it->second);
        auto spec = cmp_dist.spec_for(kind);
        spec.count = opt.cluster.num_jobs;
        spec.seed = cmp_seed;
        const auto keys = dlb::generate(spec);
        std::vector<dlb::SimCompareRow> block;
        for (auto b : {dlb::BalancerKind::kCh, dlb::BalancerKind::kChbl, dlb::BalancerKind::kDlb}) {
          const auto trace = dlb::simulate_balancer(b, keys, &model, opt);
          const auto s = dlb::summarize(trace, opt.cluster.num_servers);
          block.push_back({dist, std::string(dlb::balancer_name(b)), s.makespan_s, s.mean_finish_s,
                           *std::max_element(s.jobs_per_server.begin(), s.jobs_per_server.end()), 0.0});
          if (cmp_traces) {
            std::ostringstream csv;
            dlb::write_trace_csv(trace, csv);
            write_text(out_dir.resolve("trace_" + dist + "_" + std::string(dlb::balancer_name(b)) + ".csv"), csv.str());
          }
        }
        const double dlb_makespan = block.back().makespan_s;
        for (auto& r : block) r.dlb_reduction_pct = dlb::reduction_pct(r.makespan_s, dlb_makespan);
        rows.insert(rows.end(), block.begin(), block.end());
      }
      std::ostringstream csv;
      dlb::write_sim_compare_csv(rows, csv);
      write_text(out_dir.resolve(cmp_out), csv.str());
      std::cout << csv.str();
    } else if (*fig) {
      auto spec = dlb::DistributionSpec::normal(fig_mean, fig_stddev);
      spec.count = fig_count;
      spec.seed = fig_seed;
      const auto keys = dlb::generate(spec);
      auto series = dlb::hash_bin_series(keys, fig_bins);
      if (!fig_model.empty()) series.push_back(dlb::model_bin_series(keys, load_model(fig_model), fig_bins));
      std::ostringstream csv;
      dlb::write_bins_csv(series, csv);
      write_text(out_dir.resolve(fig_out), csv.str());
      for (const auto& s : series)
        std::cout << s.name << ": min " << s.counts.front() << ", max " << s.counts.back() << ", spread "
                  << fixed(dlb::spread(s.counts), 3) << "\n";
    }
  } catch (const dlb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case dlb::ErrorKind::kConfig:
      case dlb::ErrorKind::kCapacity: return kExitUsage;
      case dlb::ErrorKind::kData: return kExitData;
      case dlb::ErrorKind::kNumerical: return kExitNumerical;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad numeric argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
