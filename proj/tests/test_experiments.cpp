#include <algorithm>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "dlb/experiments.hpp"
#include "dlb/trainer.hpp"

using namespace dlb;

TEST(Methods, Parse) {
  EXPECT_EQ(MethodSpec::parse("dlb").name(), "dlb");
  EXPECT_EQ(MethodSpec::parse("ch-bkdr").name(), "ch-bkdr");
  EXPECT_EQ(MethodSpec::parse("chbl-fnv1a").kind, BalancerKind::kChbl);
  for (const char* bad : {"", "ch", "dlb-bkdr", "ch-md5", "rr-bkdr"}) EXPECT_THROW(MethodSpec::parse(bad), ValidationError) << bad;
  EXPECT_EQ(default_methods().size(), 7u);
}

TEST(EvalBalance, SingleRepeatHasNoSpreadColumns) {
  const auto keys = generate(DistributionSpec::uniform().with_count(2000).with_seed(1));
  BalanceOptions opt;
  opt.repeats = 1;
  opt.servers = 8;
  const auto runs = eval_balance(keys, nullptr, {"ch-bkdr", "ch-murmur3", "chbl-fnv1a"}, opt);
  ASSERT_EQ(runs.size(), 3u);
  for (const auto& r : runs) EXPECT_EQ(r.stds.size(), 1u);
  std::ostringstream os;
  compare_table(runs).write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "method,mean_std,ratio_vs_best,excess_ratio_vs_best");
  EXPECT_THROW(eval_balance(keys, nullptr, {"dlb", "ch-bkdr"}, opt), ValidationError);
}

TEST(EvalBalance, DlbLowestOnLognormal) {
  const auto train_keys = generate(DistributionSpec::lognormal().with_count(50000).with_seed(1));
  const auto test_keys = generate(DistributionSpec::lognormal().with_count(50000).with_seed(2));
  TrainOptions topt;
  topt.epochs = 20;
  const auto model = train(train_keys, HierConfig{}, topt).model;
  BalanceOptions opt;
  opt.repeats = 3;
  const auto runs = eval_balance(test_keys, &model, {"ch-bkdr", "ch-murmur3", "ch-fnv1a", "chbl-bkdr", "dlb"}, opt);
  const auto table = compare_table(runs);
  const auto& dlb_row = table.rows.back();
  ASSERT_EQ(dlb_row.method, "dlb");
  for (const auto& r : table.rows) EXPECT_LE(dlb_row.mean_std, r.mean_std) << r.method;
}

TEST(Fig1, SeriesShape) {
  const auto keys = generate(DistributionSpec::normal().with_count(10240).with_seed(7));
  const auto series = hash_bin_series(keys, 32);
  ASSERT_EQ(series.size(), 3u);
  for (const auto& s : series) {
    EXPECT_EQ(s.counts.size(), 32u);
    EXPECT_TRUE(std::is_sorted(s.counts.begin(), s.counts.end()));
    EXPECT_EQ(std::accumulate(s.counts.begin(), s.counts.end(), std::uint64_t{0}), 10240u);
  }
  EXPECT_EQ(hash_bin_series(keys, 32)[1].counts, series[1].counts);
  std::ostringstream os;
  write_bins_csv(series, os);
  const auto text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 32);
}

TEST(SimCompare, SelfComparisonIsZero) {
  EXPECT_EQ(reduction_pct(640, 640), 0.0);
  EXPECT_DOUBLE_EQ(reduction_pct(1000, 387), 61.3);
}

TEST(SimCompare, ChblRespectsCapacity) {
  SimOptions opt;
  opt.cluster = {8, 2, 20.0, 400};
  const auto keys = generate(DistributionSpec::lognormal().with_count(400).with_seed(3));
  const auto trace = simulate_balancer(BalancerKind::kChbl, keys, nullptr, opt);
  const auto s = summarize(trace, 8);
  for (auto c : s.jobs_per_server) EXPECT_LE(c, 63u);  // ceil(1.25 * 400 / 8)
  EXPECT_THROW(simulate_balancer(BalancerKind::kDlb, keys, nullptr, opt), ValidationError);
}

TEST(SimCompare, DlbCapsJobsPerServer) {
  SimOptions opt;
  opt.cluster = {8, 2, 20.0, 400};
  const auto keys = generate(DistributionSpec::uniform().with_count(400).with_seed(4));
  TrainOptions topt;
  topt.epochs = 3;
  const auto model = train(keys, HierConfig{{4}, 1 << 20}, topt).model;
  const auto trace = simulate_balancer(BalancerKind::kDlb, keys, &model, opt);
  for (auto c : summarize(trace, 8).jobs_per_server) EXPECT_LE(c, 50u);
}
