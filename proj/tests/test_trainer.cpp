#include <numeric>
#include <sstream>
#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dlb/datagen.hpp"
#include "dlb/hash.hpp"
#include "dlb/metrics.hpp"
#include "dlb/trainer.hpp"

using namespace dlb;

TEST(Labels, MappingLabels) {
  const std::vector<double> keys{0.1, 0.5, 0.9};
  EXPECT_EQ(make_mapping_labels(keys, 300), (std::vector<double>{0, 100, 200}));
  const std::vector<double> shuffled{0.9, 0.1, 0.5};
  EXPECT_EQ(make_mapping_labels(shuffled, 300), (std::vector<double>{200, 0, 100}));
  const std::vector<double> one{4.2};
  EXPECT_EQ(make_mapping_labels(one, 300), std::vector<double>{0});
  const std::vector<double> dup{1, 2, 1};
  EXPECT_THROW(make_mapping_labels(dup, 300), DuplicateKey);
}

TEST(Labels, MaxLabelBelowRing) {
  std::vector<double> keys(997);
  std::iota(keys.begin(), keys.end(), 0.0);
  const auto labels = make_mapping_labels(keys, 1 << 20);
  const double mx = *std::max_element(labels.begin(), labels.end());
  EXPECT_DOUBLE_EQ(mx, 996.0 * (1 << 20) / 997.0);
  EXPECT_LT(mx, 1 << 20);
}

TEST(Labels, IntervalRule) {
  EXPECT_EQ(interval_of(0, 3, 300), 1u);
  EXPECT_EQ(interval_of(100, 2, 300), 1u);
  EXPECT_EQ(interval_of(150, 2, 300), 2u);
  EXPECT_EQ(interval_of(299.9, 3, 300), 3u);
  EXPECT_EQ(interval_of(400, 3, 300), 3u);
  // brute force: c is the unique interval with (c-1)w <= label < cw
  for (double label = 0; label < 300; label += 0.37) {
    const auto c = interval_of(label, 7, 300);
    ASSERT_LE((c - 1) * 300.0 / 7, label);
    ASSERT_LT(label, c * 300.0 / 7);
  }
}

TEST(Labels, DisperseLabelsAreGlobal) {
  const std::vector<double> labels{0, 260, 520, 1000};
  const std::vector<std::uint32_t> fan{2, 4};
  const auto d = make_disperse_labels(labels, fan, 1024);
  EXPECT_EQ(d[0], (std::vector<std::uint32_t>{1, 1, 2, 2}));
  EXPECT_EQ(d[1], (std::vector<std::uint32_t>{1, 3, 5, 8}));
}

TEST(Partition, SingleLeaf) {
  HierConfig cfg{{1}, 300};
  const auto set = label_keys(std::vector<double>{0.9, 0.1, 0.5}, cfg);
  const auto leaves = partition_for_leaves(set, cfg);
  ASSERT_EQ(leaves.size(), 1u);
  EXPECT_EQ(leaves[0].targets, set.mapping_labels);
}

TEST(Partition, DisjointCoverWithLocalTargets) {
  HierConfig cfg{{4, 2}, 1 << 16};
  auto keys = generate(DistributionSpec::lognormal().with_count(5000).with_seed(3));
  const auto set = label_keys(keys, cfg);
  const auto leaves = partition_for_leaves(set, cfg);
  std::set<std::size_t> seen;
  const double t = static_cast<double>(cfg.sub_circle_width());
  for (const auto& leaf : leaves) {
    for (std::size_t i = 0; i < leaf.members.size(); ++i) {
      EXPECT_TRUE(seen.insert(leaf.members[i]).second);
      EXPECT_GE(leaf.targets[i], 0.0);
      EXPECT_LT(leaf.targets[i], t);
    }
  }
  EXPECT_EQ(seen.size(), set.keys.size());
}

TEST(Train, LossDropsHundredfold) {
  HierConfig cfg{{4}, 1 << 20};
  const auto keys = generate(DistributionSpec::uniform().with_count(4000).with_seed(1));
  TrainOptions opt;
  opt.epochs = 100;
  opt.seed = 3;
  const auto r = train(keys, cfg, opt);
  ASSERT_EQ(r.report.loss_curve.size(), 101u);
  EXPECT_LT(r.report.final_loss(), r.report.initial_loss() / 100);

  // soft monotonicity over the sorted training keys
  auto sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  std::size_t ordered = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    ordered += r.model.map_position(sorted[i - 1]) <= r.model.map_position(sorted[i]);
  EXPECT_GE(static_cast<double>(ordered) / static_cast<double>(sorted.size() - 1), 0.95);
}

TEST(Train, DeterministicAcrossThreadCounts) {
  HierConfig cfg{{4}, 1 << 20};
  const auto keys = generate(DistributionSpec::normal().with_count(2000).with_seed(4));
  TrainOptions opt;
  opt.epochs = 5;
  opt.threads = 1;
  const auto a = train(keys, cfg, opt);
  opt.threads = 4;
  const auto b = train(keys, cfg, opt);
  EXPECT_EQ(a.report.loss_curve, b.report.loss_curve);
  EXPECT_EQ(a.model, b.model);
}

TEST(Train, BeatsBkdrOnLognormal) {
  HierConfig cfg{{16}, RingConfig::kDefaultSize};
  const auto keys = generate(DistributionSpec::lognormal().with_count(100000).with_seed(5));
  TrainOptions opt;
  opt.epochs = 10;
  const auto r = train(keys, cfg, opt);
  auto model_map = [&](double k) { return r.model.map_position(k); };
  auto bkdr_map = [&](double k) { return hash_to_ring(k, HashFn::bkdr(), cfg.ring_size); };
  const auto dlb_bins = sorted_bin_counts(keys, model_map, 64, cfg.ring_size);
  const auto bkdr_bins = sorted_bin_counts(keys, bkdr_map, 64, cfg.ring_size);
  EXPECT_LT(std_metric(dlb_bins), std_metric(bkdr_bins));
}

TEST(Train, InputErrors) {
  HierConfig cfg{{16}, 1 << 20};
  TrainOptions opt;
  EXPECT_THROW(train(std::vector<double>{1, 2, 3}, cfg, opt), TooFewKeys);
  opt.epochs = 0;
  EXPECT_THROW(train(std::vector<double>(100, 1.0), cfg, opt), ValidationError);
  opt.epochs = 1;
  EXPECT_THROW(train(std::vector<double>{1, NAN, 3}, HierConfig{{1}, 1024}, opt), UnsupportedKey);
}

TEST(TrainReport, Csv) {
  TrainReport rep;
  rep.loss_curve = {4.0, 2.5};
  std::ostringstream os;
  rep.write_csv(os);
  EXPECT_EQ(os.str(), "epoch,total_loss\n0,4.0\n1,2.5\n");
}
