#include <random>
#include <string>

#include <gtest/gtest.h>

#include "dlb/hier_model.hpp"

using namespace dlb;

namespace {

// Network whose output is the constant c.
Mlp constant_net(double c) {
  Mlp m = make_mlp(default_layer_dims(), 1);
  m.params.set_zero();
  m.params.biases.back()[0] = c;
  return m;
}

HierModel constant_model(HierConfig cfg, double disperse_out, double leaf_out) {
  std::vector<std::vector<Mlp>> disperse;
  for (std::size_t l = 0; l < cfg.disperse_layers(); ++l)
    disperse.emplace_back(cfg.models_in_layer(l), constant_net(disperse_out));
  std::vector<Mlp> leaves(cfg.num_leaves(), constant_net(leaf_out));
  return HierModel(cfg, KeyNorm{0, 100}, std::move(disperse), std::move(leaves));
}

}  // namespace

TEST(Vectorize, NormalizesAndClamps) {
  const KeyNorm norm{10, 30};
  EXPECT_EQ(vectorize_key(10.0, norm).values, std::vector<double>{0.0});
  EXPECT_EQ(vectorize_key(20.0, norm).values, std::vector<double>{0.5});
  EXPECT_EQ(vectorize_key(45.0, norm).values, std::vector<double>{1.0});
  EXPECT_GT((45.0 - norm.min) / (norm.max - norm.min), 1.0);
  EXPECT_EQ(vectorize_key(-5.0, norm).values, std::vector<double>{0.0});
  EXPECT_EQ(vectorize_key(std::string_view("20"), norm).values, std::vector<double>{0.5});
  EXPECT_EQ(vectorize_key(std::string_view("+20"), norm).values, std::vector<double>{0.5});
}

TEST(Vectorize, RejectsBadKeys) {
  const KeyNorm norm{0, 1};
  EXPECT_THROW(vectorize_key(std::string_view("abc"), norm), UnsupportedKey);
  EXPECT_THROW(vectorize_key(std::string_view("1.5x"), norm), UnsupportedKey);
  EXPECT_THROW(vectorize_key(std::string_view(""), norm), UnsupportedKey);
  EXPECT_THROW(vectorize_key(NAN, norm), UnsupportedKey);
  EXPECT_THROW(vectorize_key(0.5, KeyNorm{1, 1}), ValidationError);
}

TEST(Route, ChildRounding) {
  EXPECT_EQ(HierModel::child_from_output(1.7, 3), 2u);
  EXPECT_EQ(HierModel::child_from_output(-4.0, 3), 1u);
  EXPECT_EQ(HierModel::child_from_output(9.0, 3), 3u);
  EXPECT_EQ(HierModel::child_from_output(2.49, 3), 2u);
  EXPECT_EQ(HierModel::child_from_output(NAN, 3), 1u);
}

TEST(Route, SingleLeafAlwaysOne) {
  HierConfig cfg{{1}, 1024};
  const auto m = HierModel::initialized(cfg, {0, 1}, 5);
  for (double k = 0; k <= 1.0; k += 0.05) EXPECT_EQ(m.place(k).model_id, 1u);
}

TEST(Route, MultiLayerIndexing) {
  HierConfig cfg{{3, 4}, 1200};
  // layer 0 picks child 2, layer 1 child 3 -> leaf (2-1)*4 + 3 = 7
  std::vector<std::vector<Mlp>> disperse{{constant_net(2.2)}, std::vector<Mlp>(3, constant_net(3.1))};
  std::vector<Mlp> leaves(12, constant_net(5));
  HierModel m(cfg, {0, 1}, disperse, leaves);
  EXPECT_EQ(m.route(vectorize_key(0.5, m.key_norm())), 7u);
  EXPECT_EQ(m.map_position(0.5).value, 5u + 6u * 100u);
}

TEST(MapPosition, Examples) {
  HierConfig cfg{{4}, 4096};  // t = 1024
  EXPECT_EQ(constant_model(cfg, 1.0, 0.0).map_position(50.0).value, 0u);
  EXPECT_EQ(constant_model(cfg, 3.0, 100.0).map_position(50.0).value, 2148u);
  EXPECT_EQ(constant_model(cfg, 3.0, -7.0).map_position(50.0).value, 2048u);
  EXPECT_EQ(constant_model(cfg, 3.0, 5000.0).map_position(50.0).value, 3071u);
}

TEST(MapPosition, StaysInsideRoutedSubCircle) {
  HierConfig cfg{{8}, 8192};
  auto m = HierModel::initialized(cfg, {0, 1000}, 3);
  // spread the root output so keys reach several leaves
  m.mutable_disperse_models()[0][0].params.biases.back()[0] = 4.5;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 1100);
  const auto t = cfg.sub_circle_width();
  for (int i = 0; i < 10000; ++i) {
    const double k = u(rng);
    const auto p = m.place(k);
    ASSERT_EQ(p.model_id, m.route(vectorize_key(k, m.key_norm())));
    ASSERT_GE(p.position.value, (p.model_id - 1) * t);
    ASSERT_LT(p.position.value, p.model_id * t);
  }
}

TEST(HierConfig, Validation) {
  EXPECT_NO_THROW((HierConfig{{16}, RingConfig::kDefaultSize}.validate()));
  EXPECT_THROW((HierConfig{{3}, 1024}.validate()), ValidationError);
  EXPECT_THROW((HierConfig{{}, 1024}.validate()), ValidationError);
  EXPECT_THROW((HierConfig{{0}, 1024}.validate()), ValidationError);
  EXPECT_EQ((HierConfig{{4, 2}, 1024}.sub_circle_width()), 128u);
}

TEST(Serialize, RoundTripPreservesMapping) {
  HierConfig cfg{{4, 2}, 1 << 20};
  const auto m = HierModel::initialized(cfg, {-50, 50}, 8);
  const auto back = deserialize_from_string(serialize_to_string(m));
  EXPECT_EQ(back, m);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-60, 60);
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng);
    ASSERT_EQ(back.map_position(k), m.map_position(k));
  }
}

TEST(Serialize, Errors) {
  const auto m = HierModel::initialized(HierConfig{{4}, 1024}, {0, 1}, 1);
  const auto text = serialize_to_string(m);
  EXPECT_THROW(deserialize_from_string(text.substr(0, text.size() / 2)), ParseError);

  auto bad_fan = serialize(m);
  bad_fan["fanouts"] = {3};
  EXPECT_THROW(deserialize(bad_fan), ValidationError);

  auto bad_version = serialize(m);
  bad_version["version"] = 2;
  EXPECT_THROW(deserialize(bad_version), UnsupportedVersion);

  auto missing = serialize(m);
  missing.erase("leaves");
  EXPECT_THROW(deserialize(missing), ParseError);
}
