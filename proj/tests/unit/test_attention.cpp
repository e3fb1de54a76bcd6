#include <doctest.h>

#include <cmath>

#include "igt/attention.hpp"
#include "igt/errors.hpp"
#include "oracles.hpp"

using namespace igt;

namespace {

/// softmax(Q_h K_h^T / sqrt(d_h)) V_h per head with explicit loops.
Mat plain_attention(const Mat& q, const Mat& k, const Mat& v, int heads) {
  const auto n = q.rows();
  const auto dh = q.cols() / heads;
  Mat out = Mat::Zero(n, q.cols());
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Vec s(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        double dot = 0;
        for (Eigen::Index c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        s(j) = dot / std::sqrt(static_cast<double>(dh));
      }
      const auto ls = oracle::log_softmax(s);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = std::exp(ls[static_cast<std::size_t>(j)]);
        for (Eigen::Index c = 0; c < dh; ++c) out(i, h * dh + c) += w * v(j, h * dh + c);
      }
    }
  }
  return out;
}

Subgraph fixture_subgraph() {
  std::vector<SampledTriple> s = {
      {Triple{EntityId{0}, RelationId{0, false}, EntityId{1}}, TripleSet::HeadRelation, 1},
      {Triple{EntityId{0}, RelationId{1, false}, EntityId{2}}, TripleSet::Head, 1},
      {Triple{EntityId{2}, RelationId{1, true}, EntityId{3}}, TripleSet::Head, 2},
  };
  return make_subgraph(EntityId{0}, RelationId{0, false}, s);
}

}  // namespace

TEST_CASE("zero bias tables reduce to plain attention") {
  Rng rng(8);
  const auto sg = fixture_subgraph();
  const auto n = static_cast<Eigen::Index>(sg.size());
  BucketMap map;
  BiasTables tables(map, 4, 0.5, rng);
  tables.distance.value.setZero();
  tables.distinction.value.setZero();
  const auto p = build_distance_matrix(sg);
  const auto bias = tables.bias(bucketize(p, map), bucketize(build_distinction_matrix(sg, p)));
  for (const auto& b : bias) CHECK(b.isZero());

  const Mat q = gaussian(n, 16, 1.0, rng), k = gaussian(n, 16, 1.0, rng),
            v = gaussian(n, 16, 1.0, rng);
  const Mat got = attention_with_bias(q, k, v, bias);
  CHECK((got - plain_attention(q, k, v, 4)).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("bias entries average the two tables") {
  Rng rng(2);
  const auto sg = fixture_subgraph();
  BucketMap map;
  BiasTables tables(map, 2, 1.0, rng);
  const auto p = build_distance_matrix(sg);
  const auto d = build_distinction_matrix(sg, p);
  const auto pb = bucketize(p, map), db = bucketize(d);
  const auto bias = tables.bias(pb, db);
  bool saw_g2g = false;
  for (std::size_t i = 0; i < sg.size(); ++i) {
    for (std::size_t j = 0; j < sg.size(); ++j) {
      for (std::uint32_t h = 0; h < 2; ++h) {
        double expected;
        if (p.is_g2g(i, j)) {
          saw_g2g = true;
          expected = tables.distance.value(31, h);
        } else {
          expected = 0.5 * (tables.distance.value(p(i, j) + 15, h) +
                            tables.distinction.value(d(i, j), h));
        }
        CHECK(bias[h](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
              doctest::Approx(expected));
      }
    }
  }
  CHECK(saw_g2g);
  CHECK(tables.distance.value.rows() == 32);
  CHECK(tables.distinction.value.rows() == 4);
}

TEST_CASE("bias rejects mismatched bucket matrices") {
  Rng rng(2);
  BiasTables tables(BucketMap{}, 2, 1.0, rng);
  BucketIndexMatrix a{2, std::vector<std::uint32_t>(4, 0), 0};
  BucketIndexMatrix b{3, std::vector<std::uint32_t>(9, 0), 0};
  CHECK_THROWS_AS(tables.bias(a, b), ContractError);
}

TEST_CASE("causal bias hides later tokens") {
  Rng rng(1);
  const Mat q = gaussian(4, 8, 1.0, rng), k = gaussian(4, 8, 1.0, rng);
  Mat v = gaussian(4, 8, 1.0, rng);
  const Mat a = attention_with_bias(q, k, v, causal_bias(4, 2));
  v.row(3).setConstant(100.0);
  const Mat b = attention_with_bias(q, k, v, causal_bias(4, 2));
  CHECK((a.topRows(3) - b.topRows(3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.row(0) - v.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dropout only acts with a generator") {
  Rng rng(1);
  const Mat q = gaussian(5, 8, 1.0, rng), k = gaussian(5, 8, 1.0, rng),
            v = gaussian(5, 8, 1.0, rng);
  const auto bias = HeadBiases(2, Mat::Zero(5, 5));
  const Mat base = attention_with_bias(q, k, v, bias);
  CHECK((attention_with_bias(q, k, v, bias, nullptr, 0.5) - base).isZero());
  Rng drop(3);
  CHECK_FALSE((attention_with_bias(q, k, v, bias, nullptr, 0.5, &drop) - base).isZero());
}

TEST_CASE("attention shape contract") {
  Rng rng(1);
  const Mat q = gaussian(3, 6, 1.0, rng);
  CHECK_THROWS_AS(attention_with_bias(q, q, q, HeadBiases(4, Mat::Zero(3, 3))), ContractError);
  CHECK_THROWS_AS(attention_with_bias(q, q, q, HeadBiases(2, Mat::Zero(2, 2))), ContractError);
}
