#pragma once

// Small dense building blocks with explicit forward caches and hand-derived
// backward passes. Rows are tokens; gradients accumulate into Param::grad.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "igt/rng.hpp"

namespace igt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::RowVectorXd;

/// Optimizer schedule group.
enum class ParamGroup { Encoder, Provider, Other };

const char* group_name(ParamGroup g);

struct Param {
  std::string name;
  ParamGroup group = ParamGroup::Other;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, ParamGroup g, Mat v)
      : name(std::move(n)), group(g), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamList = std::vector<Param*>;

/// Gaussian(0, sigma) matrix.
Mat gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng);

/// y = x W + b with W stored in_features x out_features.
struct Linear {
  Param weight;
  Param bias;

  Linear() = default;
  Linear(const std::string& name, ParamGroup group, Eigen::Index in, Eigen::Index out, Rng& rng,
         double sigma = -1.0);

  Eigen::Index in_features() const { return weight.value.rows(); }
  Eigen::Index out_features() const { return weight.value.cols(); }
  Mat forward(const Mat& x) const;
  /// Accumulates parameter grads; returns dL/dx.
  Mat backward(const Mat& x, const Mat& dy);
  void collect(ParamList& out) { out.push_back(&weight); out.push_back(&bias); }
};

struct LayerNormCache {
  Mat normalized;
  Eigen::VectorXd inv_std;
};

struct LayerNorm {
  Param gain;
  Param shift;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& name, ParamGroup group, Eigen::Index width);

  Mat forward(const Mat& x, LayerNormCache* cache) const;
  Mat backward(const LayerNormCache& cache, const Mat& dy);
  void collect(ParamList& out) { out.push_back(&gain); out.push_back(&shift); }
};

/// tanh-approximated GELU, elementwise.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& scores);
Vec softmax(const Vec& logits);

struct PoolCache {
  Mat input;
  Vec mean, stddev;
  std::vector<Eigen::Index> argmax, argmin;
  Vec aggregates;  ///< [mean | max | min | std], width 4*d_in.
};

/// Multi-aggregator pooling: mean, max, min and population standard deviation
/// over the rows of a sequence, concatenated and linearly projected.
struct PoolingOperator {
  Linear projection;

  PoolingOperator() = default;
  PoolingOperator(const std::string& name, ParamGroup group, Eigen::Index d_in, Eigen::Index d_out,
                  Rng& rng);

  Eigen::Index input_width() const { return projection.in_features() / 4; }
  Eigen::Index output_width() const { return projection.out_features(); }

  /// The four aggregates without projection. Throws ContractError on an empty sequence.
  static Vec aggregate(const Mat& seq, PoolCache* cache = nullptr);
  Vec forward(const Mat& seq, PoolCache* cache = nullptr) const;
  /// Returns dL/dseq (rows of the input sequence).
  Mat backward(const PoolCache& cache, const Vec& dy);
  void collect(ParamList& out) { projection.collect(out); }
};

}  // namespace igt
