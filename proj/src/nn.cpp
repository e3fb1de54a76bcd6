#include "igt/nn.hpp"

#include <cmath>
#include <limits>

#include "igt/errors.hpp"

namespace igt {

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Encoder: return "encoder";
    case ParamGroup::Provider: return "provider";
    case ParamGroup::Other: return "other";
  }
  return "?";
}

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sigma * normal01(rng);
  }
  return m;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, ParamGroup group, Eigen::Index in, Eigen::Index out,
               Rng& rng, double sigma) {
  if (sigma < 0) sigma = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
  weight = Param(name + ".weight", group, gaussian(in, out, sigma, rng));
  bias = Param(name + ".bias", group, Mat::Zero(1, out));
}

Mat Linear::forward(const Mat& x) const {
  if (x.cols() != weight.value.rows()) {
    throw ContractError(weight.name + ": input width " + std::to_string(x.cols()) +
                        " != " + std::to_string(weight.value.rows()));
  }
  Mat y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value.transpose();
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(const std::string& name, ParamGroup group, Eigen::Index width)
    : gain(name + ".gain", group, Mat::Ones(1, width)),
      shift(name + ".shift", group, Mat::Zero(1, width)) {}

Mat LayerNorm::forward(const Mat& x, LayerNormCache* cache) const {
  const auto d = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / d;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  Mat y = xhat.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += shift.value.row(0);
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat LayerNorm::backward(const LayerNormCache& c, const Mat& dy) {
  gain.grad.row(0) += (dy.array() * c.normalized.array()).colwise().sum().matrix();
  shift.grad.row(0) += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.value.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = (dxhat.row(i).array() * c.normalized.row(i).array()).sum() / d;
    dx.row(i) = c.inv_std(i) *
                (dxhat.row(i).array() - m1 - c.normalized.row(i).array() * m2).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------- activations

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  Mat dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const double u = kGeluC * (v + kGeluA * v * v * v);
    const double th = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    dx.data()[i] = dy.data()[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
  }
  return dx;
}

Mat softmax_rows(const Mat& scores) {
  Mat p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) p.row(i) = softmax(scores.row(i));
  return p;
}

Vec softmax(const Vec& logits) {
  const double mx = logits.maxCoeff();
  Vec e = (logits.array() - mx).exp().matrix();
  // Vectorized exp clamps -inf to a subnormal result; masked entries must be exact zeros.
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (logits(i) == -std::numeric_limits<double>::infinity()) e(i) = 0.0;
  }
  return e / e.sum();
}

// ---------------------------------------------------------------- pooling

PoolingOperator::PoolingOperator(const std::string& name, ParamGroup group, Eigen::Index d_in,
                                 Eigen::Index d_out, Rng& rng)
    : projection(name, group, 4 * d_in, d_out, rng) {}

Vec PoolingOperator::aggregate(const Mat& seq, PoolCache* cache) {
  if (seq.rows() == 0) throw ContractError("pooling over an empty sequence");
  const auto n = static_cast<double>(seq.rows());
  const auto d = seq.cols();
  Vec mean = seq.colwise().mean();
  Vec mx(d), mn(d), sd(d);
  std::vector<Eigen::Index> amax(d), amin(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    mx(j) = seq.col(j).maxCoeff(&amax[j]);
    mn(j) = seq.col(j).minCoeff(&amin[j]);
    sd(j) = std::sqrt((seq.col(j).array() - mean(j)).square().sum() / n);
  }
  Vec agg(4 * d);
  agg << mean, mx, mn, sd;
  if (cache) {
    cache->input = seq;
    cache->mean = mean;
    cache->stddev = sd;
    cache->argmax = std::move(amax);
    cache->argmin = std::move(amin);
    cache->aggregates = agg;
  }
  return agg;
}

Vec PoolingOperator::forward(const Mat& seq, PoolCache* cache) const {
  if (seq.cols() != input_width()) {
    throw ContractError(projection.weight.name + ": sequence width " + std::to_string(seq.cols()) +
                        " != " + std::to_string(input_width()));
  }
  PoolCache local;
  auto* c = cache ? cache : &local;
  const Vec agg = aggregate(seq, c);
  return projection.forward(agg);
}

Mat PoolingOperator::backward(const PoolCache& c, const Vec& dy) {
  const Vec dagg = projection.backward(c.aggregates, dy);
  const auto n = c.input.rows();
  const auto d = c.input.cols();
  Mat dx = Mat::Zero(n, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double dmean = dagg(j);
    const double dmax = dagg(d + j);
    const double dmin = dagg(2 * d + j);
    const double dstd = dagg(3 * d + j);
    dx.col(j).array() += dmean * inv_n;
    dx(c.argmax[j], j) += dmax;
    dx(c.argmin[j], j) += dmin;
    // d std / d x_i = (x_i - mean) / (n * std); zero spread has zero gradient.
    if (c.stddev(j) > 0.0) {
      dx.col(j).array() += dstd * (c.input.col(j).array() - c.mean(j)) * (inv_n / c.stddev(j));
    }
  }
  return dx;
}

}  // namespace igt
