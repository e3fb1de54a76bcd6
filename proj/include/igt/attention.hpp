#pragma once

// Multi-head attention with an additive per-head bias, the bucket-indexed bias
// tables that produce it from P and D, and a pre-norm transformer layer.

#include <cstdint>
#include <string>
#include <vector>

#include "igt/nn.hpp"
#include "igt/positions.hpp"

namespace igt {

/// One n x n bias matrix per head.
using HeadBiases = std::vector<Mat>;

/// f1 (distance buckets x heads) and f2 (distinction codes x heads). The last
/// row of f1 is the G2G parameter; f2 has no G2G row of its own and reads the
/// same f1 row, so a G2G pair sees that parameter from both tables.
struct BiasTables {
  Param distance;
  Param distinction;

  BiasTables() = default;
  BiasTables(const BucketMap& map, std::uint32_t n_heads, double sigma, Rng& rng);

  std::uint32_t heads() const { return static_cast<std::uint32_t>(distance.value.cols()); }
  std::uint32_t g2g_row() const { return static_cast<std::uint32_t>(distance.value.rows() - 1); }
  double f1(std::uint32_t bucket, std::uint32_t head) const { return distance.value(bucket, head); }
  double f2(std::uint32_t bucket, std::uint32_t head) const;

  /// B_PD per head: (f1[P] + f2[D]) / 2.
  HeadBiases bias(const BucketIndexMatrix& p, const BucketIndexMatrix& d) const;
  /// Scatters dL/dB back into both tables.
  void backward(const BucketIndexMatrix& p, const BucketIndexMatrix& d, const HeadBiases& dbias);
  void collect(ParamList& out) { out.push_back(&distance); out.push_back(&distinction); }
};

/// Row i may attend to columns <= i only (-inf elsewhere), identical for every head.
HeadBiases causal_bias(Eigen::Index n, std::uint32_t n_heads);

struct AttentionCache {
  Mat q, k, v;
  std::vector<Mat> probs;      ///< Softmax output per head, before dropout.
  std::vector<Mat> drop_mask;  ///< Inverted-dropout multipliers; empty when off.
};

/// softmax(Q_h K_h^T / sqrt(d_head) + B_h) V_h per head, heads concatenated
/// column-wise. Q, K, V are n x d with d divisible by the bias count.
Mat attention_with_bias(const Mat& q, const Mat& k, const Mat& v, const HeadBiases& bias,
                        AttentionCache* cache = nullptr, double dropout = 0.0,
                        Rng* rng = nullptr);

struct AttentionGrads {
  Mat dq, dk, dv;
  HeadBiases dbias;
};

AttentionGrads attention_backward(const AttentionCache& cache, const Mat& dout);

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  std::uint32_t n_heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, ParamGroup group, Eigen::Index d_model,
                     std::uint32_t n_heads, Rng& rng);

  struct Cache {
    Mat input;
    AttentionCache core;
    Mat context;
  };

  Mat forward(const Mat& x, const HeadBiases& bias, Cache* cache, double dropout = 0.0,
              Rng* rng = nullptr) const;
  /// Returns dL/dx; dL/dB per head goes to *dbias.
  Mat backward(const Cache& cache, const Mat& dy, HeadBiases* dbias);
  void collect(ParamList& out);
};

/// x + Attn(LN(x)), then + FFN(LN(.)) with a GELU hidden layer.
struct TransformerLayer {
  LayerNorm ln_attn, ln_ff;
  MultiHeadAttention attn;
  Linear ff_in, ff_out;

  TransformerLayer() = default;
  TransformerLayer(const std::string& name, ParamGroup group, Eigen::Index d_model,
                   std::uint32_t n_heads, Eigen::Index d_ff, Rng& rng);

  struct Cache {
    LayerNormCache ln_attn, ln_ff;
    MultiHeadAttention::Cache attn;
    Mat mid;        ///< Residual stream after attention.
    Mat ff_normed;  ///< LN output fed to ff_in.
    Mat ff_pre;     ///< ff_in output before GELU.
    Mat ff_act;
  };

  Mat forward(const Mat& x, const HeadBiases& bias, Cache* cache, double dropout = 0.0,
              Rng* rng = nullptr) const;
  Mat backward(const Cache& cache, const Mat& dy, HeadBiases* dbias);
  void collect(ParamList& out);
};

}  // namespace igt
