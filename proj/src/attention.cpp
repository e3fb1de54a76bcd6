#include "igt/attention.hpp"

#include <cmath>
#include <limits>

#include "igt/errors.hpp"

namespace igt {

// ---------------------------------------------------------------- bias tables

BiasTables::BiasTables(const BucketMap& map, std::uint32_t n_heads, double sigma, Rng& rng) {
  map.validate();
  Mat f1 = gaussian(map.num_distance_buckets, n_heads, sigma, rng);
  // G2G starts from the farthest positive exact-distance bucket.
  f1.row(map.g2g_bucket()) = f1.row(map.bucket(map.max_exact_distance));
  distance = Param("bias.distance", ParamGroup::Encoder, std::move(f1));
  distinction = Param("bias.distinction", ParamGroup::Encoder,
                      gaussian(kDistinctionBuckets - 1, n_heads, sigma, rng));
}

double BiasTables::f2(std::uint32_t bucket, std::uint32_t head) const {
  return bucket == kDistinctionG2GBucket ? distance.value(g2g_row(), head)
                                         : distinction.value(bucket, head);
}

namespace {

void check_bucket_shapes(const BucketIndexMatrix& p, const BucketIndexMatrix& d) {
  if (p.size != d.size || p.index.size() != p.size * p.size || d.index.size() != d.size * d.size) {
    throw ContractError("bias: P buckets are " + std::to_string(p.size) + "x" +
                        std::to_string(p.size) + " but D buckets are " + std::to_string(d.size) +
                        "x" + std::to_string(d.size));
  }
}

}  // namespace

HeadBiases BiasTables::bias(const BucketIndexMatrix& p, const BucketIndexMatrix& d) const {
  check_bucket_shapes(p, d);
  const auto n = static_cast<Eigen::Index>(p.size);
  const auto rows = static_cast<std::uint32_t>(distance.value.rows());
  HeadBiases out(heads(), Mat(n, n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto pb = p(i, j);
      const auto db = d(i, j);
      if (pb >= rows || db >= kDistinctionBuckets) {
        throw ContractError("bias: bucket index out of table range");
      }
      for (std::uint32_t h = 0; h < heads(); ++h) out[h](i, j) = 0.5 * (f1(pb, h) + f2(db, h));
    }
  }
  return out;
}

void BiasTables::backward(const BucketIndexMatrix& p, const BucketIndexMatrix& d,
                          const HeadBiases& dbias) {
  check_bucket_shapes(p, d);
  const auto n = static_cast<Eigen::Index>(p.size);
  for (std::uint32_t h = 0; h < heads(); ++h) {
    const Mat& g = dbias[h];
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double half = 0.5 * g(i, j);
        distance.grad(p(i, j), h) += half;
        const auto db = d(i, j);
        if (db == kDistinctionG2GBucket) {
          distance.grad(g2g_row(), h) += half;
        } else {
          distinction.grad(db, h) += half;
        }
      }
    }
  }
}

HeadBiases causal_bias(Eigen::Index n, std::uint32_t n_heads) {
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = -std::numeric_limits<double>::infinity();
  }
  return HeadBiases(n_heads, m);
}

// ---------------------------------------------------------------- core attention

Mat attention_with_bias(const Mat& q, const Mat& k, const Mat& v, const HeadBiases& bias,
                        AttentionCache* cache, double dropout, Rng* rng) {
  const auto n = q.rows();
  const auto heads = static_cast<Eigen::Index>(bias.size());
  if (heads == 0 || k.rows() != n || v.rows() != n || k.cols() != q.cols() ||
      v.cols() != q.cols() || q.cols() % heads != 0) {
    throw ContractError("attention_with_bias: inconsistent Q/K/V shapes or head count");
  }
  for (const auto& b : bias) {
    if (b.rows() != n || b.cols() != n) {
      throw ContractError("attention_with_bias: bias is " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + " for " + std::to_string(n) + " tokens");
    }
  }
  const bool drop = dropout > 0.0 && rng != nullptr;
  const auto dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat out(n, q.cols());
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs.assign(heads, Mat());
    cache->drop_mask.clear();
    if (drop) cache->drop_mask.assign(heads, Mat());
  }
  for (Eigen::Index h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    Mat a = softmax_rows((qh * kh.transpose()) * scale + bias[h]);
    Mat used = a;
    if (drop) {
      Mat mask(n, n);
      const double keep = 1.0 / (1.0 - dropout);
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = uniform01(*rng) < dropout ? 0.0 : keep;
      }
      used = a.cwiseProduct(mask);
      if (cache) cache->drop_mask[h] = std::move(mask);
    }
    out.middleCols(h * dh, dh) = used * v.middleCols(h * dh, dh);
    if (cache) cache->probs[h] = std::move(a);
  }
  return out;
}

AttentionGrads attention_backward(const AttentionCache& c, const Mat& dout) {
  const auto n = c.q.rows();
  const auto heads = static_cast<Eigen::Index>(c.probs.size());
  const auto dh = c.q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  AttentionGrads g{Mat(n, c.q.cols()), Mat(n, c.q.cols()), Mat(n, c.q.cols()), HeadBiases(heads)};
  for (Eigen::Index h = 0; h < heads; ++h) {
    const Mat& a = c.probs[h];
    const bool drop = !c.drop_mask.empty();
    const Mat used = drop ? Mat(a.cwiseProduct(c.drop_mask[h])) : a;
    const auto dout_h = dout.middleCols(h * dh, dh);
    g.dv.middleCols(h * dh, dh) = used.transpose() * dout_h;
    Mat da = dout_h * c.v.middleCols(h * dh, dh).transpose();
    if (drop) da = da.cwiseProduct(c.drop_mask[h]);
    // Softmax Jacobian per row: dS = A * (dA - <dA, A>).
    const Eigen::VectorXd inner = (da.cwiseProduct(a)).rowwise().sum();
    Mat ds = a.cwiseProduct(da.colwise() - inner);
    g.dq.middleCols(h * dh, dh) = (ds * c.k.middleCols(h * dh, dh)) * scale;
    g.dk.middleCols(h * dh, dh) = (ds.transpose() * c.q.middleCols(h * dh, dh)) * scale;
    g.dbias[h] = std::move(ds);
  }
  return g;
}

// ---------------------------------------------------------------- multi-head

MultiHeadAttention::MultiHeadAttention(const std::string& name, ParamGroup group,
                                       Eigen::Index d_model, std::uint32_t heads, Rng& rng)
    : wq(name + ".q", group, d_model, d_model, rng),
      wk(name + ".k", group, d_model, d_model, rng),
      wv(name + ".v", group, d_model, d_model, rng),
      wo(name + ".o", group, d_model, d_model, rng),
      n_heads(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError(name + ": d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " + std::to_string(heads));
  }
}

Mat MultiHeadAttention::forward(const Mat& x, const HeadBiases& bias, Cache* cache, double dropout,
                                Rng* rng) const {
  if (bias.size() != n_heads) throw ContractError("attention: bias count != n_heads");
  AttentionCache local;
  AttentionCache* core = cache ? &cache->core : &local;
  Mat ctx = attention_with_bias(wq.forward(x), wk.forward(x), wv.forward(x), bias, core, dropout,
                                rng);
  Mat y = wo.forward(ctx);
  if (cache) {
    cache->input = x;
    cache->context = std::move(ctx);
  }
  return y;
}

Mat MultiHeadAttention::backward(const Cache& c, const Mat& dy, HeadBiases* dbias) {
  const Mat dctx = wo.backward(c.context, dy);
  AttentionGrads g = attention_backward(c.core, dctx);
  Mat dx = wq.backward(c.input, g.dq);
  dx += wk.backward(c.input, g.dk);
  dx += wv.backward(c.input, g.dv);
  if (dbias) *dbias = std::move(g.dbias);
  return dx;
}

void MultiHeadAttention::collect(ParamList& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
}

// ---------------------------------------------------------------- layer

TransformerLayer::TransformerLayer(const std::string& name, ParamGroup group, Eigen::Index d_model,
                                   std::uint32_t n_heads, Eigen::Index d_ff, Rng& rng)
    : ln_attn(name + ".ln_attn", group, d_model),
      ln_ff(name + ".ln_ff", group, d_model),
      attn(name + ".attn", group, d_model, n_heads, rng),
      ff_in(name + ".ff_in", group, d_model, d_ff, rng),
      ff_out(name + ".ff_out", group, d_ff, d_model, rng) {}

Mat TransformerLayer::forward(const Mat& x, const HeadBiases& bias, Cache* cache, double dropout,
                              Rng* rng) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  const Mat normed = ln_attn.forward(x, &c.ln_attn);
  Mat mid = x + attn.forward(normed, bias, &c.attn, dropout, rng);
  c.ff_normed = ln_ff.forward(mid, &c.ln_ff);
  c.ff_pre = ff_in.forward(c.ff_normed);
  c.ff_act = gelu(c.ff_pre);
  Mat y = mid + ff_out.forward(c.ff_act);
  c.mid = std::move(mid);
  return y;
}

Mat TransformerLayer::backward(const Cache& c, const Mat& dy, HeadBiases* dbias) {
  const Mat dact = ff_out.backward(c.ff_act, dy);
  const Mat dpre = gelu_backward(c.ff_pre, dact);
  const Mat dnormed = ff_in.backward(c.ff_normed, dpre);
  const Mat dmid = dy + ln_ff.backward(c.ln_ff, dnormed);
  const Mat dattn_in = attn.backward(c.attn, dmid, dbias);
  return dmid + ln_attn.backward(c.ln_attn, dattn_in);
}

void TransformerLayer::collect(ParamList& out) {
  ln_attn.collect(out);
  attn.collect(out);
  ln_ff.collect(out);
  ff_in.collect(out);
  ff_out.collect(out);
}

}  // namespace igt
