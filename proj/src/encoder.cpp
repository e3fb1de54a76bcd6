#include "igt/encoder.hpp"

#include <fstream>
#include <sstream>

#include "igt/errors.hpp"

namespace igt {

void EncoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_ff == 0) {
    throw ConfigError("encoder: d_model, n_heads and d_ff must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("encoder: d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
  buckets.validate();
}

SubgraphPositions prepare_positions(const Subgraph& sg, const EncoderConfig& config) {
  SubgraphPositions out;
  out.distance = build_distance_matrix(sg);
  out.distinction = build_distinction_matrix(sg, out.distance, config.distinction);
  out.distance_buckets = bucketize(out.distance, config.buckets);
  out.distinction_buckets = bucketize(out.distinction);
  return out;
}

EncoderState::EncoderState(const EncoderConfig& cfg, std::size_t entities,
                           std::size_t relation_slots, Rng& rng)
    : config(cfg) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto n_ent = static_cast<Eigen::Index>(entities);
  const auto n_rel = static_cast<Eigen::Index>(relation_slots);
  entity_embedding = Param("embed.entity", ParamGroup::Encoder,
                           gaussian(n_ent, d, config.init_sigma, rng));
  relation_embedding = Param("embed.relation", ParamGroup::Encoder,
                             gaussian(n_rel, d, config.init_sigma, rng));
  mask_embedding = Param("embed.mask", ParamGroup::Encoder, gaussian(1, d, config.init_sigma, rng));
  bias = BiasTables(config.buckets, config.n_heads, config.init_sigma, rng);
  layers.reserve(config.n_layers);
  for (std::uint32_t l = 0; l < config.n_layers; ++l) {
    layers.emplace_back("encoder.layer" + std::to_string(l), ParamGroup::Encoder, d,
                        config.n_heads, config.d_ff, rng);
  }
}

void EncoderState::collect(ParamList& out) {
  out.push_back(&entity_embedding);
  out.push_back(&relation_embedding);
  out.push_back(&mask_embedding);
  bias.collect(out);
  for (auto& layer : layers) layer.collect(out);
}

Mat embed_subgraph(const Subgraph& sg, const EncoderState& state) {
  const auto d = state.entity_embedding.value.cols();
  Mat x(static_cast<Eigen::Index>(sg.size()), d);
  for (std::size_t i = 0; i < sg.size(); ++i) {
    const Token& t = sg.tokens[i];
    const auto row = static_cast<Eigen::Index>(i);
    switch (t.kind) {
      case TokenKind::Entity:
        if (t.id >= state.entity_embedding.value.rows()) {
          throw LookupError("embed_subgraph: entity " + std::to_string(t.id) + " has no row");
        }
        x.row(row) = state.entity_embedding.value.row(t.id);
        break;
      case TokenKind::Relation:
        if (t.id >= state.relation_embedding.value.rows()) {
          throw LookupError("embed_subgraph: relation slot " + std::to_string(t.id) +
                            " has no row");
        }
        x.row(row) = state.relation_embedding.value.row(t.id);
        break;
      case TokenKind::Mask:
        x.row(row) = state.mask_embedding.value.row(0);
        break;
    }
  }
  return x;
}

Mat encode(const Subgraph& sg, const SubgraphPositions& pos, const EncoderState& state,
           EncodeCache* cache, Rng* dropout_rng) {
  if (pos.distance_buckets.size != sg.size()) {
    throw ContractError("encode: positions built for " + std::to_string(pos.distance_buckets.size) +
                        " tokens, layout has " + std::to_string(sg.size()));
  }
  Mat x = embed_subgraph(sg, state);
  if (state.layers.empty()) return x;
  const HeadBiases bias = state.bias.bias(pos.distance_buckets, pos.distinction_buckets);
  if (cache) cache->layers.assign(state.layers.size(), {});
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    x = state.layers[l].forward(x, bias, cache ? &cache->layers[l] : nullptr,
                                state.config.dropout, dropout_rng);
  }
  return x;
}

void encode_backward(const Subgraph& sg, const SubgraphPositions& pos, const EncodeCache& cache,
                     const Mat& d_states, EncoderState& state) {
  Mat dx = d_states;
  if (!state.layers.empty()) {
    HeadBiases dbias_total(state.config.n_heads,
                           Mat::Zero(d_states.rows(), d_states.rows()));
    for (std::size_t l = state.layers.size(); l-- > 0;) {
      HeadBiases dbias;
      dx = state.layers[l].backward(cache.layers[l], dx, &dbias);
      for (std::size_t h = 0; h < dbias.size(); ++h) dbias_total[h] += dbias[h];
    }
    state.bias.backward(pos.distance_buckets, pos.distinction_buckets, dbias_total);
  }
  for (std::size_t i = 0; i < sg.size(); ++i) {
    const Token& t = sg.tokens[i];
    const auto row = dx.row(static_cast<Eigen::Index>(i));
    switch (t.kind) {
      case TokenKind::Entity: state.entity_embedding.grad.row(t.id) += row; break;
      case TokenKind::Relation: state.relation_embedding.grad.row(t.id) += row; break;
      case TokenKind::Mask: state.mask_embedding.grad.row(0) += row; break;
    }
  }
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors: " + path.string());
  WordVectors out;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof()) throw ParseError(path.string(), lineno, "non-numeric vector component");
    if (values.empty()) throw ParseError(path.string(), lineno, "word without a vector");
    if (width < 0) width = static_cast<Eigen::Index>(values.size());
    if (static_cast<Eigen::Index>(values.size()) != width) {
      throw ParseError(path.string(), lineno,
                       "vector width " + std::to_string(values.size()) + " != " +
                           std::to_string(width));
    }
    out[word] = Eigen::Map<const Vec>(values.data(), width);
  }
  return out;
}

namespace {

bool pooled_row(const std::vector<std::uint32_t>& tokens, const TextCatalog& catalog,
                const WordVectors& vectors, const PoolingOperator& pooler, Vec* out) {
  std::vector<const Vec*> found;
  for (auto id : tokens) {
    auto it = vectors.find(catalog.words().name(id));
    if (it != vectors.end()) found.push_back(&it->second);
  }
  if (found.empty()) return false;
  Mat seq(static_cast<Eigen::Index>(found.size()), found.front()->size());
  for (std::size_t i = 0; i < found.size(); ++i) seq.row(static_cast<Eigen::Index>(i)) = *found[i];
  *out = pooler.forward(seq);
  return true;
}

}  // namespace

std::size_t initialize_from_text(EncoderState& state, const TextCatalog& catalog,
                                 const WordVectors& vectors, const PoolingOperator& pooler) {
  if (pooler.output_width() != state.config.d_model) {
    throw ContractError("initialize_from_text: pooler width != d_model");
  }
  std::size_t set = 0;
  Vec row;
  const auto n_ent = std::min<std::size_t>(catalog.entity_count(),
                                           state.entity_embedding.value.rows());
  for (std::uint32_t e = 0; e < n_ent; ++e) {
    if (pooled_row(catalog.entity_tokens(EntityId{e}), catalog, vectors, pooler, &row)) {
      state.entity_embedding.value.row(e) = row;
      ++set;
    }
  }
  const auto n_rel = std::min<std::size_t>(catalog.relation_slots(),
                                           state.relation_embedding.value.rows());
  for (std::uint32_t r = 0; r < n_rel; ++r) {
    if (pooled_row(catalog.relation_tokens(RelationId::from_flat(r)), catalog, vectors, pooler,
                   &row)) {
      state.relation_embedding.value.row(r) = row;
      ++set;
    }
  }
  return set;
}

}  // namespace igt
