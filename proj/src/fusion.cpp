#include "igt/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "igt/binio.hpp"
#include "igt/errors.hpp"

namespace igt {

RelationScope parse_scope(std::string_view s) {
  if (s == "r") return RelationScope::Target;
  if (s == "mr_l") return RelationScope::Local;
  if (s == "mr_g") return RelationScope::Global;
  throw ConfigError("unknown relation scope \"" + std::string(s) + "\" (expected r, mr_l, mr_g)");
}

const char* scope_name(RelationScope s) {
  switch (s) {
    case RelationScope::Target: return "r";
    case RelationScope::Local: return "mr_l";
    case RelationScope::Global: return "mr_g";
  }
  return "?";
}

std::vector<std::size_t> relation_context_positions(const Subgraph& sg, RelationScope scope) {
  if (scope == RelationScope::Target) return {sg.relation_position()};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sg.triples.size(); ++i) {
    const auto& st = sg.triples[i];
    if (st.triple.relation != sg.relation) continue;
    if (st.set == TripleSet::Relation && scope != RelationScope::Global) continue;
    out.push_back(sg.positions[i].relation);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vec pool_relation_context(const Mat& states, const Subgraph& sg, RelationScope scope,
                          const PoolingOperator& pooler, PoolCache* cache) {
  if (scope == RelationScope::Target) {
    return states.row(static_cast<Eigen::Index>(sg.relation_position()));
  }
  const auto pos = relation_context_positions(sg, scope);
  Mat seq(static_cast<Eigen::Index>(pos.size()), states.cols());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    seq.row(static_cast<Eigen::Index>(i)) = states.row(static_cast<Eigen::Index>(pos[i]));
  }
  return pooler.forward(seq, cache);
}

Vec fuse(const Vec& llm, const Vec& adapted, double lambda) {
  if (llm.size() != adapted.size()) {
    throw ContractError("fuse: provider width " + std::to_string(llm.size()) +
                        " != adapter width " + std::to_string(adapted.size()));
  }
  if (lambda == 0.0) return llm;
  if (lambda == 1.0) return adapted;
  return (1.0 - lambda) * llm + lambda * adapted;
}

Vec concat_classifier_input(const Vec& t_hr_llm, const Vec& pooled_triple) {
  Vec x(t_hr_llm.size() + pooled_triple.size());
  x << t_hr_llm, pooled_triple;
  return x;
}

// ---------------------------------------------------------------- provider defaults

void PromptEmbeddingProvider::backward_last(ProviderTape*, const Vec&, Vec* d_fused_h,
                                            Vec* d_fused_r) {
  if (d_fused_h) *d_fused_h = Vec::Zero(static_cast<Eigen::Index>(width()));
  if (d_fused_r) *d_fused_r = Vec::Zero(static_cast<Eigen::Index>(width()));
}

void PromptEmbeddingProvider::backward_base(ProviderTape*, const Vec&, const Vec&) {}

void PromptEmbeddingProvider::collect(ParamList&) {}

// ---------------------------------------------------------------- stub provider

void StubProviderConfig::validate() const {
  if (d_llm == 0 || n_heads == 0 || d_ff == 0 || d_llm % n_heads != 0) {
    throw ConfigError("stub provider: d_llm must be positive and divisible by n_heads");
  }
  if (max_description_words == 0) throw ConfigError("stub provider: max_description_words >= 1");
}

std::vector<std::string> prompt_template() {
  return {"task:", "fill", "in", "the", "missing", "tail", "of", "a", "graph", "fact.",
          "head", "[H]", "means", "{h}", "relation", "[R]", "means", "{r}",
          "fact:", "[H]", "[R]", "?", "tail:", "[H]", "[R]"};
}

struct StubPromptProvider::Tape : ProviderTape {
  std::vector<std::uint32_t> entity_words, relation_words;
  PoolCache entity_pool, relation_pool;
  std::vector<std::uint32_t> ids;
  std::vector<TransformerLayer::Cache> layers;
  LayerNormCache final_norm;
};

StubPromptProvider::StubPromptProvider(const TextCatalog& catalog, const StubProviderConfig& config,
                                       Rng& rng)
    : config_(config) {
  config_.validate();
  for (const auto& w : prompt_template()) {
    if (w != "{h}" && w != "{r}") vocab_.add(w);
  }
  h_slot_ = vocab_.at("[H]");
  r_slot_ = vocab_.at("[R]");
  for (const auto& w : catalog.words().names()) vocab_.add(w);
  vocab_.freeze();

  std::size_t longest_e = 1, longest_r = 1;
  entity_words_.resize(catalog.entity_count());
  for (std::uint32_t e = 0; e < catalog.entity_count(); ++e) {
    entity_words_[e] = description(catalog, catalog.entity_tokens(EntityId{e}));
    longest_e = std::max(longest_e, entity_words_[e].size());
  }
  relation_words_.resize(catalog.relation_slots());
  for (std::uint32_t r = 0; r < catalog.relation_slots(); ++r) {
    relation_words_[r] = description(catalog, catalog.relation_tokens(RelationId::from_flat(r)));
    longest_r = std::max(longest_r, relation_words_[r].size());
  }
  const auto max_len = static_cast<Eigen::Index>(prompt_template().size() - 2 + longest_e +
                                                 longest_r);
  const auto d = static_cast<Eigen::Index>(config_.d_llm);
  word_embedding_ = Param("provider.embed.word", ParamGroup::Provider,
                          gaussian(static_cast<Eigen::Index>(vocab_.size()), d,
                                   config_.init_sigma, rng));
  position_embedding_ = Param("provider.embed.position", ParamGroup::Provider,
                              gaussian(max_len, d, config_.init_sigma, rng));
  pooler_ = PoolingOperator("provider.pool", ParamGroup::Provider, d, d, rng);
  for (std::uint32_t l = 0; l < config_.n_layers; ++l) {
    layers_.emplace_back("provider.layer" + std::to_string(l), ParamGroup::Provider, d,
                         config_.n_heads, config_.d_ff, rng);
  }
  final_norm_ = LayerNorm("provider.final_norm", ParamGroup::Provider, d);
}

std::vector<std::uint32_t> StubPromptProvider::description(
    const TextCatalog& catalog, const std::vector<std::uint32_t>& catalog_tokens) const {
  const auto n = std::min<std::size_t>(catalog_tokens.size(), config_.max_description_words);
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab_.at(catalog.words().name(catalog_tokens[i])));
  return out;
}

std::vector<std::uint32_t> StubPromptProvider::prompt_ids(EntityId h, RelationId r) const {
  if (h.index >= entity_words_.size() || r.flat() >= relation_words_.size()) {
    throw LookupError("stub provider: (h, r) outside the catalog");
  }
  std::vector<std::uint32_t> ids;
  for (const auto& w : prompt_template()) {
    if (w == "{h}") {
      ids.insert(ids.end(), entity_words_[h.index].begin(), entity_words_[h.index].end());
    } else if (w == "{r}") {
      ids.insert(ids.end(), relation_words_[r.flat()].begin(), relation_words_[r.flat()].end());
    } else {
      ids.push_back(vocab_.at(w));
    }
  }
  return ids;
}

std::unique_ptr<ProviderTape> StubPromptProvider::new_tape() const {
  return std::make_unique<Tape>();
}

namespace {

Mat gather_rows(const Mat& table, const std::vector<std::uint32_t>& ids) {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return out;
}

}  // namespace

PromptEmbeddingProvider::Base StubPromptProvider::base(EntityId h, RelationId r,
                                                       ProviderTape* tape) const {
  if (h.index >= entity_words_.size() || r.flat() >= relation_words_.size()) {
    throw LookupError("stub provider: (h, r) outside the catalog");
  }
  auto* t = dynamic_cast<Tape*>(tape);
  const auto& ew = entity_words_[h.index];
  const auto& rw = relation_words_[r.flat()];
  Base out;
  out.entity = pooler_.forward(gather_rows(word_embedding_.value, ew), t ? &t->entity_pool : nullptr);
  out.relation =
      pooler_.forward(gather_rows(word_embedding_.value, rw), t ? &t->relation_pool : nullptr);
  if (t) {
    t->entity_words = ew;
    t->relation_words = rw;
  }
  return out;
}

Vec StubPromptProvider::last_hidden(EntityId h, RelationId r, const Vec& fused_h,
                                    const Vec& fused_r, ProviderTape* tape) const {
  const auto d = static_cast<Eigen::Index>(config_.d_llm);
  if (fused_h.size() != d || fused_r.size() != d) {
    throw ContractError("stub provider: fused inputs must have width d_llm");
  }
  auto* t = dynamic_cast<Tape*>(tape);
  const auto ids = prompt_ids(h, r);
  const auto n = static_cast<Eigen::Index>(ids.size());
  Mat x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = ids[static_cast<std::size_t>(i)];
    if (id == h_slot_) {
      x.row(i) = fused_h;
    } else if (id == r_slot_) {
      x.row(i) = fused_r;
    } else {
      x.row(i) = word_embedding_.value.row(id);
    }
    x.row(i) += position_embedding_.value.row(i);
  }
  const HeadBiases mask = causal_bias(n, config_.n_heads);
  if (t) t->layers.assign(layers_.size(), {});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layers_[l].forward(x, mask, t ? &t->layers[l] : nullptr);
  }
  const Mat y = final_norm_.forward(x.bottomRows(1), t ? &t->final_norm : nullptr);
  if (t) t->ids = ids;
  return y.row(0);
}

void StubPromptProvider::backward_last(ProviderTape* tape, const Vec& d_out, Vec* d_fused_h,
                                       Vec* d_fused_r) {
  auto* t = dynamic_cast<Tape*>(tape);
  if (!t || t->ids.empty()) throw ContractError("stub provider: backward without a forward tape");
  const auto n = static_cast<Eigen::Index>(t->ids.size());
  const auto d = static_cast<Eigen::Index>(config_.d_llm);
  Mat dx = Mat::Zero(n, d);
  dx.bottomRows(1) = final_norm_.backward(t->final_norm, d_out);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    HeadBiases unused;
    dx = layers_[l].backward(t->layers[l], dx, &unused);
  }
  Vec dh = Vec::Zero(d), dr = Vec::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    position_embedding_.grad.row(i) += dx.row(i);
    const auto id = t->ids[static_cast<std::size_t>(i)];
    if (id == h_slot_) {
      dh += dx.row(i);
    } else if (id == r_slot_) {
      dr += dx.row(i);
    } else {
      word_embedding_.grad.row(id) += dx.row(i);
    }
  }
  if (d_fused_h) *d_fused_h = std::move(dh);
  if (d_fused_r) *d_fused_r = std::move(dr);
}

void StubPromptProvider::backward_base(ProviderTape* tape, const Vec& d_entity,
                                       const Vec& d_relation) {
  auto* t = dynamic_cast<Tape*>(tape);
  if (!t || t->entity_words.empty()) {
    throw ContractError("stub provider: backward without a forward tape");
  }
  auto scatter = [&](const PoolCache& c, const std::vector<std::uint32_t>& ids, const Vec& dy) {
    const Mat drows = pooler_.backward(c, dy);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      word_embedding_.grad.row(ids[i]) += drows.row(static_cast<Eigen::Index>(i));
    }
  };
  scatter(t->entity_pool, t->entity_words, d_entity);
  scatter(t->relation_pool, t->relation_words, d_relation);
}

void StubPromptProvider::collect(ParamList& out) {
  out.push_back(&word_embedding_);
  out.push_back(&position_embedding_);
  pooler_.collect(out);
  for (auto& l : layers_) l.collect(out);
  final_norm_.collect(out);
}

// ---------------------------------------------------------------- IGTEMB1

namespace {

constexpr std::size_t kRecordHeader = 1 + 8 + 8;

}  // namespace

EmbeddingCache read_embedding_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding cache: " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  binio::expect_magic(in, kEmbeddingMagic);
  EmbeddingCache cache;
  cache.flags = binio::read_pod<std::uint8_t>(in);
  cache.width = binio::read_u64(in);
  const auto count = binio::read_u64(in);
  const std::uint64_t header = kEmbeddingMagic.size() + 1 + 8 + 8;
  if (cache.width == 0 || cache.width > (1U << 20)) {
    throw FormatError("embedding cache: implausible width " + std::to_string(cache.width));
  }
  const std::uint64_t record = kRecordHeader + 4 * cache.width;
  if (count > (file_size - header) / record || header + count * record != file_size) {
    throw FormatError("embedding cache: " + std::to_string(count) + " records of width " +
                      std::to_string(cache.width) + " do not match the file size " +
                      std::to_string(file_size));
  }
  std::vector<float> buf(cache.width);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto kind = binio::read_pod<std::uint8_t>(in);
    const auto id1 = binio::read_u64(in);
    const auto id2 = binio::read_u64(in);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4 * cache.width));
    if (!in) throw FormatError("embedding cache: truncated record " + std::to_string(i));
    Vec v(static_cast<Eigen::Index>(cache.width));
    for (std::size_t j = 0; j < buf.size(); ++j) {
      if (!std::isfinite(buf[j])) {
        throw FormatError("embedding cache: non-finite value in record " + std::to_string(i));
      }
      v(static_cast<Eigen::Index>(j)) = buf[j];
    }
    bool inserted = false;
    switch (static_cast<EmbeddingRecordKind>(kind)) {
      case EmbeddingRecordKind::Entity:
      case EmbeddingRecordKind::Relation: {
        if (id2 != 0) throw FormatError("embedding cache: record " + std::to_string(i) +
                                        " has a second id");
        auto& table = kind == 0 ? cache.entities : cache.relations;
        inserted = table.emplace(id1, std::move(v)).second;
        break;
      }
      case EmbeddingRecordKind::Pair:
        inserted = cache.pairs.emplace(std::make_pair(id1, id2), std::move(v)).second;
        break;
      default:
        throw FormatError("embedding cache: unknown record kind " + std::to_string(kind));
    }
    if (!inserted) throw FormatError("embedding cache: duplicate record " + std::to_string(i));
  }
  return cache;
}

void write_embedding_cache(const std::filesystem::path& path, const EmbeddingCache& cache) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write embedding cache: " + path.string());
  out.write(kEmbeddingMagic.data(), static_cast<std::streamsize>(kEmbeddingMagic.size()));
  binio::write_pod<std::uint8_t>(out, cache.flags);
  binio::write_u64(out, cache.width);
  binio::write_u64(out, cache.record_count());
  auto put = [&](EmbeddingRecordKind kind, std::uint64_t id1, std::uint64_t id2, const Vec& v) {
    if (static_cast<std::uint64_t>(v.size()) != cache.width) {
      throw ContractError("embedding cache: vector width does not match the header");
    }
    binio::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
    binio::write_u64(out, id1);
    binio::write_u64(out, id2);
    for (Eigen::Index j = 0; j < v.size(); ++j) binio::write_pod<float>(out, static_cast<float>(v(j)));
  };
  for (const auto& [id, v] : cache.entities) put(EmbeddingRecordKind::Entity, id, 0, v);
  for (const auto& [id, v] : cache.relations) put(EmbeddingRecordKind::Relation, id, 0, v);
  for (const auto& [key, v] : cache.pairs) put(EmbeddingRecordKind::Pair, key.first, key.second, v);
  if (!out) throw FormatError("write failed: " + path.string());
}

PromptEmbeddingProvider::Base CacheProvider::base(EntityId h, RelationId r, ProviderTape*) const {
  const auto zero = Vec::Zero(static_cast<Eigen::Index>(cache_.width));
  auto e = cache_.entities.find(h.index);
  auto rel = cache_.relations.find(r.flat());
  return {e == cache_.entities.end() ? Vec(zero) : e->second,
          rel == cache_.relations.end() ? Vec(zero) : rel->second};
}

Vec CacheProvider::last_hidden(EntityId h, RelationId r, const Vec&, const Vec&,
                               ProviderTape*) const {
  auto it = cache_.pairs.find({h.index, r.flat()});
  if (it == cache_.pairs.end()) {
    throw LookupError("embedding cache has no pair (" + std::to_string(h.index) + ", " +
                      std::to_string(r.flat()) + ")");
  }
  return it->second;
}

// ---------------------------------------------------------------- fusion module

void FusionConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
}

FusionModule::FusionModule(const FusionConfig& cfg, Eigen::Index d_model, Eigen::Index d_llm,
                           Rng& rng)
    : config(cfg),
      adapter("adapter", ParamGroup::Other, d_model, d_llm, rng),
      relation_pool("pool.relation", ParamGroup::Other, d_model, d_model, rng) {
  config.validate();
}

Vec FusionModule::forward(const Mat& states, const Subgraph& sg,
                          const PromptEmbeddingProvider& provider, Tape* tape) const {
  if (provider.width() == 0) return Vec(0);
  if (config.lambda > 0.0 && !provider.accepts_fused_inputs()) {
    throw ConfigError("provider \"" + provider.kind() + "\" supports lambda = 0 only");
  }
  if (static_cast<std::size_t>(adapter.out_features()) != provider.width()) {
    throw ContractError("fusion: adapter width != provider width");
  }
  Tape local;
  Tape& t = tape ? *tape : local;
  t.provider = provider.new_tape();
  const auto b = provider.base(sg.head, sg.relation, t.provider.get());
  Vec fused_h = b.entity, fused_r = b.relation;
  if (config.lambda > 0.0) {
    t.state_h = states.row(static_cast<Eigen::Index>(sg.head_position()));
    t.context_r = pool_relation_context(states, sg, config.scope, relation_pool, &t.relation_pool);
    t.context_positions = relation_context_positions(sg, config.scope);
    fused_h = fuse(b.entity, adapter.forward(t.state_h), config.lambda);
    fused_r = fuse(b.relation, adapter.forward(t.context_r), config.lambda);
  }
  return provider.last_hidden(sg.head, sg.relation, fused_h, fused_r, t.provider.get());
}

void FusionModule::backward(const Subgraph& sg, PromptEmbeddingProvider& provider, Tape& t,
                            const Vec& d_t_hr, Mat& d_states) {
  if (provider.width() == 0) return;
  Vec dfh, dfr;
  provider.backward_last(t.provider.get(), d_t_hr, &dfh, &dfr);
  const double lam = config.lambda;
  if (lam < 1.0) provider.backward_base(t.provider.get(), (1.0 - lam) * dfh, (1.0 - lam) * dfr);
  if (lam == 0.0) return;
  const Vec dsh = adapter.backward(t.state_h, lam * dfh);
  d_states.row(static_cast<Eigen::Index>(sg.head_position())) += dsh;
  const Vec dctx = adapter.backward(t.context_r, lam * dfr);
  if (config.scope == RelationScope::Target) {
    d_states.row(static_cast<Eigen::Index>(sg.relation_position())) += dctx;
    return;
  }
  const Mat drows = relation_pool.backward(t.relation_pool, dctx);
  for (std::size_t i = 0; i < t.context_positions.size(); ++i) {
    d_states.row(static_cast<Eigen::Index>(t.context_positions[i])) +=
        drows.row(static_cast<Eigen::Index>(i));
  }
}

}  // namespace igt
