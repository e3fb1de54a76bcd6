#include "igt/model.hpp"

#include <fstream>
#include <sstream>

#include "igt/binio.hpp"
#include "igt/errors.hpp"

namespace igt {

void ModelConfig::validate() const {
  encoder.validate();
  objective.validate();
  fusion.validate();
  if (provider != "none" && provider != "stub" && provider != "cache") {
    throw ConfigError("unknown provider \"" + provider + "\" (expected none, stub, cache)");
  }
  if (provider == "stub") stub.validate();
  if (provider == "cache" && fusion.lambda != 0.0) {
    throw ConfigError("the cache provider supports lambda = 0 only");
  }
}

std::string describe_architecture(const ModelConfig& c, std::size_t entities,
                                  std::size_t relation_slots, std::size_t provider_width) {
  std::ostringstream os;
  os << "entities=" << entities << "\nrelation_slots=" << relation_slots
     << "\nd_model=" << c.encoder.d_model << "\nn_heads=" << c.encoder.n_heads
     << "\nn_layers=" << c.encoder.n_layers << "\nd_ff=" << c.encoder.d_ff
     << "\nnum_distance_buckets=" << c.encoder.buckets.num_distance_buckets
     << "\nmax_exact_distance=" << c.encoder.buckets.max_exact_distance
     << "\nshare_g2g=" << c.encoder.distinction.share_g2g << "\nprovider=" << c.provider
     << "\nprovider_width=" << provider_width << "\nclassifier_hidden=" << c.classifier_hidden
     << "\nrelation_scope=" << scope_name(c.fusion.scope);
  if (c.provider == "stub") {
    os << "\nstub_layers=" << c.stub.n_layers << "\nstub_heads=" << c.stub.n_heads
       << "\nstub_d_ff=" << c.stub.d_ff << "\nstub_words=" << c.stub.max_description_words;
  }
  os << '\n';
  return os.str();
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::shared_ptr<PromptEmbeddingProvider> make_provider(const ModelConfig& config,
                                                       const TextCatalog& catalog, Rng& rng,
                                                       const std::filesystem::path& cache_path) {
  if (config.provider == "none") return std::make_shared<NullProvider>();
  if (config.provider == "stub") {
    return std::make_shared<StubPromptProvider>(catalog, config.stub, rng);
  }
  if (config.provider == "cache") {
    if (cache_path.empty()) throw ConfigError("provider = cache needs an embedding cache path");
    return std::make_shared<CacheProvider>(read_embedding_cache(cache_path));
  }
  throw ConfigError("unknown provider \"" + config.provider + "\"");
}

namespace {

std::shared_ptr<PromptEmbeddingProvider> or_null(std::shared_ptr<PromptEmbeddingProvider> p) {
  return p ? std::move(p) : std::make_shared<NullProvider>();
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::size_t entities, std::size_t relation_slots,
             std::shared_ptr<PromptEmbeddingProvider> prov, Rng& rng)
    : config(cfg), provider(or_null(std::move(prov))), entities_(entities),
      relation_slots_(relation_slots) {
  config.validate();
  if (entities == 0) throw ContractError("model needs at least one entity");
  if (!provider->accepts_fused_inputs() && config.fusion.lambda != 0.0) {
    throw ConfigError("provider \"" + provider->kind() + "\" supports lambda = 0 only");
  }
  const auto d = static_cast<Eigen::Index>(config.encoder.d_model);
  const auto d_llm = static_cast<Eigen::Index>(provider->width());
  encoder = EncoderState(config.encoder, entities, relation_slots, rng);
  fusion = FusionModule(config.fusion, d, d_llm, rng);
  const auto hidden = config.classifier_hidden ? config.classifier_hidden : config.encoder.d_model;
  head = ObjectiveHead(d, d_llm, hidden, static_cast<Eigen::Index>(entities), rng);
}

ParamList Model::parameters() {
  ParamList out;
  encoder.collect(out);
  if (provider->width() > 0) fusion.collect(out);
  head.collect(out);
  provider->collect(out);
  return out;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::uint64_t Model::digest() const {
  return fnv1a(describe_architecture(config, entities_, relation_slots_, provider->width()));
}

LossBreakdown Model::accumulate(const Subgraph& sg, EntityId gold, double scale,
                                Rng* dropout_rng) {
  const SubgraphPositions pos = prepare_positions(sg, config.encoder);
  EncodeCache cache;
  const Mat states = encode(sg, pos, encoder, &cache, dropout_rng);
  FusionModule::Tape tape;
  const Vec t_hr = fusion.forward(states, sg, *provider, &tape);
  ObjectiveGrads grads;
  const LossBreakdown out =
      objective_forward_backward(head, states, sg, gold, t_hr, config.objective, scale, &grads);
  fusion.backward(sg, *provider, tape, grads.d_prefix, grads.d_states);
  encode_backward(sg, pos, cache, grads.d_states, encoder);
  return out;
}

LossBreakdown Model::loss(const Subgraph& sg, EntityId gold) {
  const SubgraphPositions pos = prepare_positions(sg, config.encoder);
  const Mat states = encode(sg, pos, encoder);
  const Vec t_hr = fusion.forward(states, sg, *provider, nullptr);
  return objective_forward_backward(head, states, sg, gold, t_hr, config.objective);
}

Vec Model::predict(const Subgraph& sg) const {
  const SubgraphPositions pos = prepare_positions(sg, config.encoder);
  const Mat states = encode(sg, pos, encoder);
  const Vec t_hr = fusion.forward(states, sg, *provider, nullptr);
  return head.predict(states, sg, t_hr);
}

void save_checkpoint(const std::filesystem::path& path, Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint: " + path.string());
  const auto params = model.parameters();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  binio::write_u64(out, model.digest());
  binio::write_u64(out, params.size());
  for (const Param* p : params) {
    binio::write_string(out, p->name);
    binio::write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    binio::write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        binio::write_pod<float>(out, static_cast<float>(p->value(i, j)));
      }
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, Model& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  binio::expect_magic(in, kCheckpointMagic);
  const auto digest = binio::read_u64(in);
  if (digest != model.digest()) {
    throw FormatError("checkpoint " + path.string() +
                      " was written for a different configuration (digest mismatch)");
  }
  const auto params = model.parameters();
  const auto count = binio::read_u64(in);
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                      std::to_string(params.size()));
  }
  std::vector<Mat> values;
  values.reserve(params.size());
  for (const Param* p : params) {
    const auto name = binio::read_string(in);
    const auto rows = binio::read_u64(in);
    const auto cols = binio::read_u64(in);
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw FormatError("checkpoint tensor \"" + name + "\" does not match \"" + p->name + "\"");
    }
    Mat m(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = binio::read_pod<float>(in);
    }
    values.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint has trailing bytes");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(values[i]);
}

}  // namespace igt
