#include "igt/workspace.hpp"

#include "igt/errors.hpp"
#include "igt/rng.hpp"

namespace igt {

const std::vector<Triple>& Workspace::split(std::string_view name) const {
  if (name == "train") return data.train;
  if (name == "valid") return data.valid;
  if (name == "test") return data.test;
  throw ConfigError("unknown split \"" + std::string(name) + "\" (train, valid or test)");
}

Workspace make_workspace(Dataset data) {
  Workspace ws;
  ws.data = std::move(data);
  ws.graph = ws.data.train_graph(true);
  ws.catalog = TextCatalog::build(ws.graph, ws.data.entity_text, ws.data.relation_text);
  ws.filter = FilterIndex(ws.data.all_true_triples());
  return ws;
}

Workspace open_workspace(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) return make_workspace(load_dataset_dir(source));
  if (!std::filesystem::exists(source)) {
    throw ConfigError("dataset not found: " + source.string());
  }
  return make_workspace(load_dataset(source));
}

std::unique_ptr<Model> build_model(const TrainConfig& config, const Workspace& ws,
                                   const std::filesystem::path& provider_cache) {
  config.model.validate();
  Rng rng(derive_seed(config.seed, {0x1417}));
  auto provider = make_provider(config.model, ws.catalog, rng, provider_cache);
  return std::make_unique<Model>(config.model, ws.graph.entity_count(), ws.graph.relation_slots(),
                                 std::move(provider), rng);
}

}  // namespace igt
