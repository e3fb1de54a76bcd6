#pragma once

// Small graph builders shared by the unit tests.

#include <algorithm>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "igt/kg.hpp"

namespace fixture {

/// Builds a graph from "head rel tail" lines (space separated).
inline igt::KnowledgeGraph graph(const std::vector<std::string>& lines, bool doubled = true) {
  igt::Vocabulary ents, rels;
  std::string text;
  for (auto l : lines) {
    std::replace(l.begin(), l.end(), ' ', '\t');
    text += l + "\n";
  }
  auto triples = igt::parse_triples(text, ents, rels);
  auto kg = igt::KnowledgeGraph::build(std::move(ents), std::move(rels), std::move(triples));
  return doubled ? igt::add_inverse_relations(kg) : kg;
}

inline igt::EntityId ent(const igt::KnowledgeGraph& kg, std::string_view name) {
  return kg.entity_by_name(name);
}

inline igt::RelationId rel(const igt::KnowledgeGraph& kg, std::string_view name) {
  return kg.relation_by_name(name);
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("igt-test-" + std::string(tag) + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
