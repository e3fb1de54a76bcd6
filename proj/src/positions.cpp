#include "igt/positions.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "igt/errors.hpp"

namespace igt {

namespace {

/// All-pairs directed hop counts by BFS from every token; -1 when unreachable.
std::vector<std::vector<int>> directed_hops(const Subgraph& sg) {
  const auto n = sg.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& p : sg.positions) {
    adj[p.head].push_back(p.relation);
    adj[p.relation].push_back(p.tail);
  }
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    auto& d = dist[s];
    d[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto v : adj[u]) {
        if (d[v] < 0) {
          d[v] = d[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return dist;
}

bool is_relation(const Token& t) { return t.kind == TokenKind::Relation; }

}  // namespace

DistanceMatrix build_distance_matrix(const Subgraph& sg) {
  const auto n = sg.size();
  const auto hops = directed_hops(sg);
  DistanceMatrix p(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        p(i, j) = 0;
        continue;
      }
      const int fwd = hops[i][j];
      const int bwd = hops[j][i];
      if (fwd < 0 && bwd < 0) continue;
      if (bwd < 0 || (fwd >= 0 && fwd < bwd)) {
        p(i, j) = fwd;
      } else if (fwd < 0 || bwd < fwd) {
        p(i, j) = -bwd;
      } else {
        p(i, j) = i < j ? fwd : -bwd;
      }
    }
  }
  return p;
}

DistinctionMatrix build_distinction_matrix(const Subgraph& sg, const DistanceMatrix& p,
                                           DistinctionOptions options) {
  const auto n = sg.size();
  if (p.size() != n) {
    throw ContractError("build_distinction_matrix: P is " + std::to_string(p.size()) +
                        "x" + std::to_string(p.size()) + " but the layout has " +
                        std::to_string(n) + " tokens");
  }
  DistinctionMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (options.share_g2g && p.is_g2g(i, j)) continue;
      const bool ri = is_relation(sg.tokens[i]);
      const bool rj = is_relation(sg.tokens[j]);
      d(i, j) = ri ? (rj ? kRelationRelation : kRelationEntity)
                   : (rj ? kEntityRelation : kEntityEntity);
    }
  }
  return d;
}

void BucketMap::validate() const {
  if (max_exact_distance < 0) throw ConfigError("max_exact_distance must be >= 0");
  if (num_distance_buckets < static_cast<std::uint32_t>(2 * max_exact_distance + 2)) {
    throw ConfigError("num_distance_buckets must be >= 2*max_exact_distance + 2");
  }
}

std::uint32_t BucketMap::bucket(int distance) const {
  if (distance == kG2G) return g2g_bucket();
  const int clamped = std::clamp(distance, -max_exact_distance, max_exact_distance);
  return static_cast<std::uint32_t>(clamped + max_exact_distance);
}

BucketIndexMatrix bucketize(const DistanceMatrix& p, const BucketMap& map) {
  map.validate();
  BucketIndexMatrix out;
  out.size = p.size();
  out.index.reserve(p.entries().size());
  for (int v : p.entries()) {
    out.index.push_back(map.bucket(v));
    if (map.beyond_range(v)) ++out.beyond_range_count;
  }
  return out;
}

BucketIndexMatrix bucketize(const DistinctionMatrix& d) {
  BucketIndexMatrix out;
  out.size = d.size();
  out.index.reserve(d.entries().size());
  for (int v : d.entries()) {
    out.index.push_back(v == kG2G ? kDistinctionG2GBucket : static_cast<std::uint32_t>(v));
  }
  return out;
}

template <class Tag>
std::string format_grid(const RelativeMatrix<Tag>& m) {
  std::size_t width = 1;
  for (int v : m.entries()) {
    if (v != kG2G) width = std::max(width, std::to_string(v).size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      const std::string cell = m.is_g2g(i, j) ? "G" : std::to_string(m(i, j));
      os << std::string(width - cell.size() + (j ? 1 : 0), ' ') << cell;
    }
    os << '\n';
  }
  return os.str();
}

template std::string format_grid(const DistanceMatrix&);
template std::string format_grid(const DistinctionMatrix&);

}  // namespace igt
