#pragma once

// Relative distance (P) and distinction (D) matrices over a subgraph's token
// layout, and their bucketization into attention-bias table indices.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "igt/sampler.hpp"

namespace igt {

/// Sentinel for token pairs with no directed Levi-graph path (graph-to-graph).
inline constexpr int kG2G = std::numeric_limits<int>::max();

/// Square row-major integer matrix; the tag keeps P and D apart at compile time.
template <class Tag>
class RelativeMatrix {
 public:
  RelativeMatrix() = default;
  explicit RelativeMatrix(std::size_t n, int fill = kG2G) : n_(n), v_(n * n, fill) {}

  std::size_t size() const { return n_; }
  int operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  int& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
  bool is_g2g(std::size_t i, std::size_t j) const { return (*this)(i, j) == kG2G; }
  const std::vector<int>& entries() const { return v_; }

  bool operator==(const RelativeMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<int> v_;
};

struct DistanceTag {};
struct DistinctionTag {};
using DistanceMatrix = RelativeMatrix<DistanceTag>;
using DistinctionMatrix = RelativeMatrix<DistinctionTag>;

/// Distinction codes.
inline constexpr int kEntityEntity = 0;
inline constexpr int kEntityRelation = 1;
inline constexpr int kRelationEntity = 2;
inline constexpr int kRelationRelation = 3;

/// P[i][j] = +k for a shortest directed path i -> j of k hops over the Levi
/// graph (head -> relation -> tail per triple occurrence), -k when only j -> i
/// exists. With paths both ways the shorter wins; equal lengths give the
/// positive sign to the lower token index. Unreachable pairs are kG2G.
DistanceMatrix build_distance_matrix(const Subgraph& sg);

struct DistinctionOptions {
  /// Copy P's G2G mask into D. Off only for the ablation that codes every pair.
  bool share_g2g = true;
};

/// Throws ContractError when P does not match the layout size.
DistinctionMatrix build_distinction_matrix(const Subgraph& sg, const DistanceMatrix& p,
                                           DistinctionOptions options = {});

/// Signed distance -> bucket index. Distances in [-max_exact, max_exact] map
/// injectively to [0, 2*max_exact]; larger magnitudes clamp to the boundary
/// bucket and are counted as beyond range. The last bucket is G2G.
struct BucketMap {
  std::uint32_t num_distance_buckets = 32;
  int max_exact_distance = 15;

  /// Throws ConfigError when the exact range plus G2G does not fit.
  void validate() const;
  std::uint32_t g2g_bucket() const { return num_distance_buckets - 1; }
  std::uint32_t bucket(int distance) const;
  bool beyond_range(int distance) const {
    return distance != kG2G && (distance > max_exact_distance || distance < -max_exact_distance);
  }
};

/// Number of distinction buckets: four codes plus G2G.
inline constexpr std::uint32_t kDistinctionBuckets = 5;
inline constexpr std::uint32_t kDistinctionG2GBucket = 4;

struct BucketIndexMatrix {
  std::size_t size = 0;
  std::vector<std::uint32_t> index;  ///< Row-major.
  std::size_t beyond_range_count = 0;

  std::uint32_t operator()(std::size_t i, std::size_t j) const { return index[i * size + j]; }
};

BucketIndexMatrix bucketize(const DistanceMatrix& p, const BucketMap& map);
/// Identity on codes, kDistinctionG2GBucket for G2G; never beyond range.
BucketIndexMatrix bucketize(const DistinctionMatrix& d);

/// Aligned integer grid with "G" for G2G entries.
template <class Tag>
std::string format_grid(const RelativeMatrix<Tag>& m);

}  // namespace igt
