#pragma once

// Finite two-dimensional bond lattices.  Nodes live on an nx-by-ny grid and
// are addressed either by coordinates (jx, jy), both 1-based, or by the
// linear index (jy-1)*nx + (jx-1).  Bonds connect axial nearest neighbors.
// Excitations enter in the first column (jx = 1, "sources") and are absorbed
// in the last column (jx = nx, "traps").

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qperc/rng.hpp"

namespace qperc {

struct LatticeSpec {
  int nx = 0;  // columns (x extent); transport runs along x
  int ny = 0;  // rows (y extent); one source and one trap per row

  LatticeSpec(int nx_, int ny_) : nx(nx_), ny(ny_) {
    if (nx < 2)
      throw std::invalid_argument(
          "LatticeSpec: nx must be >= 2 (source and trap columns must be "
          "disjoint), got nx=" + std::to_string(nx));
    if (ny < 1)
      throw std::invalid_argument("LatticeSpec: ny must be >= 1, got ny=" +
                                  std::to_string(ny));
  }

  int node_count() const { return nx * ny; }

  // Number of axial nearest-neighbor pairs: 2*nx*ny - (nx + ny).
  int bond_universe_size() const { return 2 * nx * ny - (nx + ny); }

  // ny/nx: < 1 landscape, = 1 square, > 1 portrait.
  double aspect_ratio() const {
    return static_cast<double>(ny) / static_cast<double>(nx);
  }

  int node_index(int jx, int jy) const { return (jy - 1) * nx + (jx - 1); }

  bool is_source(int node) const { return node % nx == 0; }
  bool is_trap(int node) const { return node % nx == nx - 1; }

  std::vector<int> source_nodes() const {
    std::vector<int> s(ny);
    for (int jy = 1; jy <= ny; ++jy) s[jy - 1] = node_index(1, jy);
    return s;
  }
  std::vector<int> trap_nodes() const {
    std::vector<int> t(ny);
    for (int jy = 1; jy <= ny; ++jy) t[jy - 1] = node_index(nx, jy);
    return t;
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

struct Bond {
  // Endpoints in canonical order: (jx, jy) has the lower linear index.
  std::int16_t jx, jy, kx, ky;

  bool horizontal() const { return kx == jx + 1; }

  friend bool operator==(const Bond&, const Bond&) = default;
};

// Canonical bond universe: nodes in row-major order, and at each node the
// horizontal bond (toward x+1) precedes the vertical one (toward y+1).
inline std::vector<Bond> enumerate_bonds(const LatticeSpec& spec) {
  std::vector<Bond> bonds;
  bonds.reserve(spec.bond_universe_size());
  for (int jy = 1; jy <= spec.ny; ++jy) {
    for (int jx = 1; jx <= spec.nx; ++jx) {
      if (jx < spec.nx)
        bonds.push_back({static_cast<std::int16_t>(jx),
                         static_cast<std::int16_t>(jy),
                         static_cast<std::int16_t>(jx + 1),
                         static_cast<std::int16_t>(jy)});
      if (jy < spec.ny)
        bonds.push_back({static_cast<std::int16_t>(jx),
                         static_cast<std::int16_t>(jy),
                         static_cast<std::int16_t>(jx),
                         static_cast<std::int16_t>(jy + 1)});
    }
  }
  return bonds;
}

// One sampled structure: B occupied bonds out of the universe, with full
// RNG provenance so it can be regenerated from (spec, B, seed, r) alone.
struct Realization {
  LatticeSpec spec;
  int B = 0;
  std::uint64_t seed = 0;
  std::uint64_t r = 0;                   // ordinal within the ensemble
  std::vector<std::uint32_t> bond_ids;   // sorted indices into the universe
};

// Random permutation of the bond universe for realization r.  The stream is
// keyed on (seed, r, salt) only, so any prefix of it is reproducible without
// knowing which B values will be requested.  Nested ensembles read prefixes
// of the salt=0 permutation; independent-per-B sampling salts with B.
inline std::vector<std::uint32_t> bond_permutation(const LatticeSpec& spec,
                                                   std::uint64_t seed,
                                                   std::uint64_t r,
                                                   std::uint64_t salt = 0) {
  SplitMix64 rng(stream_key(seed, r, salt));
  return shuffled_iota(static_cast<std::uint32_t>(spec.bond_universe_size()),
                       rng);
}

// Uniform sample of B distinct bonds: the first B entries of the realization
// permutation.  A prefix of a uniform permutation is a uniform B-subset.
inline Realization sample_realization(const LatticeSpec& spec, int B,
                                      std::uint64_t seed, std::uint64_t r) {
  if (B < 0 || B > spec.bond_universe_size())
    throw std::domain_error(
        "sample_realization: B=" + std::to_string(B) +
        " outside [0, B_max=" + std::to_string(spec.bond_universe_size()) +
        "]");
  auto perm = bond_permutation(spec, seed, r);
  Realization real{spec, B, seed, r, {}};
  real.bond_ids.assign(perm.begin(), perm.begin() + B);
  std::sort(real.bond_ids.begin(), real.bond_ids.end());
  return real;
}

inline std::vector<Bond> resolve_bonds(const Realization& real) {
  const auto universe = enumerate_bonds(real.spec);
  std::vector<Bond> out;
  out.reserve(real.bond_ids.size());
  for (auto id : real.bond_ids) out.push_back(universe[id]);
  return out;
}

// Graph Laplacian of the occupied-bond graph: degree on the diagonal, -1 per
// bond off the diagonal.  Rows sum to zero; positive semidefinite; the
// multiplicity of eigenvalue 0 equals the number of connected clusters.
inline Eigen::MatrixXd build_connectivity(const LatticeSpec& spec,
                                          std::span<const Bond> bonds) {
  const int n = spec.node_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const Bond& b : bonds) {
    const int i = spec.node_index(b.jx, b.jy);
    const int k = spec.node_index(b.kx, b.ky);
    a(i, k) -= 1.0;
    a(k, i) -= 1.0;
    a(i, i) += 1.0;
    a(k, k) += 1.0;
  }
  return a;
}

inline Eigen::MatrixXd build_connectivity(const Realization& real) {
  const auto bonds = resolve_bonds(real);
  return build_connectivity(real.spec, bonds);
}

// Union-find with path halving and union by size.  Exposed so ensemble
// sweeps can grow cluster structure incrementally along a bond permutation.
class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns true if a and b were in different sets.
  bool unite(int a, int b) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    if (size_[ra] < size_[rb]) std::swap(ra, rb);
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

struct ClusterPartition {
  std::vector<int> label;             // node -> cluster id (contiguous,
                                      // assigned in first-seen node order)
  std::vector<std::uint8_t> has_source;  // per cluster id
  std::vector<std::uint8_t> has_trap;
  int count = 0;
};

// Contiguous relabeling of a union-find state plus source/trap flags.
inline ClusterPartition partition_from(UnionFind& uf, const LatticeSpec& spec) {
  const int n = spec.node_count();
  ClusterPartition part;
  part.label.assign(n, -1);
  std::vector<int> root_to_id(n, -1);
  for (int v = 0; v < n; ++v) {
    const int root = uf.find(v);
    if (root_to_id[root] < 0) {
      root_to_id[root] = part.count++;
      part.has_source.push_back(0);
      part.has_trap.push_back(0);
    }
    const int id = root_to_id[root];
    part.label[v] = id;
    if (spec.is_source(v)) part.has_source[id] = 1;
    if (spec.is_trap(v)) part.has_trap[id] = 1;
  }
  return part;
}

inline ClusterPartition clusters(const LatticeSpec& spec,
                                 std::span<const Bond> bonds) {
  UnionFind uf(spec.node_count());
  for (const Bond& b : bonds)
    uf.unite(spec.node_index(b.jx, b.jy), spec.node_index(b.kx, b.ky));
  return partition_from(uf, spec);
}

inline ClusterPartition clusters(const Realization& real) {
  const auto bonds = resolve_bonds(real);
  return clusters(real.spec, bonds);
}

}  // namespace qperc
