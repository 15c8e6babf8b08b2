#include "qperc/lattice.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "qperc/spectral.hpp"

using namespace qperc;

TEST_CASE("spec validation and derived quantities", "[lattice]") {
  CHECK_THROWS_AS(LatticeSpec(1, 4), std::invalid_argument);
  CHECK_THROWS_AS(LatticeSpec(3, 0), std::invalid_argument);

  const LatticeSpec s(7, 7);
  CHECK(s.node_count() == 49);
  CHECK(s.bond_universe_size() == 84);  // 2*49 - 14
  CHECK(s.aspect_ratio() == 1.0);

  CHECK(LatticeSpec(2, 1).bond_universe_size() == 1);
  CHECK(LatticeSpec(2, 24).bond_universe_size() == 70);  // 2*48 - 26
  CHECK(LatticeSpec(24, 2).bond_universe_size() == 70);

  // Row-major linearization, 1-based coordinates.
  CHECK(s.node_index(1, 1) == 0);
  CHECK(s.node_index(7, 1) == 6);
  CHECK(s.node_index(1, 2) == 7);
  CHECK(s.node_index(3, 4) == 23);

  CHECK(s.is_source(s.node_index(1, 5)));
  CHECK(s.is_trap(s.node_index(7, 3)));
  CHECK_FALSE(s.is_source(s.node_index(2, 5)));
  CHECK(s.source_nodes().size() == 7);
  CHECK(s.trap_nodes().size() == 7);
}

TEST_CASE("bond universe count matches the closed form", "[lattice]") {
  for (int nx = 2; nx <= 32; ++nx)
    for (int ny = 1; ny <= 32; ++ny) {
      const LatticeSpec spec(nx, ny);
      CHECK(static_cast<int>(enumerate_bonds(spec).size()) ==
            2 * nx * ny - (nx + ny));
    }
}

TEST_CASE("canonical enumeration is a nearest-neighbor bijection",
          "[lattice]") {
  const LatticeSpec spec(6, 5);
  const auto bonds = enumerate_bonds(spec);
  std::set<std::pair<int, int>> seen;
  for (const Bond& b : bonds) {
    const int i = spec.node_index(b.jx, b.jy);
    const int k = spec.node_index(b.kx, b.ky);
    REQUIRE(i < k);  // canonical order: lower linear index first
    const bool horizontal = (b.kx == b.jx + 1) && (b.ky == b.jy);
    const bool vertical = (b.ky == b.jy + 1) && (b.kx == b.jx);
    CHECK((horizontal || vertical));
    CHECK(b.horizontal() == horizontal);
    CHECK(seen.insert({i, k}).second);  // no duplicates
  }
  CHECK(seen.size() == bonds.size());
}

TEST_CASE("sampling is deterministic and respects bounds", "[lattice]") {
  const LatticeSpec spec(2, 2);

  CHECK(sample_realization(spec, 0, 9, 3).bond_ids.empty());

  const auto full = sample_realization(spec, 4, 123, 0);
  CHECK(full.bond_ids == std::vector<std::uint32_t>{0, 1, 2, 3});
  const auto full2 = sample_realization(spec, 4, 987, 5);
  CHECK(full2.bond_ids == full.bond_ids);  // exhaustive draw, any seed

  const auto a = sample_realization(spec, 2, 42, 7);
  const auto b = sample_realization(spec, 2, 42, 7);
  CHECK(a.bond_ids == b.bond_ids);
  CHECK(a.bond_ids.size() == 2);

  CHECK_THROWS_AS(sample_realization(spec, 5, 1, 0), std::domain_error);
  CHECK_THROWS_AS(sample_realization(spec, -1, 1, 0), std::domain_error);
}

TEST_CASE("nested prefixes: realization at B extends realization at B-1",
          "[lattice]") {
  const LatticeSpec spec(5, 4);
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto perm = bond_permutation(spec, 77, r);
    for (int b = 1; b <= spec.bond_universe_size(); ++b) {
      const auto real = sample_realization(spec, b, 77, r);
      std::set<std::uint32_t> prefix(perm.begin(), perm.begin() + b);
      CHECK(std::set<std::uint32_t>(real.bond_ids.begin(),
                                    real.bond_ids.end()) == prefix);
    }
  }
}

TEST_CASE("single-bond draws are uniform over the universe", "[lattice]") {
  const LatticeSpec spec(3, 3);
  const int bmax = spec.bond_universe_size();  // 12
  std::map<std::uint32_t, int> freq;
  const int draws = 6000;
  for (int r = 0; r < draws; ++r)
    freq[sample_realization(spec, 1, 2024, r).bond_ids[0]]++;
  REQUIRE(static_cast<int>(freq.size()) == bmax);
  // Expected 500 per bond; 5 sigma ~ 110.
  for (const auto& [id, count] : freq) {
    CHECK(count > 390);
    CHECK(count < 610);
  }
}

TEST_CASE("connectivity matrix invariants", "[lattice]") {
  const LatticeSpec pair(2, 1);
  const auto a2 = build_connectivity(sample_realization(pair, 1, 0, 0));
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  CHECK((a2 - expected).cwiseAbs().maxCoeff() == 0.0);

  const LatticeSpec spec(2, 2);
  CHECK(build_connectivity(sample_realization(spec, 0, 0, 0)).isZero(0.0));

  // 2x2 full lattice: eigenvalues {0, 2, 2, 4}.
  const auto a4 = build_connectivity(sample_realization(spec, 4, 0, 0));
  const auto sp = decompose_symmetric(a4);
  CHECK(sp.values(0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(sp.values(1) == Catch::Approx(2.0).margin(1e-12));
  CHECK(sp.values(2) == Catch::Approx(2.0).margin(1e-12));
  CHECK(sp.values(3) == Catch::Approx(4.0).margin(1e-12));

  // Random realizations: symmetric, rows sum to zero, PSD, -1 off-diagonal.
  const LatticeSpec big(6, 4);
  for (int r = 0; r < 25; ++r) {
    const auto real = sample_realization(big, 3 + (r * 7) % 30, 5, r);
    const Eigen::MatrixXd a = build_connectivity(real);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        if (i != j) CHECK((a(i, j) == 0.0 || a(i, j) == -1.0));
    CHECK(decompose_symmetric(a).values(0) > -1e-12);
  }
}

TEST_CASE("cluster partition by hand", "[lattice]") {
  const LatticeSpec spec(2, 2);

  const auto none = clusters(sample_realization(spec, 0, 0, 0));
  CHECK(none.count == 4);
  for (int c = 0; c < 4; ++c)
    CHECK_FALSE((none.has_source[c] && none.has_trap[c]));

  // One horizontal bond (1,1)-(2,1): cluster {0,1} has source and trap.
  const auto universe = enumerate_bonds(spec);
  std::vector<Bond> one{universe[0]};
  REQUIRE(one[0].jx == 1);
  REQUIRE(one[0].kx == 2);
  REQUIRE(one[0].jy == 1);
  const auto part = clusters(spec, one);
  CHECK(part.count == 3);
  CHECK(part.label[0] == part.label[1]);
  CHECK(part.label[2] != part.label[0]);
  CHECK(part.label[3] != part.label[0]);
  CHECK(part.label[3] != part.label[2]);
  CHECK(part.has_source[part.label[0]]);
  CHECK(part.has_trap[part.label[0]]);
  CHECK(part.has_source[part.label[2]]);
  CHECK_FALSE(part.has_trap[part.label[2]]);

  // Labels are contiguous and assigned in first-seen node order.
  CHECK(part.label[0] == 0);
  CHECK(part.label[2] == 1);
  CHECK(part.label[3] == 2);
}

TEST_CASE("zero-eigenvalue multiplicity equals cluster count", "[lattice]") {
  const LatticeSpec spec(5, 5);
  for (int r = 0; r < 100; ++r) {
    const int b = r % (spec.bond_universe_size() + 1);
    const auto real = sample_realization(spec, b, 31, r);
    const auto part = clusters(real);
    const auto sp = decompose_symmetric(build_connectivity(real));
    const int nullity =
        static_cast<int>((sp.values.array() < 1e-8).count());
    CHECK(nullity == part.count);
  }
}

TEST_CASE("adding bonds only merges clusters (monotone coupling)",
          "[lattice]") {
  const LatticeSpec spec(6, 3);
  const auto universe = enumerate_bonds(spec);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto perm = bond_permutation(spec, 99, r);
    const int b_small = 8, b_large = 20;
    std::vector<Bond> small, large;
    for (int i = 0; i < b_large; ++i) {
      if (i < b_small) small.push_back(universe[perm[i]]);
      large.push_back(universe[perm[i]]);
    }
    const auto ps = clusters(spec, small);
    const auto pl = clusters(spec, large);
    // Same small-cluster => same large-cluster.
    for (int u = 0; u < spec.node_count(); ++u)
      for (int v = u + 1; v < spec.node_count(); ++v)
        if (ps.label[u] == ps.label[v]) CHECK(pl.label[u] == pl.label[v]);
  }
}
