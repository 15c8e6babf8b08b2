#pragma once

// R-realization ensembles: averaged long-time behaviors, B sweeps with
// B_0.5 / p_0.5 crossing location, aspect-ratio scans, and participation
// maps.
//
// Determinism contract: every result is a pure function of the config.
// Realization r draws from a stream keyed on (seed, r), workers write into
// per-realization slots, and reductions always run sequentially in r order,
// so the output is bit-identical for any thread count.
//
// Sampling modes: "nested" (default) reads the first B entries of one
// permutation per realization, so the bond set at B+1 extends the set at B
// and the classical survival of each realization is exactly non-increasing
// in B.  "independent" draws a fresh subset per B for strict i.i.d.
// semantics across B values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "qperc/lattice.hpp"
#include "qperc/spectral.hpp"
#include "qperc/transport.hpp"

namespace qperc {

struct EnsembleConfig {
  LatticeSpec spec;
  int R = 1000;
  std::uint64_t seed = 42;
  double gamma = 1.0;
  std::vector<int> B_values;  // empty means the full range 0..B_max
  bool nested = true;
  int threads = 1;
  Tolerances tol{};
};

struct BRow {
  int B = 0;
  double p = 0.0;  // B / B_max
  double mean_P_inf = 0.0;
  double stderr_P = 0.0;
  double mean_Pi_inf = 0.0;
  double stderr_Pi = 0.0;
  int defective = 0;  // realizations that took the time-domain fallback
};

struct Crossing {
  bool found = false;
  int B05 = -1;
  double p05 = std::numeric_limits<double>::quiet_NaN();
  double p05_interp = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<BRow> rows;
  Crossing rw;  // classical walker
  Crossing qw;  // quantum walker
};

namespace detail {

// Static round-robin fan-out over realizations; fn(r) must touch only its
// own slot.  The first exception thrown by any worker is rethrown here.
template <typename Fn>
void parallel_for_r(int R, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, R));
  if (threads == 1) {
    for (int r = 0; r < R; ++r) fn(r);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int tid = 0; tid < threads; ++tid)
    pool.emplace_back([&, tid] {
      try {
        for (int r = tid; r < R; r += threads) fn(r);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<int> resolve_b_values(const EnsembleConfig& cfg) {
  const int bmax = cfg.spec.bond_universe_size();
  std::vector<int> bs = cfg.B_values;
  if (bs.empty()) {
    bs.resize(bmax + 1);
    std::iota(bs.begin(), bs.end(), 0);
    return bs;
  }
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  if (bs.front() < 0 || bs.back() > bmax)
    throw std::domain_error("sweep: B value outside [0, B_max=" +
                            std::to_string(bmax) + "]");
  return bs;
}

// Everything one realization contributes to a sweep.
struct RealizationRow {
  std::vector<double> p_inf, pi_inf, p_oracle;
  std::vector<std::uint8_t> fallback;
};

inline RealizationRow realization_sweep(const EnsembleConfig& cfg,
                                        const std::vector<Bond>& universe,
                                        const std::vector<int>& bs, int r) {
  const LatticeSpec& spec = cfg.spec;
  const int n = spec.node_count();
  RealizationRow out;
  out.p_inf.reserve(bs.size());
  out.pi_inf.reserve(bs.size());
  out.p_oracle.reserve(bs.size());
  out.fallback.reserve(bs.size());

  int current_b = -1;
  Eigen::MatrixXd a;
  UnionFind uf(n);
  std::vector<std::uint32_t> perm;
  if (cfg.nested) {
    perm = bond_permutation(spec, cfg.seed, r);
    a = Eigen::MatrixXd::Zero(n, n);
    current_b = 0;
  }

  for (int b : bs) {
    try {
      if (cfg.nested) {
        for (; current_b < b; ++current_b) {
          const Bond& bond = universe[perm[current_b]];
          const int i = spec.node_index(bond.jx, bond.jy);
          const int k = spec.node_index(bond.kx, bond.ky);
          a(i, k) -= 1.0;
          a(k, i) -= 1.0;
          a(i, i) += 1.0;
          a(k, k) += 1.0;
          uf.unite(i, k);
        }
      } else {
        const auto perm_b = bond_permutation(spec, cfg.seed, r, 1 + b);
        std::vector<Bond> resolved;
        resolved.reserve(b);
        for (int i = 0; i < b; ++i) resolved.push_back(universe[perm_b[i]]);
        a = build_connectivity(spec, resolved);
        uf = UnionFind(n);
        for (const Bond& bond : resolved)
          uf.unite(spec.node_index(bond.jx, bond.jy),
                   spec.node_index(bond.kx, bond.ky));
      }
      const TrappedOperators ops = make_trapped(spec, a, cfg.gamma);
      const SymSpectrum sym = decompose_symmetric(ops.classical, cfg.tol);
      const BiorthogonalSpectrum bio =
          decompose_biorthogonal(ops.quantum, cfg.tol);
      const LongTimeBehavior ltb =
          long_time_behavior(ops, sym, bio, spec, cfg.tol);
      ClusterPartition part = partition_from(uf, spec);
      out.p_inf.push_back(ltb.p_inf);
      out.pi_inf.push_back(ltb.pi_inf);
      out.p_oracle.push_back(ltb_classical_oracle(part, spec));
      out.fallback.push_back(
          ltb.method == LongTimeBehavior::Method::time_domain_fallback);
    } catch (const ComputationError& e) {
      throw ComputationError(std::string(e.what()) + " [seed=" +
                             std::to_string(cfg.seed) + " r=" +
                             std::to_string(r) + " B=" + std::to_string(b) +
                             "]");
    }
  }
  return out;
}

inline void mean_and_stderr(const std::vector<double>& xs, double& mean,
                            double& se) {
  const int r_count = static_cast<int>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;  // fixed order: bitwise reproducible
  mean = sum / r_count;
  if (r_count < 2) {
    se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / (r_count - 1)) / std::sqrt(double(r_count));
}

inline Crossing locate_crossing(const std::vector<BRow>& rows, bool quantum,
                                int bmax) {
  Crossing c;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double m = quantum ? rows[i].mean_Pi_inf : rows[i].mean_P_inf;
    if (m <= 0.5) {  // first downward crossing of 0.5
      c.found = true;
      c.B05 = rows[i].B;
      c.p05 = static_cast<double>(c.B05) / bmax;
      if (i == 0) {
        c.p05_interp = c.p05;
      } else {
        const double m_prev =
            quantum ? rows[i - 1].mean_Pi_inf : rows[i - 1].mean_P_inf;
        const double frac = (m_prev - 0.5) / (m_prev - m);
        const double b_star = rows[i - 1].B + frac * (rows[i].B - rows[i - 1].B);
        c.p05_interp = b_star / bmax;
      }
      break;
    }
  }
  return c;
}

}  // namespace detail

// Full sweep over the requested B values (ascending), with crossings.
inline SweepResult sweep(const EnsembleConfig& cfg) {
  if (cfg.R < 1) throw std::domain_error("sweep: R must be >= 1");
  const auto bs = detail::resolve_b_values(cfg);
  const auto universe = enumerate_bonds(cfg.spec);
  const int bmax = cfg.spec.bond_universe_size();

  std::vector<detail::RealizationRow> per_r(cfg.R);
  detail::parallel_for_r(cfg.R, cfg.threads, [&](int r) {
    per_r[r] = detail::realization_sweep(cfg, universe, bs, r);
  });

  SweepResult result;
  result.rows.resize(bs.size());
  std::vector<double> col(cfg.R);
  for (size_t bi = 0; bi < bs.size(); ++bi) {
    BRow& row = result.rows[bi];
    row.B = bs[bi];
    row.p = static_cast<double>(bs[bi]) / bmax;
    for (int r = 0; r < cfg.R; ++r) col[r] = per_r[r].p_inf[bi];
    detail::mean_and_stderr(col, row.mean_P_inf, row.stderr_P);
    for (int r = 0; r < cfg.R; ++r) col[r] = per_r[r].pi_inf[bi];
    detail::mean_and_stderr(col, row.mean_Pi_inf, row.stderr_Pi);
    for (int r = 0; r < cfg.R; ++r) row.defective += per_r[r].fallback[bi];
  }
  result.rw = detail::locate_crossing(result.rows, false, bmax);
  result.qw = detail::locate_crossing(result.rows, true, bmax);
  return result;
}

// Ensemble averages at a single B.
inline BRow average_ltb(const EnsembleConfig& cfg, int B) {
  EnsembleConfig one = cfg;
  one.B_values = {B};
  return sweep(one).rows.at(0);
}

// Ensemble-averaged participation ratio Xi[j][n] = <|<j|psi_n>|^4>_R for the
// trap-free Hamiltonian (A itself), eigenstates ordered by ascending
// eigenvalue; within a degenerate group, columns are ordered by
// lexicographically largest absolute amplitude.
inline Eigen::MatrixXd participation_map(const EnsembleConfig& cfg, int B) {
  if (cfg.R < 1) throw std::domain_error("participation_map: R must be >= 1");
  if (B < 0 || B > cfg.spec.bond_universe_size())
    throw std::domain_error("participation_map: B outside [0, B_max]");
  const LatticeSpec& spec = cfg.spec;
  const int n = spec.node_count();
  const auto universe = enumerate_bonds(spec);

  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(n, n);
  // Parallel within blocks, reduced sequentially in r order: deterministic
  // for any thread count with bounded memory.
  const int block = std::max(64, 8 * std::max(1, cfg.threads));
  std::vector<Eigen::MatrixXd> slot(std::min(block, cfg.R));
  for (int r0 = 0; r0 < cfg.R; r0 += block) {
    const int r1 = std::min(cfg.R, r0 + block);
    detail::parallel_for_r(r1 - r0, cfg.threads, [&](int i) {
      const int r = r0 + i;
      const Realization real = sample_realization(spec, B, cfg.seed, r);
      std::vector<Bond> bonds;
      bonds.reserve(real.bond_ids.size());
      for (auto id : real.bond_ids) bonds.push_back(universe[id]);
      Eigen::MatrixXd a = build_connectivity(spec, bonds);
      SymSpectrum s;
      try {
        s = decompose_symmetric(a, cfg.tol);
      } catch (const ComputationError& e) {
        throw ComputationError(std::string(e.what()) + " [seed=" +
                               std::to_string(cfg.seed) + " r=" +
                               std::to_string(r) + " B=" + std::to_string(B) +
                               "]");
      }
      // Eigenvalue-ascending order with the documented tie-break.
      std::vector<double> vals(s.values.data(), s.values.data() + n);
      const double spread = vals.back() - vals.front();
      std::vector<int> order;
      order.reserve(n);
      for (const auto& g :
           group_degenerate(vals, cfg.tol.deg * std::max(1.0, spread))) {
        std::vector<int> grp = g;
        std::sort(grp.begin(), grp.end(), [&](int ca, int cb) {
          for (int j = 0; j < n; ++j) {
            const double ma = std::abs(s.vectors(j, ca));
            const double mb = std::abs(s.vectors(j, cb));
            if (ma != mb) return ma > mb;
          }
          return ca < cb;
        });
        order.insert(order.end(), grp.begin(), grp.end());
      }
      Eigen::MatrixXd& m = slot[i];
      m.resize(n, n);
      for (int c = 0; c < n; ++c)
        for (int j = 0; j < n; ++j) {
          const double a2 = s.vectors(j, order[c]) * s.vectors(j, order[c]);
          m(j, c) = a2 * a2;
        }
    });
    for (int i = 0; i < r1 - r0; ++i) xi += slot[i];
  }
  return xi / cfg.R;
}

struct ScanRow {
  int nx = 0, ny = 0;
  double ar = 0.0;
  Crossing rw, qw;
};

// One full-range sweep per geometry; rows sorted by ascending aspect ratio.
inline std::vector<ScanRow> aspect_ratio_scan(
    const std::vector<LatticeSpec>& specs, int R, std::uint64_t seed,
    double gamma = 1.0, int threads = 1, bool nested = true,
    const Tolerances& tol = {}) {
  std::vector<ScanRow> rows;
  rows.reserve(specs.size());
  for (const LatticeSpec& spec : specs) {
    EnsembleConfig cfg{spec, R, seed, gamma, {}, nested, threads, tol};
    const SweepResult res = sweep(cfg);
    rows.push_back({spec.nx, spec.ny, spec.aspect_ratio(), res.rw, res.qw});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ScanRow& a, const ScanRow& b) {
                     return a.ar < b.ar;
                   });
  return rows;
}

}  // namespace qperc
