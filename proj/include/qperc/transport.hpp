#pragma once

// Transition probabilities, survival probabilities and their long-time
// behavior (LTB) for a single lattice realization.
//
// Classical (incoherent):  p_kj(t) = sum_n e^{-lambda_n t} <k|phi_n><phi_n|j>
// Quantum (coherent):      pi_kj(t) = |sum_n e^{-i E_n t} psi_n(k) psi_n(j)|^2
//
// Survival averages the outgoing probability over the ny source nodes and
// all final nodes, normalized so P(0) = Pi(0) = 1.  The classical LTB is the
// t->infinity limit (only zero modes survive); the quantum LTB is the
// long-time Cesaro average, where only dark states (gamma ~ 0) contribute and
// cross terms survive only between dark states of equal real energy.
//
// Two independent cross-checks accompany the spectral formulas: a cluster
// oracle for the classical limit (a source keeps its mass iff its cluster
// holds no trap) and direct matrix-exponential propagation for the quantum
// average (also the fallback when the eigenbasis is flagged defective).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qperc/lattice.hpp"
#include "qperc/spectral.hpp"

namespace qperc {

enum class Walker { classical, quantum };

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> values;
  Walker kind = Walker::classical;
};

struct LongTimeBehavior {
  double p_inf = 0.0;   // classical limit
  double pi_inf = 0.0;  // quantum long-time average
  enum class Method { spectral, time_domain_fallback } method = Method::spectral;
};

inline double transition_classical(const SymSpectrum& s, int j, int k,
                                   double t) {
  if (t < 0.0) throw std::domain_error("transition_classical: t must be >= 0");
  const Eigen::ArrayXd decay = (-t * s.values.array()).exp();
  return (decay * s.vectors.row(k).transpose().array() *
          s.vectors.row(j).transpose().array())
      .sum();
}

inline double transition_quantum(const BiorthogonalSpectrum& s, int j, int k,
                                 double t) {
  if (t < 0.0) throw std::domain_error("transition_quantum: t must be >= 0");
  if (s.defective)
    throw ComputationError(
        "transition_quantum: spectrum flagged defective; use propagate_direct");
  const Eigen::ArrayXcd phase =
      (Complex(0.0, -t) * s.values.array()).exp();
  const Complex amp = (phase * s.vectors.row(k).transpose().array() *
                       s.vectors.row(j).transpose().array())
                          .sum();
  return std::norm(amp);
}

// P(t) = (1/ny) sum_{sources l} sum_k p_kl(t)
inline double survival_classical(const SymSpectrum& s,
                                 const LatticeSpec& lattice, double t) {
  if (t < 0.0) throw std::domain_error("survival_classical: t must be >= 0");
  const Eigen::VectorXd colsum = s.vectors.colwise().sum();
  const Eigen::ArrayXd decay = (-t * s.values.array()).exp();
  double total = 0.0;
  for (int l : lattice.source_nodes())
    total += (decay * s.vectors.row(l).transpose().array() * colsum.array())
                 .sum();
  return total / lattice.ny;
}

// Pi(t) = (1/ny) sum_{sources l} sum_k pi_kl(t)
inline double survival_quantum(const BiorthogonalSpectrum& s,
                               const LatticeSpec& lattice, double t) {
  if (t < 0.0) throw std::domain_error("survival_quantum: t must be >= 0");
  if (s.defective)
    throw ComputationError(
        "survival_quantum: spectrum flagged defective; use the windowed "
        "time-domain estimate");
  const Eigen::VectorXcd phase =
      (Complex(0.0, -t) * s.values.array()).exp().matrix();
  double total = 0.0;
  for (int l : lattice.source_nodes()) {
    const Eigen::VectorXcd w =
        s.vectors *
        (phase.array() * s.vectors.row(l).transpose().array()).matrix();
    total += w.squaredNorm();
  }
  return total / lattice.ny;
}

// Classical t->infinity limit: only eigenvalue-zero modes (one per trap-free
// cluster) survive the decay.
inline double ltb_classical(const SymSpectrum& s, const LatticeSpec& lattice,
                            const Tolerances& tol = {}) {
  const double eps_zero =
      tol.dark * std::max(1.0, s.values.cwiseAbs().maxCoeff());
  const Eigen::VectorXd colsum = s.vectors.colwise().sum();
  double total = 0.0;
  for (int l : lattice.source_nodes())
    for (int n = 0; n < s.values.size(); ++n)
      if (s.values(n) < eps_zero)
        total += s.vectors(l, n) * colsum(n);
  return total / lattice.ny;
}

// Independent combinatorial route to the same limit: a cluster containing a
// trap loses all its probability, a trap-free cluster conserves it.
inline double ltb_classical_oracle(const ClusterPartition& part,
                                   const LatticeSpec& lattice) {
  int surviving = 0;
  for (int l : lattice.source_nodes())
    if (!part.has_trap[part.label[l]]) ++surviving;
  return static_cast<double>(surviving) / lattice.ny;
}

// Quantum long-time average: dark states only, coherent within equal real
// energy, dephased across distinct energies.
inline double ltb_quantum(const BiorthogonalSpectrum& s,
                          const LatticeSpec& lattice) {
  if (s.defective)
    throw ComputationError(
        "ltb_quantum: spectrum flagged defective; use ltb_quantum_auto");
  double total = 0.0;
  std::vector<int> members;
  for (const auto& g : s.groups) {
    members.clear();
    for (int n : g)
      if (s.dark[n]) members.push_back(n);
    if (members.empty()) continue;
    Eigen::MatrixXcd cols(s.vectors.rows(), members.size());
    for (size_t i = 0; i < members.size(); ++i)
      cols.col(i) = s.vectors.col(members[i]);
    for (int l : lattice.source_nodes()) {
      // amp(k) = sum_{n in group} psi_n(k) psi_n(l)
      const Eigen::VectorXcd amp = cols * cols.row(l).transpose();
      total += amp.squaredNorm();
    }
  }
  return total / lattice.ny;
}

// Matrix-exponential propagation, the eigendecomposition-free route.
// Quantum: exp(-iHt) |state>;  classical: exp(-Tt) state.
inline Eigen::VectorXcd propagate_direct(const TrappedOperators& ops,
                                         const Eigen::VectorXcd& state,
                                         double t, Walker kind) {
  if (t < 0.0) throw std::domain_error("propagate_direct: t must be >= 0");
  if (kind == Walker::quantum) {
    const Eigen::MatrixXcd u = (Complex(0.0, -t) * ops.quantum).exp();
    return u * state;
  }
  const Eigen::MatrixXd u = (-t * ops.classical).exp();
  return u.cast<Complex>() * state;
}

// Sampled average of Pi(t) over the window [t0, t1] with spacing dt,
// computed by repeated application of exp(-iH dt).  Serves as the oracle for
// the spectral LTB and as the defective-case fallback.
inline double windowed_ltb_quantum(const TrappedOperators& ops,
                                   const LatticeSpec& lattice, double t0,
                                   double t1, double dt) {
  if (!(t0 >= 0.0) || !(t1 > t0) || !(dt > 0.0))
    throw std::domain_error("windowed_ltb_quantum: need 0 <= t0 < t1, dt > 0");
  const int steps = static_cast<int>(std::lround((t1 - t0) / dt));
  const Eigen::MatrixXcd u0 = (Complex(0.0, -t0) * ops.quantum).exp();
  const Eigen::MatrixXcd u = (Complex(0.0, -dt) * ops.quantum).exp();
  double acc = 0.0;
  for (int l : lattice.source_nodes()) {
    Eigen::VectorXcd v = u0.col(l);
    for (int sidx = 0; sidx <= steps; ++sidx) {
      acc += v.squaredNorm();
      v = u * v;
    }
  }
  return acc / ((steps + 1) * lattice.ny);
}

// Window placement for time-domain estimates: the default [200, 400] window
// is adequate when every bright mode has decayed by t=200; a slower mode
// (gamma_min < 0.01) pushes the window start out to 5/gamma_min, where the
// leftover transient is e^{-10}.
inline double window_start(const BiorthogonalSpectrum& s, double t_min = 200.0,
                           double gamma_floor = 0.01) {
  const double g = s.min_bright_gamma();
  if (!std::isfinite(g) || g >= gamma_floor) return t_min;
  return std::max(t_min, 5.0 / g);
}

// Spectral LTB when the eigenbasis is trustworthy, windowed time average
// otherwise.  Eigenvalues remain reliable for near-defective matrices, so
// the adaptive window placement reuses them.
inline LongTimeBehavior long_time_behavior(const TrappedOperators& ops,
                                           const SymSpectrum& classical,
                                           const BiorthogonalSpectrum& quantum,
                                           const LatticeSpec& lattice,
                                           const Tolerances& tol = {}) {
  LongTimeBehavior out;
  out.p_inf = ltb_classical(classical, lattice, tol);
  if (!quantum.defective) {
    out.pi_inf = ltb_quantum(quantum, lattice);
    out.method = LongTimeBehavior::Method::spectral;
  } else {
    const double t0 = window_start(quantum);
    out.pi_inf = windowed_ltb_quantum(ops, lattice, t0, t0 + 200.0, 0.5);
    out.method = LongTimeBehavior::Method::time_domain_fallback;
  }
  return out;
}

// Both survival curves on a uniform grid, by stepping the two propagators.
// Robust to defective quantum spectra (no eigenbasis involved).
inline std::pair<SurvivalCurve, SurvivalCurve> survival_curves_stepped(
    const TrappedOperators& ops, const LatticeSpec& lattice, double t0,
    double t1, double dt) {
  if (!(t0 >= 0.0) || !(t1 >= t0) || !(dt > 0.0))
    throw std::domain_error("survival_curves_stepped: bad time grid");
  const int steps = static_cast<int>(std::lround((t1 - t0) / dt));
  SurvivalCurve cl{{}, {}, Walker::classical};
  SurvivalCurve qu{{}, {}, Walker::quantum};
  const Eigen::MatrixXd mc0 = (-t0 * ops.classical).exp();
  const Eigen::MatrixXd mc = (-dt * ops.classical).exp();
  const Eigen::MatrixXcd mq0 = (Complex(0.0, -t0) * ops.quantum).exp();
  const Eigen::MatrixXcd mq = (Complex(0.0, -dt) * ops.quantum).exp();
  const auto sources = lattice.source_nodes();
  std::vector<Eigen::VectorXd> pc;
  std::vector<Eigen::VectorXcd> pq;
  for (int l : sources) {
    pc.push_back(mc0.col(l));
    pq.push_back(mq0.col(l));
  }
  for (int sidx = 0; sidx <= steps; ++sidx) {
    const double t = t0 + sidx * dt;
    double sc = 0.0, sq = 0.0;
    for (size_t i = 0; i < sources.size(); ++i) {
      sc += pc[i].sum();
      sq += pq[i].squaredNorm();
    }
    cl.times.push_back(t);
    cl.values.push_back(sc / lattice.ny);
    qu.times.push_back(t);
    qu.values.push_back(sq / lattice.ny);
    if (sidx < steps)
      for (size_t i = 0; i < sources.size(); ++i) {
        pc[i] = mc * pc[i];
        pq[i] = mq * pq[i];
      }
  }
  return {std::move(cl), std::move(qu)};
}

}  // namespace qperc
