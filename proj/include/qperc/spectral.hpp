#pragma once

// Dense eigendecompositions for the two walk generators.
//
// Classical generator  T = A + Gamma_diag   (real symmetric, PSD)
// Quantum Hamiltonian  H = A - i*Gamma_diag (complex symmetric, not Hermitian)
//
// T is handled by a standard self-adjoint solver.  H needs more care: it is
// complex symmetric, so its left eigenvectors are the plain transposes (not
// conjugates) of the right ones, and the natural normalization is bilinear,
// psi^T psi = 1.  Eigenvectors for distinct eigenvalues are automatically
// bilinearly orthogonal; within a degenerate eigenvalue the solver returns an
// arbitrary basis which must be orthogonalized explicitly, otherwise spectral
// sums over the group are wrong.  Degeneracy grouping uses transitive closure
// on the full complex eigenvalue distance: adjacency in any 1-D sort is not
// reliable because roundoff-level real parts interleave states with different
// imaginary parts.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qperc/lattice.hpp"

namespace qperc {

using Complex = std::complex<double>;

// A solver-level failure (non-convergence, invariant violation).  Ensemble
// code catches these and rethrows with the (seed, r, B) reproduction triple.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double resid = 1e-10;     // relative residual bound for eigenpairs
  double dark = 1e-8;       // decay-rate threshold, scaled by max(1, ||H||)
  double deg = 1e-8;        // degeneracy gap, scaled by max(1, spectral range)
  double complete = 1e-6;   // completeness residual above which H is treated
                            // as (near-)defective
};

struct TrappedOperators {
  Eigen::MatrixXd classical;   // T = A + Gamma_diag
  Eigen::MatrixXcd quantum;    // H = A - i*Gamma_diag
  double gamma = 1.0;
  std::vector<int> trap_nodes;
};

inline TrappedOperators make_trapped(const LatticeSpec& spec,
                                     const Eigen::MatrixXd& a, double gamma) {
  if (gamma < 0.0)
    throw std::invalid_argument("make_trapped: gamma must be >= 0, got " +
                                std::to_string(gamma));
  TrappedOperators ops;
  ops.gamma = gamma;
  ops.trap_nodes = spec.trap_nodes();
  ops.classical = a;
  ops.quantum = a.cast<Complex>();
  for (int t : ops.trap_nodes) {
    ops.classical(t, t) += gamma;
    ops.quantum(t, t) -= Complex(0.0, gamma);
  }
  return ops;
}

struct SymSpectrum {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXd vectors;   // orthonormal columns, sign-canonicalized
};

namespace detail {

// Deterministic sign/phase convention: the largest-magnitude entry (lowest
// index on ties) gets a positive real part (positive imaginary on a purely
// imaginary entry).  Only +-1 flips are allowed: a general phase would break
// the bilinear normalization psi^T psi = 1.
template <typename Derived>
void canonicalize_sign(Eigen::MatrixBase<Derived>& v) {
  Eigen::Index imax = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v(i));
    if (m > best) {
      best = m;
      imax = i;
    }
  }
  const Complex z(v(imax));
  if (z.real() < 0.0 || (z.real() == 0.0 && z.imag() < 0.0)) v *= -1;
}

inline double inf_norm(const Eigen::MatrixXcd& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}
inline double inf_norm(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Connected components of the sparsity pattern; node lists sorted ascending.
inline std::vector<std::vector<int>> sparsity_components(
    const Eigen::MatrixXcd& h) {
  const int n = static_cast<int>(h.rows());
  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (h(i, j) != Complex(0.0, 0.0)) uf.unite(i, j);
  std::vector<std::vector<int>> comps;
  std::vector<int> root_to_id(n, -1);
  for (int v = 0; v < n; ++v) {
    const int root = uf.find(v);
    if (root_to_id[root] < 0) {
      root_to_id[root] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[root_to_id[root]].push_back(v);
  }
  return comps;
}

// Transitive-closure grouping of complex values under |E_a - E_b| < eps.
inline std::vector<std::vector<int>> closure_groups_complex(
    std::span<const Complex> vals, double eps) {
  const int n = static_cast<int>(vals.size());
  UnionFind uf(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::abs(vals[a] - vals[b]) < eps) uf.unite(a, b);
  std::vector<std::vector<int>> groups;
  std::vector<int> root_to_id(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = uf.find(i);
    if (root_to_id[root] < 0) {
      root_to_id[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[root_to_id[root]].push_back(i);
  }
  return groups;
}

}  // namespace detail

inline SymSpectrum decompose_symmetric(const Eigen::MatrixXd& m,
                                       const Tolerances& tol = {}) {
  const double scale = std::max(1.0, detail::inf_norm(m));
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol.resid * scale)
    throw std::invalid_argument("decompose_symmetric: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw ComputationError("decompose_symmetric: solver failed on " +
                           std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + " matrix, |M|=" +
                           std::to_string(scale));
  SymSpectrum s{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < s.vectors.cols(); ++c) {
    auto col = s.vectors.col(c);
    detail::canonicalize_sign(col);
  }
  return s;
}

// Degeneracy groups of real values: transitive closure of |v_a - v_b| < eps
// chains, groups ordered by ascending representative.  Returned indices refer
// to the input order.
inline std::vector<std::vector<int>> group_degenerate(
    std::span<const double> values, double eps) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[a] < values[b]; });
  std::vector<std::vector<int>> groups;
  for (int idx : order) {
    // In 1-D, chaining along the sorted sequence is the transitive closure.
    if (groups.empty() ||
        values[idx] - values[groups.back().back()] >= eps)
      groups.emplace_back();
    groups.back().push_back(idx);
  }
  return groups;
}

struct BiorthogonalSpectrum {
  Eigen::VectorXcd values;    // E_n = eps_n - i*gamma_n, sorted by (Re, Im)
  Eigen::MatrixXcd vectors;   // right eigenvectors, psi^T psi = 1; the left
                              // eigenvector of E_n is psi_n^T
  std::vector<std::vector<int>> groups;  // real-part degeneracy groups
  std::vector<std::uint8_t> dark;        // gamma_n below the dark threshold
  double max_residual = 0.0;             // max_n ||H psi - E psi|| / scale
  double completeness_residual = 0.0;    // max |Psi^T Psi - I|
  bool defective = false;
  double dark_threshold = 0.0;           // absolute threshold actually used
  double deg_threshold = 0.0;

  double gamma_of(int n) const { return -values(n).imag(); }

  // Slowest decay rate above the dark threshold (the mode that limits
  // time-domain convergence); +inf if everything is dark.
  double min_bright_gamma() const {
    double g = std::numeric_limits<double>::infinity();
    for (int n = 0; n < values.size(); ++n)
      if (!dark[n]) g = std::min(g, gamma_of(n));
    return g;
  }
};

inline BiorthogonalSpectrum decompose_biorthogonal(const Eigen::MatrixXcd& h,
                                                   const Tolerances& tol = {}) {
  const int n = static_cast<int>(h.rows());
  const double scale = std::max(1.0, detail::inf_norm(h));
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > tol.resid * scale)
    throw std::invalid_argument(
        "decompose_biorthogonal: matrix not complex symmetric");

  Eigen::VectorXcd values(n);
  Eigen::MatrixXcd vectors = Eigen::MatrixXcd::Zero(n, n);
  bool defective = false;
  int filled = 0;

  // Eigenvalue spread is needed for the degeneracy gap before eigenvalues
  // exist; Gershgorin bounds the spectrum by the infinity norm.
  const double eps_deg = tol.deg * std::max(1.0, 2.0 * scale);

  for (const auto& comp : detail::sparsity_components(h)) {
    const int m = static_cast<int>(comp.size());
    Eigen::MatrixXcd block(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) block(a, b) = h(comp[a], comp[b]);

    Eigen::VectorXcd ev(m);
    Eigen::MatrixXcd vec(m, m);
    if (block.imag().cwiseAbs().maxCoeff() == 0.0) {
      // Trap-free component: real symmetric, solved self-adjointly.  The
      // orthonormal real basis is already bilinearly orthonormal.
      const SymSpectrum s = decompose_symmetric(block.real(), tol);
      ev = s.values.cast<Complex>();
      vec = s.vectors.cast<Complex>();
    } else {
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(block);
      if (solver.info() != Eigen::Success)
        throw ComputationError(
            "decompose_biorthogonal: solver failed on block of size " +
            std::to_string(m));
      ev = solver.eigenvalues();
      vec = solver.eigenvectors();

      // Deterministic order within the block.
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (ev(a).real() != ev(b).real()) return ev(a).real() < ev(b).real();
        return ev(a).imag() < ev(b).imag();
      });
      Eigen::VectorXcd ev2(m);
      Eigen::MatrixXcd vec2(m, m);
      for (int i = 0; i < m; ++i) {
        ev2(i) = ev(order[i]);
        vec2.col(i) = vec.col(order[i]);
      }
      ev.swap(ev2);
      vec.swap(vec2);

      // Bilinear orthonormalization within degenerate groups.  A unitary QR
      // first conditions the raw basis, then modified Gram-Schmidt in the
      // bilinear form; two passes for numerical insurance.
      std::vector<Complex> vals(ev.data(), ev.data() + m);
      for (const auto& g : detail::closure_groups_complex(vals, eps_deg)) {
        const int gs = static_cast<int>(g.size());
        if (gs > 1) {
          Eigen::MatrixXcd bundle(m, gs);
          for (int i = 0; i < gs; ++i) bundle.col(i) = vec.col(g[i]);
          Eigen::HouseholderQR<Eigen::MatrixXcd> qr(bundle);
          Eigen::MatrixXcd q =
              qr.householderQ() * Eigen::MatrixXcd::Identity(m, gs);
          for (int i = 0; i < gs; ++i) vec.col(g[i]) = q.col(i);
        }
        for (int i = 0; i < gs; ++i) {
          Eigen::VectorXcd v = vec.col(g[i]);
          for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < i; ++j) {
              const Eigen::VectorXcd u = vec.col(g[j]);
              v -= (u.transpose() * v)(0, 0) * u;
            }
          const Complex s2 = (v.transpose() * v)(0, 0);
          if (std::abs(s2) < 1e-6) {
            // Quasi-null bilinear norm: (near-)defective eigenvalue.  Keep
            // the unitary vector; callers must take the time-domain path.
            defective = true;
            vec.col(g[i]) = v.normalized();
          } else {
            vec.col(g[i]) = v / std::sqrt(s2);
          }
        }
      }
    }

    for (int i = 0; i < m; ++i) {
      auto col = vec.col(i);
      detail::canonicalize_sign(col);
      values(filled) = ev(i);
      for (int a = 0; a < m; ++a) vectors(comp[a], filled) = vec(a, i);
      ++filled;
    }
  }

  // Global deterministic order across blocks.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (values(a).real() != values(b).real())
      return values(a).real() < values(b).real();
    return values(a).imag() < values(b).imag();
  });
  BiorthogonalSpectrum s;
  s.values.resize(n);
  s.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    s.values(i) = values(order[i]);
    s.vectors.col(i) = vectors.col(order[i]);
  }

  // Residuals and invariants.
  s.max_residual =
      (h * s.vectors - s.vectors * s.values.asDiagonal()).colwise().norm().maxCoeff() /
      scale;
  const Eigen::MatrixXcd gram =
      s.vectors.transpose() * s.vectors - Eigen::MatrixXcd::Identity(n, n);
  s.completeness_residual = gram.cwiseAbs().maxCoeff();
  s.defective = defective || s.completeness_residual > tol.complete;

  const double max_im = s.values.imag().maxCoeff();
  if (max_im > tol.resid * scale)
    throw ComputationError(
        "decompose_biorthogonal: positive imaginary eigenvalue part " +
        std::to_string(max_im) + " (growth is unphysical for a dissipative "
        "Hamiltonian)");

  s.dark_threshold = tol.dark * scale;
  s.deg_threshold = eps_deg;
  s.dark.resize(n);
  for (int i = 0; i < n; ++i) s.dark[i] = s.gamma_of(i) < s.dark_threshold;

  std::vector<double> reals(n);
  for (int i = 0; i < n; ++i) reals[i] = s.values(i).real();
  const double spread = n ? reals.back() - reals.front() : 0.0;
  s.groups = group_degenerate(reals, tol.deg * std::max(1.0, spread));
  return s;
}

struct DarkSubspace {
  std::vector<int> indices;
  bool consistent = true;           // every dark vector nearly vanishes on
                                    // the trap nodes
  double worst_trap_amplitude = 0.0;
};

// Indices of dark states (gamma below eps_dark) plus a physical consistency
// check: a state decays only through its trap amplitude, so a tiny gamma
// must coincide with a tiny amplitude on the trap nodes.
inline DarkSubspace dark_subspace(const BiorthogonalSpectrum& s,
                                  double eps_dark,
                                  std::span<const int> trap_nodes) {
  DarkSubspace out;
  for (int n = 0; n < s.values.size(); ++n) {
    if (s.gamma_of(n) >= eps_dark) continue;
    out.indices.push_back(n);
    double trap2 = 0.0;
    for (int t : trap_nodes) trap2 += std::norm(s.vectors(t, n));
    const double amp = std::sqrt(trap2) / s.vectors.col(n).norm();
    out.worst_trap_amplitude = std::max(out.worst_trap_amplitude, amp);
  }
  out.consistent = out.worst_trap_amplitude < std::sqrt(eps_dark);
  return out;
}

}  // namespace qperc
