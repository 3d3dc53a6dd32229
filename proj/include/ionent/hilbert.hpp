#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ionent {

enum class Spin : int { Down = 0, Up = 1 };

// Two-spin basis in the order used by every 4-vector and 4x4 matrix here.
enum class TwoSpin : int { DownDown = 0, DownUp = 1, UpDown = 2, UpUp = 3 };

inline constexpr std::array<TwoSpin, 4> kTwoSpinBasis = {TwoSpin::DownDown, TwoSpin::DownUp,
                                                          TwoSpin::UpDown, TwoSpin::UpUp};

constexpr int index_of(TwoSpin s) { return static_cast<int>(s); }
constexpr TwoSpin two_spin(Spin a, Spin b) {
  return static_cast<TwoSpin>(2 * static_cast<int>(a) + static_cast<int>(b));
}
constexpr Spin spin_of(TwoSpin s, int ion) {
  const int i = static_cast<int>(s);
  return static_cast<Spin>(ion == 0 ? i / 2 : i % 2);
}
constexpr int up_count(TwoSpin s) {
  return static_cast<int>(spin_of(s, 0)) + static_cast<int>(spin_of(s, 1));
}

inline const char* short_name(TwoSpin s) {
  static constexpr const char* names[] = {"dd", "du", "ud", "uu"};
  return names[index_of(s)];
}

// Singlet (minus) and m=0 triplet (plus).
enum class BellSign { Minus, Plus };

inline constexpr int kDefaultFockLevels = 4;

struct BasisLabel {
  TwoSpin spins = TwoSpin::DownDown;
  int n_stretch = 0;
};

template <typename Real>
using SpinVector = Eigen::Matrix<std::complex<Real>, 4, 1>;
template <typename Real>
using SpinMatrix = Eigen::Matrix<std::complex<Real>, 4, 4>;
template <typename Real>
using Populations = Eigen::Matrix<Real, 4, 1>;

/// Pure state of two spins and the stretch mode truncated to `fock_levels`
/// Fock states. Amplitude of |spins, n> sits at index spins * N + n.
template <typename Real = double>
class JointState {
 public:
  using Scalar = std::complex<Real>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr Real kNormTolerance = Real(1e-9);

  static int index(BasisLabel label, int fock_levels) {
    return index_of(label.spins) * fock_levels + label.n_stretch;
  }

  static JointState basis(BasisLabel label, int fock_levels = kDefaultFockLevels) {
    check_label(label, fock_levels);
    Vector v = Vector::Zero(4 * fock_levels);
    v(index(label, fock_levels)) = Scalar(1);
    return JointState(std::move(v), fock_levels);
  }

  /// Throws std::invalid_argument if the vector is not normalized.
  static JointState from_amplitudes(Vector amplitudes, int fock_levels) {
    if (fock_levels < 1 || amplitudes.size() != 4 * fock_levels)
      throw std::invalid_argument("JointState: amplitude vector size does not match 4 * N_max");
    const Real norm = amplitudes.squaredNorm();
    if (std::abs(norm - Real(1)) > kNormTolerance)
      throw std::invalid_argument("JointState: amplitudes are not normalized (|psi|^2 = " +
                                  std::to_string(static_cast<double>(norm)) + ")");
    return JointState(std::move(amplitudes), fock_levels);
  }

  int fock_levels() const { return fock_levels_; }
  Eigen::Index dimension() const { return amplitudes_.size(); }
  const Vector& amplitudes() const { return amplitudes_; }
  Scalar amplitude(BasisLabel label) const {
    check_label(label, fock_levels_);
    return amplitudes_(index(label, fock_levels_));
  }

  /// N_max x 4 view: column = two-spin index, row = Fock number.
  auto as_matrix() const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 4>>(amplitudes_.data(),
                                                                      fock_levels_, 4);
  }

 private:
  JointState(Vector v, int fock_levels) : amplitudes_(std::move(v)), fock_levels_(fock_levels) {}

  static void check_label(BasisLabel label, int fock_levels) {
    if (label.n_stretch < 0 || label.n_stretch >= fock_levels)
      throw std::out_of_range("BasisLabel: n_stretch outside the truncated space");
  }

  Vector amplitudes_;
  int fock_levels_;
};

/// Reduced operator on the two spins, motion traced out.
template <typename Real = double>
class DensityOperator {
 public:
  using Matrix = SpinMatrix<Real>;

  static constexpr Real kHermitianTolerance = Real(1e-12);
  static constexpr Real kTraceTolerance = Real(1e-12);
  static constexpr Real kEigenvalueFloor = Real(-1e-10);

  /// Throws std::invalid_argument if the matrix is not a density operator.
  static DensityOperator from_matrix(const Matrix& m) {
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kHermitianTolerance)
      throw std::invalid_argument("DensityOperator: matrix is not Hermitian");
    if (std::abs(m.trace() - std::complex<Real>(1)) > kTraceTolerance)
      throw std::invalid_argument("DensityOperator: trace differs from 1");
    const Matrix h = Real(0.5) * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kEigenvalueFloor)
      throw std::invalid_argument("DensityOperator: matrix has a negative eigenvalue");
    return DensityOperator(h);
  }

  static DensityOperator pure(const SpinVector<Real>& psi) {
    const SpinVector<Real> u = psi / psi.norm();
    return DensityOperator(u * u.adjoint());
  }

  const Matrix& matrix() const { return rho_; }

  Populations<Real> populations() const { return rho_.diagonal().real(); }

 private:
  explicit DensityOperator(Matrix m) : rho_(std::move(m)) {}
  Matrix rho_;
};

// ---------------------------------------------------------------------------
// Named states.

/// (3/5)|du> - e^{i phi} (4/5)|ud>, stretch mode in |0>.
template <typename Real = double>
JointState<Real> psi_e(Real phi, int fock_levels = kDefaultFockLevels) {
  using C = std::complex<Real>;
  typename JointState<Real>::Vector v = JointState<Real>::Vector::Zero(4 * fock_levels);
  v(JointState<Real>::index({TwoSpin::DownUp, 0}, fock_levels)) = C(Real(3) / Real(5));
  v(JointState<Real>::index({TwoSpin::UpDown, 0}, fock_levels)) =
      -std::polar(Real(1), phi) * C(Real(4) / Real(5));
  return JointState<Real>::from_amplitudes(std::move(v), fock_levels);
}

template <typename Real = double>
SpinVector<Real> bell_vector(BellSign sign) {
  const Real s = Real(1) / std::sqrt(Real(2));
  SpinVector<Real> v = SpinVector<Real>::Zero();
  v(index_of(TwoSpin::DownUp)) = s;
  v(index_of(TwoSpin::UpDown)) = sign == BellSign::Minus ? -s : s;
  return v;
}

template <typename Real = double>
JointState<Real> bell_state(BellSign sign, int fock_levels = kDefaultFockLevels) {
  typename JointState<Real>::Vector v = JointState<Real>::Vector::Zero(4 * fock_levels);
  const SpinVector<Real> b = bell_vector<Real>(sign);
  for (TwoSpin s : kTwoSpinBasis) v(JointState<Real>::index({s, 0}, fock_levels)) = b(index_of(s));
  return JointState<Real>::from_amplitudes(std::move(v), fock_levels);
}

/// Joint state |spins> (x) |n = 0> built from a two-spin vector.
template <typename Real = double>
JointState<Real> with_motional_ground(const SpinVector<Real>& spins,
                                      int fock_levels = kDefaultFockLevels) {
  typename JointState<Real>::Vector v = JointState<Real>::Vector::Zero(4 * fock_levels);
  for (TwoSpin s : kTwoSpinBasis) v(JointState<Real>::index({s, 0}, fock_levels)) = spins(index_of(s));
  return JointState<Real>::from_amplitudes(std::move(v), fock_levels);
}

// ---------------------------------------------------------------------------
// Overlaps and reductions.

template <typename Real>
std::complex<Real> overlap(const JointState<Real>& a, const JointState<Real>& b) {
  if (a.fock_levels() != b.fock_levels())
    throw std::invalid_argument("overlap: states have different truncation");
  return a.amplitudes().dot(b.amplitudes());  // dot() conjugates the left operand
}

template <typename Real>
DensityOperator<Real> reduce(const JointState<Real>& s) {
  const auto m = s.as_matrix();
  const SpinMatrix<Real> rho = m.transpose() * m.conjugate();
  return DensityOperator<Real>::from_matrix(rho / rho.trace().real());
}

template <typename Real>
Populations<Real> spin_populations(const JointState<Real>& s) {
  return s.as_matrix().cwiseAbs2().colwise().sum().transpose();
}

template <typename Real>
Populations<Real> spin_populations(const DensityOperator<Real>& rho) {
  return rho.populations();
}

/// <psi| rho |psi> for a normalized two-spin vector.
template <typename Real>
Real state_fidelity(const DensityOperator<Real>& rho, const SpinVector<Real>& psi) {
  const Real f = (psi.adjoint() * rho.matrix() * psi)(0, 0).real();
  return std::clamp(f, Real(0), Real(1));
}

/// C |B><B| + (1 - C) rho_m with rho_m diagonal and chosen so that the result
/// has exactly the requested populations. Coherences between dd and uu are
/// zero. Throws std::domain_error for infeasible targets.
template <typename Real>
DensityOperator<Real> synthesize_rho(Real contrast, BellSign sign, const Populations<Real>& targets) {
  constexpr Real kTol = Real(1e-12);
  if (!(contrast >= 0 && contrast <= 1))
    throw std::domain_error("synthesize_rho: contrast must lie in [0, 1]");
  if ((targets.array() < -kTol).any() || std::abs(targets.sum() - Real(1)) > kTol)
    throw std::domain_error("synthesize_rho: target populations must form a distribution");
  const Real half_c = contrast / 2;
  if (targets(index_of(TwoSpin::DownUp)) < half_c - kTol ||
      targets(index_of(TwoSpin::UpDown)) < half_c - kTol)
    throw std::domain_error("synthesize_rho: P_du and P_ud must be at least C/2");

  SpinMatrix<Real> rho = SpinMatrix<Real>::Zero();
  for (int i = 0; i < 4; ++i) rho(i, i) = std::max(targets(i), Real(0));
  const int du = index_of(TwoSpin::DownUp);
  const int ud = index_of(TwoSpin::UpDown);
  const Real coherence = sign == BellSign::Minus ? -half_c : half_c;
  rho(du, ud) = coherence;
  rho(ud, du) = coherence;
  return DensityOperator<Real>::from_matrix(rho);
}

// ---------------------------------------------------------------------------
// Debug dump: one line per nonzero amplitude, "<spins> <n>\t<re>\t<im>".

template <typename Real>
std::string dump(const JointState<Real>& s, Real threshold = Real(0)) {
  std::string out;
  char line[128];
  for (TwoSpin spins : kTwoSpinBasis) {
    for (int n = 0; n < s.fock_levels(); ++n) {
      const auto a = s.amplitude({spins, n});
      if (std::abs(a) <= threshold) continue;
      std::snprintf(line, sizeof line, "%s %d\t%.17g\t%.17g\n", short_name(spins), n,
                    static_cast<double>(a.real()), static_cast<double>(a.imag()));
      out += line;
    }
  }
  return out;
}

}  // namespace ionent
