#ifndef IQME_QGEOM_HPP
#define IQME_QGEOM_HPP

// Information geometry on finite-dimensional density matrices: Petz monotone
// metric speeds, Uhlmann fidelity, quantum affinity and the closed-form
// geodesic distances of the Bures (SLD) and Wigner-Yanase metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

#include "iqme/errors.hpp"

namespace iqme {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Tolerance for Hermiticity, unit trace and negative-eigenvalue clipping.
inline constexpr double kStateTolerance = 1e-10;
/// Eigenpairs with p_i + p_j below this are dropped from the speed sum.
inline constexpr double kEigenvalueFloor = 1e-12;
/// Smallest eigenvalue at which the harmonic-mean metric is evaluated.
inline constexpr double kHarmonicMinEigenvalue = 1e-9;

/// Selects the matrix-monotone function of a Petz metric.
enum class MetricKind { SLD, HM, WY };

inline std::string_view to_string(MetricKind m) {
  switch (m) {
    case MetricKind::SLD: return "sld";
    case MetricKind::HM: return "hm";
    case MetricKind::WY: return "wy";
  }
  return "?";
}

inline MetricKind parse_metric(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "sld" || s == "bures") return MetricKind::SLD;
  if (s == "hm") return MetricKind::HM;
  if (s == "wy") return MetricKind::WY;
  throw std::invalid_argument("unknown metric '" + std::string(text) + "' (expected sld, hm or wy)");
}

/// f(x) of the metric: SLD (x+1)/2, HM 2x/(x+1), WY (1+sqrt x)^2/4.
inline double monotone_function(MetricKind m, double x) {
  switch (m) {
    case MetricKind::SLD: return (x + 1.0) / 2.0;
    case MetricKind::HM: return 2.0 * x / (x + 1.0);
    case MetricKind::WY: {
      const double s = 1.0 + std::sqrt(x);
      return s * s / 4.0;
    }
  }
  return 0.0;
}

/// Weight multiplying |<i|X|j>|^2 in the eigenbasis sum, 1 / (p_j f(p_i/p_j)).
inline double petz_weight(MetricKind m, double pi, double pj) {
  switch (m) {
    case MetricKind::SLD: return 2.0 / (pi + pj);
    case MetricKind::HM: return (pi + pj) / (2.0 * pi * pj);
    case MetricKind::WY: {
      const double s = std::sqrt(pi) + std::sqrt(pj);
      return 4.0 / (s * s);
    }
  }
  return 0.0;
}

/// Real 3-vector r of a qubit state rho = (I + r.sigma) / 2.
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] double dot(const BlochVector& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] double norm2() const { return dot(*this); }
  [[nodiscard]] double norm() const { return std::sqrt(norm2()); }

  friend BlochVector operator+(const BlochVector& a, const BlochVector& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend BlochVector operator-(const BlochVector& a, const BlochVector& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend BlochVector operator*(double s, const BlochVector& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const BlochVector&, const BlochVector&) = default;
};

namespace pauli {
inline CMatrix x() {
  CMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}
inline CMatrix y() {
  CMatrix m(2, 2);
  m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return m;
}
inline CMatrix z() {
  CMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}
}  // namespace pauli

/// Eigenvalues (descending) and matching orthonormal eigenvector columns.
struct Spectrum {
  Eigen::VectorXd values;
  CMatrix vectors;
};

namespace detail {

inline double hermitian_defect(const CMatrix& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

inline Spectrum hermitian_spectrum(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  if (es.info() != Eigen::Success) throw InvalidStateError("eigendecomposition did not converge");
  const Eigen::Index n = m.rows();
  Spectrum s{Eigen::VectorXd(n), CMatrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    s.values(k) = es.eigenvalues()(n - 1 - k);
    s.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return s;
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Hermitian, positive-semidefinite, unit-trace matrix. The spectrum is
/// computed once at construction; small negative eigenvalues (down to
/// -1e-10) are clipped to zero and the trace is renormalized.
class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols()) throw InvalidStateError("density matrix must be square and non-empty");
    const double defect = detail::hermitian_defect(m_);
    if (defect > kStateTolerance)
      throw InvalidStateError("matrix is not Hermitian (defect " + detail::format_value(defect) + ")");
    m_ = (0.5 * (m_ + m_.adjoint())).eval();
    const double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > kStateTolerance)
      throw InvalidStateError("trace is " + detail::format_value(tr) + ", expected 1");
    spectrum_ = detail::hermitian_spectrum(m_);
    const double lowest = spectrum_.values.minCoeff();
    if (lowest < -kStateTolerance)
      throw InvalidStateError("negative eigenvalue " + detail::format_value(lowest));
    if (lowest < 0.0) {
      spectrum_.values = spectrum_.values.cwiseMax(0.0);
      m_ = spectrum_.vectors * spectrum_.values.cast<Complex>().asDiagonal() * spectrum_.vectors.adjoint();
    }
    const double norm = m_.trace().real();
    if (norm != 1.0) {
      m_ /= norm;
      spectrum_.values /= norm;
    }
    spectrum_.values = spectrum_.values.cwiseMin(1.0);
  }

  static DensityMatrix maximally_mixed(int dim) {
    return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  static DensityMatrix pure(const CVector& psi) {
    const CVector unit = psi / psi.norm();
    return DensityMatrix(unit * unit.adjoint());
  }

  [[nodiscard]] int dim() const { return static_cast<int>(m_.rows()); }
  [[nodiscard]] const CMatrix& matrix() const { return m_; }
  [[nodiscard]] const Spectrum& spectrum() const { return spectrum_; }
  [[nodiscard]] double min_eigenvalue() const { return spectrum_.values(dim() - 1); }
  [[nodiscard]] Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  CMatrix m_;
  Spectrum spectrum_;
};

/// Hermitian, traceless velocity d(rho)/dt.
class TangentOperator {
 public:
  explicit TangentOperator(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() == 0 || m_.rows() != m_.cols()) throw InvalidStateError("tangent operator must be square");
    const double defect = detail::hermitian_defect(m_);
    if (defect > kStateTolerance)
      throw InvalidStateError("tangent operator is not Hermitian (defect " + detail::format_value(defect) + ")");
    m_ = (0.5 * (m_ + m_.adjoint())).eval();
    const double tr = std::abs(m_.trace());
    if (tr > kStateTolerance) throw InvalidStateError("tangent operator has trace " + detail::format_value(tr));
  }

  /// (rdot . sigma) / 2, the velocity of a qubit moving with Bloch velocity rdot.
  static TangentOperator from_bloch(const BlochVector& rdot) {
    return TangentOperator(0.5 * (rdot.x * pauli::x() + rdot.y * pauli::y() + rdot.z * pauli::z()));
  }

  [[nodiscard]] int dim() const { return static_cast<int>(m_.rows()); }
  [[nodiscard]] const CMatrix& matrix() const { return m_; }

 private:
  CMatrix m_;
};

inline Spectrum spectral_decompose(const DensityMatrix& rho) { return rho.spectrum(); }

/// D(rho, X) = sum_{p_i + p_j > eps} |<i|X|j>|^2 w_f(p_i, p_j).
inline double petz_speed(const DensityMatrix& rho, const TangentOperator& xdot, MetricKind metric) {
  if (rho.dim() != xdot.dim()) throw InvalidStateError("state and tangent operator dimensions differ");
  const Spectrum& s = rho.spectrum();
  if (metric == MetricKind::HM && rho.min_eigenvalue() < kHarmonicMinEigenvalue)
    throw DomainError("HM metric needs a strictly mixed state; minimum eigenvalue is " +
                      detail::format_value(rho.min_eigenvalue()));
  const CMatrix xe = s.vectors.adjoint() * xdot.matrix() * s.vectors;
  double total = 0.0;
  for (int i = 0; i < rho.dim(); ++i) {
    for (int j = 0; j < rho.dim(); ++j) {
      const double pi = s.values(i);
      const double pj = s.values(j);
      if (pi + pj <= kEigenvalueFloor) continue;
      total += std::norm(xe(i, j)) * petz_weight(metric, pi, pj);
    }
  }
  return std::max(total, 0.0);
}

/// Closed-form qubit speed. a = component of rdot along r, b = perpendicular
/// magnitude: SLD a^2/(1-r^2) + b^2, HM (a^2+b^2)/(1-r^2),
/// WY a^2/(1-r^2) + 2 b^2 / (1 + sqrt(1-r^2)).
inline double qubit_speed_closed_form(const BlochVector& r, const BlochVector& rdot, MetricKind metric) {
  const double n2 = r.norm2();
  if (n2 >= 1.0) throw DomainError("closed-form qubit speed needs |r| < 1, got " + detail::format_value(std::sqrt(n2)));
  const double v2 = rdot.norm2();
  double a2 = 0.0;
  if (n2 > 0.0) {
    const double a = r.dot(rdot);
    a2 = a * a / n2;
  }
  const double b2 = std::max(v2 - a2, 0.0);
  const double mixed = 1.0 - n2;
  switch (metric) {
    case MetricKind::SLD: return a2 / mixed + b2;
    case MetricKind::HM: return (a2 + b2) / mixed;
    case MetricKind::WY: return a2 / mixed + 2.0 * b2 / (1.0 + std::sqrt(mixed));
  }
  return 0.0;
}

inline CMatrix matrix_sqrt(const DensityMatrix& rho) {
  const Spectrum& s = rho.spectrum();
  const Eigen::VectorXd roots = s.values.cwiseMax(0.0).cwiseSqrt();
  return s.vectors * roots.cast<Complex>().asDiagonal() * s.vectors.adjoint();
}

/// Tr sqrt(sqrt(rho) sigma sqrt(rho)) through Hermitian eigendecompositions.
inline double fidelity_general(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw InvalidStateError("fidelity of states with different dimensions");
  const CMatrix root = matrix_sqrt(rho);
  CMatrix inner = root * sigma.matrix() * root;
  inner = (0.5 * (inner + inner.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(inner, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) total += std::sqrt(std::max(es.eigenvalues()(k), 0.0));
  return std::clamp(total, 0.0, 1.0);
}

/// Qubit fast path: sqrt(Tr(rho sigma) + 2 sqrt(det rho det sigma)).
inline double fidelity_qubit(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != 2 || sigma.dim() != 2) throw InvalidStateError("qubit fidelity needs 2x2 states");
  const double overlap = (rho.matrix() * sigma.matrix()).trace().real();
  const double det_r = std::max(rho.matrix().determinant().real(), 0.0);
  const double det_s = std::max(sigma.matrix().determinant().real(), 0.0);
  return std::clamp(std::sqrt(std::max(overlap + 2.0 * std::sqrt(det_r * det_s), 0.0)), 0.0, 1.0);
}

/// Fidelity of two qubit states given by Bloch vectors.
inline double qubit_fidelity(const BlochVector& a, const BlochVector& b) {
  const double ma = std::sqrt(std::max(1.0 - a.norm2(), 0.0));
  const double mb = std::sqrt(std::max(1.0 - b.norm2(), 0.0));
  return std::clamp(std::sqrt(std::max(0.5 * (1.0 + a.dot(b) + ma * mb), 0.0)), 0.0, 1.0);
}

/// Qubit affinity from Bloch vectors, writing sqrt(rho) = alpha I + beta r_hat.sigma.
inline double qubit_affinity(const BlochVector& a, const BlochVector& b) {
  auto root = [](const BlochVector& r, double& alpha, double& beta, BlochVector& dir) {
    const double n = std::min(r.norm(), 1.0);
    const double up = std::sqrt(0.5 * (1.0 + n));
    const double down = std::sqrt(0.5 * (1.0 - n));
    alpha = 0.5 * (up + down);
    beta = 0.5 * (up - down);
    dir = n > 0.0 ? (1.0 / r.norm()) * r : BlochVector{};
  };
  double aa, ba, ab, bb;
  BlochVector da, db;
  root(a, aa, ba, da);
  root(b, ab, bb, db);
  return std::clamp(2.0 * (aa * ab + ba * bb * da.dot(db)), 0.0, 1.0);
}

inline double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw InvalidStateError("fidelity of states with different dimensions");
  if (rho.dim() == 2) return fidelity_qubit(rho, sigma);
  return fidelity_general(rho, sigma);
}

/// Quantum affinity Tr(sqrt(rho) sqrt(sigma)).
inline double affinity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw InvalidStateError("affinity of states with different dimensions");
  const double a = (matrix_sqrt(rho) * matrix_sqrt(sigma)).trace().real();
  return std::clamp(a, 0.0, 1.0);
}

/// Geodesic distance: SLD 2 arccos F, WY 2 arccos A. HM has no closed form.
inline double geodesic_distance(const DensityMatrix& rho, const DensityMatrix& sigma, MetricKind metric) {
  switch (metric) {
    case MetricKind::SLD: return 2.0 * std::acos(uhlmann_fidelity(rho, sigma));
    case MetricKind::WY: return 2.0 * std::acos(affinity(rho, sigma));
    case MetricKind::HM: break;
  }
  throw UnsupportedMetricError("no closed-form geodesic distance for the HM metric");
}

inline DensityMatrix bloch_to_density(const BlochVector& r) {
  if (r.norm() > 1.0 + 1e-12) throw DomainError("Bloch vector outside the unit ball, |r| = " + detail::format_value(r.norm()));
  CMatrix m(2, 2);
  m << 0.5 * (1.0 + r.z), Complex(0.5 * r.x, -0.5 * r.y), Complex(0.5 * r.x, 0.5 * r.y), 0.5 * (1.0 - r.z);
  return DensityMatrix(std::move(m));
}

inline BlochVector density_to_bloch(const DensityMatrix& rho) {
  if (rho.dim() != 2) throw InvalidStateError("Bloch vector needs a 2x2 state");
  const Complex off = rho(0, 1);
  return {2.0 * off.real(), -2.0 * off.imag(), (rho(0, 0) - rho(1, 1)).real()};
}

}  // namespace iqme

#endif  // IQME_QGEOM_HPP
