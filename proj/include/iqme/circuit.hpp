#ifndef IQME_CIRCUIT_HPP
#define IQME_CIRCUIT_HPP

// Brick-wall circuits of random U(1)-symmetric two-qubit gates acting on a
// statevector. Qubit q is bit q of the basis index; bit value 0 is spin up
// (sigma_z = +1). Periodic boundaries.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iqme/errors.hpp"
#include "iqme/parallel.hpp"
#include "iqme/qgeom.hpp"
#include "iqme/rng.hpp"

namespace iqme::circuit {

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(int n_qubits) : n_(n_qubits), amps_(std::size_t{1} << n_qubits, Complex(0.0, 0.0)) {
    if (n_qubits < 1 || n_qubits > 24) throw ConfigurationError("qubit count must be in [1, 24]");
    amps_[0] = 1.0;
  }

  [[nodiscard]] int n_qubits() const { return n_; }
  [[nodiscard]] std::size_t size() const { return amps_.size(); }
  Complex& operator[](std::size_t i) { return amps_[i]; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }
  std::vector<Complex>& amplitudes() { return amps_; }
  [[nodiscard]] const std::vector<Complex>& amplitudes() const { return amps_; }

  [[nodiscard]] double norm() const {
    double s = 0.0;
    for (const Complex& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  /// <Q> with Q = sum_i sigma_z^i.
  [[nodiscard]] double charge() const {
    double q = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i) {
      const int down = std::popcount(static_cast<std::uint64_t>(i));
      q += std::norm(amps_[i]) * (n_ - 2 * down);
    }
    return q;
  }

 private:
  int n_ = 0;
  std::vector<Complex> amps_;
};

/// Two-qubit gate commuting with sigma_z (x) I + I (x) sigma_z.
struct SymGate {
  Complex phase_up{1.0, 0.0};             // |up up>
  Eigen::Matrix2cd mid = Eigen::Matrix2cd::Identity();  // {|up down>, |down up>}
  Complex phase_down{1.0, 0.0};           // |down down>

  static SymGate identity() { return {}; }

  /// 4x4 matrix in the basis (up up, up down, down up, down down) of (q_a, q_b).
  [[nodiscard]] Eigen::Matrix4cd matrix() const {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(0, 0) = phase_up;
    m.block<2, 2>(1, 1) = mid;
    m(3, 3) = phase_down;
    return m;
  }
};

/// Charge operator of a pair in the same basis as SymGate::matrix().
inline Eigen::Matrix4cd pair_charge() {
  Eigen::Matrix4cd q = Eigen::Matrix4cd::Zero();
  q(0, 0) = 2.0;
  q(3, 3) = -2.0;
  return q;
}

/// Haar-random unitary of size 1 or 2. The 2x2 case orthonormalizes the
/// columns of a complex Gaussian matrix (Gram-Schmidt, i.e. QR with a
/// positive diagonal in R), which is exactly Haar distributed.
inline CMatrix haar_unitary(int n, CounterRng& rng) {
  if (n == 1) {
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    CMatrix u(1, 1);
    u(0, 0) = std::polar(1.0, phi);
    return u;
  }
  if (n != 2) throw ConfigurationError("haar_unitary supports n = 1 or 2");
  CMatrix g(2, 2);
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 2; ++r) g(r, c) = Complex(rng.normal(), rng.normal()) * std::sqrt(0.5);
  CMatrix q(2, 2);
  q.col(0) = g.col(0) / g.col(0).norm();
  CVector v = g.col(1) - q.col(0) * q.col(0).dot(g.col(1));
  q.col(1) = v / v.norm();
  // One re-orthogonalization pass keeps U^+U = I at the 1e-15 level.
  v = q.col(1) - q.col(0) * q.col(0).dot(q.col(1));
  q.col(1) = v / v.norm();
  return q;
}

inline SymGate sample_gate(CounterRng& rng) {
  SymGate g;
  g.phase_up = haar_unitary(1, rng)(0, 0);
  g.mid = haar_unitary(2, rng);
  g.phase_down = haar_unitary(1, rng)(0, 0);
  return g;
}

/// In-place application on qubits (q_a, q_b); q_a is the first tensor factor.
inline void apply_gate(StateVector& psi, const SymGate& g, int q_a, int q_b) {
  const int n = psi.n_qubits();
  if (q_a < 0 || q_b < 0 || q_a >= n || q_b >= n) throw std::out_of_range("qubit index out of range");
  if (q_a == q_b) throw std::invalid_argument("gate needs two distinct qubits");
  const std::size_t ba = std::size_t{1} << q_a;
  const std::size_t bb = std::size_t{1} << q_b;
  const Complex m00 = g.mid(0, 0), m01 = g.mid(0, 1), m10 = g.mid(1, 0), m11 = g.mid(1, 1);
  auto& amp = psi.amplitudes();
  for (std::size_t i = 0; i < amp.size(); ++i) {
    if (i & (ba | bb)) continue;
    const std::size_t i_ud = i | bb;  // q_a up, q_b down
    const std::size_t i_du = i | ba;
    const std::size_t i_dd = i | ba | bb;
    amp[i] *= g.phase_up;
    const Complex ud = amp[i_ud];
    const Complex du = amp[i_du];
    amp[i_ud] = m00 * ud + m01 * du;
    amp[i_du] = m10 * ud + m11 * du;
    amp[i_dd] *= g.phase_down;
  }
}

enum class Family { Neel, Ferro, FerroDomainWall };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Neel: return "neel";
    case Family::Ferro: return "ferro";
    case Family::FerroDomainWall: return "ferro_domain_wall";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  if (s == "neel") return Family::Neel;
  if (s == "ferro") return Family::Ferro;
  if (s == "ferro_domain_wall" || s == "ferro-domain-wall") return Family::FerroDomainWall;
  throw std::invalid_argument("unknown initial-state family '" + std::string(s) + "'");
}

/// Whether qubit q starts down in the untilted reference state.
inline bool reference_down(Family f, int q, int n) {
  switch (f) {
    case Family::Neel: return q % 2 == 1;
    case Family::Ferro: return false;
    case Family::FerroDomainWall: return q >= n / 2;
  }
  return false;
}

/// exp(-i theta/2 sum_i sigma_y^i) applied to the reference product state.
inline StateVector initial_state(Family family, double theta, int n_qubits) {
  if (n_qubits < 2 || n_qubits % 2 != 0) throw ConfigurationError("qubit count must be even and at least 2");
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  std::vector<Complex> amps{Complex(1.0, 0.0)};
  for (int q = 0; q < n_qubits; ++q) {
    // Rotated |up> = c|up> + s|down>; rotated |down> = -s|up> + c|down>.
    const bool down = reference_down(family, q, n_qubits);
    const double up_amp = down ? -s : c;
    const double down_amp = down ? c : s;
    std::vector<Complex> next(amps.size() * 2);
    for (std::size_t i = 0; i < amps.size(); ++i) {
      next[i] = amps[i] * up_amp;
      next[i + amps.size()] = amps[i] * down_amp;
    }
    amps = std::move(next);
  }
  StateVector psi(n_qubits);
  psi.amplitudes() = std::move(amps);
  return psi;
}

/// Contiguous block of qubits [first, first + count).
struct Subsystem {
  int first = 0;
  int count = 1;
};

/// Partial trace over the complement; local bit k is qubit first + k.
inline DensityMatrix reduce(const StateVector& psi, Subsystem sub) {
  const int n = psi.n_qubits();
  if (sub.count < 1 || sub.first < 0 || sub.first + sub.count > n) throw std::out_of_range("subsystem outside the register");
  const std::size_t dim = std::size_t{1} << sub.count;
  const std::size_t env = psi.size() / dim;
  const std::size_t low_mask = (std::size_t{1} << sub.first) - 1;
  CMatrix m(dim, env);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const std::size_t local = (i >> sub.first) & (dim - 1);
    const std::size_t rest = (i & low_mask) | ((i >> (sub.first + sub.count)) << sub.first);
    m(local, rest) = psi[i];
  }
  CMatrix rho = m * m.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

enum class SubsystemChoice { Single, Quarter };

struct CircuitConfig {
  int n_qubits = 16;
  double theta = 0.5 * std::numbers::pi;
  Family family = Family::Neel;
  SubsystemChoice subsystem = SubsystemChoice::Single;
  int subsystem_first = 0;
  MetricKind metric = MetricKind::SLD;
  int horizon = 20;
  int n_trajectories = 10000;
  std::uint64_t master_seed = 0;

  [[nodiscard]] Subsystem region() const {
    return {subsystem_first, subsystem == SubsystemChoice::Single ? 1 : n_qubits / 4};
  }

  void validate() const {
    if (n_qubits < 2 || n_qubits % 2 != 0) throw ConfigurationError("qubit count must be even and at least 2");
    if (n_qubits > 24) throw ConfigurationError("qubit count above 24 is not supported");
    if (subsystem == SubsystemChoice::Quarter && n_qubits % 4 != 0)
      throw ConfigurationError("a quarter subsystem needs N divisible by 4");
    if (horizon < 1) throw ConfigurationError("horizon must be at least one step");
    if (n_trajectories < 1) throw ConfigurationError("need at least one trajectory");
    if (metric == MetricKind::HM) throw UnsupportedMetricError("circuit lengths need a geodesic; HM has none");
    const Subsystem r = region();
    if (r.first < 0 || r.first + r.count > n_qubits) throw ConfigurationError("subsystem outside the register");
  }
};

/// One time step = even layer on (2i, 2i+1) then odd layer on (2i+1, 2i+2 mod N).
/// Gates are drawn from the stream keyed by (seed, trajectory, layer, pair).
inline void apply_step(StateVector& psi, int step, std::uint64_t seed, std::uint64_t traj) {
  const int n = psi.n_qubits();
  for (int parity = 0; parity < 2; ++parity) {
    const std::uint64_t layer = 2 * static_cast<std::uint64_t>(step) + parity;
    for (int i = 0; i < n / 2; ++i) {
      CounterRng rng(seed, traj, layer, static_cast<std::uint64_t>(i));
      const SymGate g = sample_gate(rng);
      const int a = 2 * i + parity;
      apply_gate(psi, g, a, (a + 1) % n);
    }
  }
}

struct TrajectoryResult {
  std::vector<DensityMatrix> rdms;  // t = 0 .. horizon
  std::vector<double> ell;          // discretized length at each step
};

/// l(t_j) = 1/2 sum_{i<j} D_geo(rho(t_{i+1}), rho(t_i)).
inline TrajectoryResult run_trajectory(const CircuitConfig& cfg, std::uint64_t traj) {
  cfg.validate();
  StateVector psi = initial_state(cfg.family, cfg.theta, cfg.n_qubits);
  const Subsystem sub = cfg.region();
  TrajectoryResult out;
  out.rdms.reserve(cfg.horizon + 1);
  out.ell.reserve(cfg.horizon + 1);
  out.rdms.push_back(reduce(psi, sub));
  out.ell.push_back(0.0);
  for (int t = 0; t < cfg.horizon; ++t) {
    apply_step(psi, t, cfg.master_seed, traj);
    out.rdms.push_back(reduce(psi, sub));
    const std::size_t j = out.rdms.size() - 1;
    out.ell.push_back(out.ell.back() + 0.5 * geodesic_distance(out.rdms[j], out.rdms[j - 1], cfg.metric));
  }
  return out;
}

/// Reduced equilibrium state exp(-lambda Q) restricted to k sites, tanh lambda = -cos theta.
/// At theta = 0 lambda diverges; the pure all-up projector is returned and *warning set.
inline DensityMatrix equilibrium_rdm(double theta, int k, bool* warning = nullptr) {
  if (k < 1 || k > 12) throw ConfigurationError("equilibrium subsystem size must be in [1, 12]");
  const double mz = std::cos(theta);
  const bool degenerate = std::abs(1.0 - std::abs(mz)) < 1e-15;
  if (warning) *warning = degenerate;
  const double up = degenerate ? (mz > 0 ? 1.0 : 0.0) : 0.5 * (1.0 + mz);
  const double down = 1.0 - up;
  const std::size_t dim = std::size_t{1} << k;
  CMatrix rho = CMatrix::Zero(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const int downs = std::popcount(static_cast<std::uint64_t>(i));
    rho(i, i) = std::pow(up, k - downs) * std::pow(down, downs);
  }
  return DensityMatrix(std::move(rho));
}

/// Equilibrium of the subsystem for a given initial family: the tilted Neel
/// and domain-wall states sit at half filling, so their equilibrium is maximally mixed.
inline DensityMatrix equilibrium_for(Family family, double theta, int k) {
  if (family == Family::Ferro) return equilibrium_rdm(theta, k);
  return DensityMatrix::maximally_mixed(1 << k);
}

struct AveragedCurve {
  std::vector<int> times;
  std::vector<double> mean_ell;
  std::vector<double> std_err;
  double mean_total = 0.0;
  std::vector<double> residue;
  std::vector<double> residue_std_err;  // spread of per-trajectory L - l(t)
  bool converged = false;
  double final_distance = 0.0;          // mean arccos F(rho_M(horizon), rho_eq)
  double final_distance_std_err = 0.0;
  CMatrix mean_final_rdm;               // trajectory average of rho_M(horizon)
  int n_trajectories = 0;
};

inline bool convergence_check(const AveragedCurve& c, int window = 5, double slope_tol = 0.005) {
  const int n = static_cast<int>(c.mean_ell.size());
  if (window < 1 || n < window + 1) throw ConfigurationError("convergence check needs at least window + 1 samples");
  double st = 0, sy = 0, stt = 0, sty = 0;
  const int m = window + 1;
  for (int i = n - m; i < n; ++i) {
    const double t = c.times.empty() ? i : c.times[i];
    st += t;
    sy += c.mean_ell[i];
    stt += t * t;
    sty += t * c.mean_ell[i];
  }
  const double slope = (m * sty - st * sy) / (m * stt - st * st);
  return slope <= slope_tol;
}

namespace detail {
inline void mean_and_error(const std::vector<double>& v, double& mean, double& err) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  err = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}
}  // namespace detail

/// Averages per-trajectory lengths (not the length of the averaged path).
inline AveragedCurve average_curves(const CircuitConfig& cfg) {
  cfg.validate();
  const int h = cfg.horizon;
  const std::size_t n = static_cast<std::size_t>(cfg.n_trajectories);
  const Subsystem sub = cfg.region();
  const DensityMatrix eq = equilibrium_for(cfg.family, cfg.theta, sub.count);
  std::vector<std::vector<double>> ells(n);
  std::vector<double> final_dist(n);
  std::vector<CMatrix> finals(n);
  parallel_for(n, [&](std::size_t k) {
    TrajectoryResult r = run_trajectory(cfg, k);
    final_dist[k] = std::acos(uhlmann_fidelity(r.rdms.back(), eq));
    finals[k] = r.rdms.back().matrix();
    ells[k] = std::move(r.ell);
  });

  AveragedCurve c;
  c.n_trajectories = cfg.n_trajectories;
  c.times.resize(h + 1);
  c.mean_ell.resize(h + 1);
  c.std_err.resize(h + 1);
  c.residue.resize(h + 1);
  c.residue_std_err.resize(h + 1);
  std::vector<double> column(n);
  for (int t = 0; t <= h; ++t) {
    c.times[t] = t;
    for (std::size_t k = 0; k < n; ++k) column[k] = ells[k][t];
    detail::mean_and_error(column, c.mean_ell[t], c.std_err[t]);
    double unused = 0.0;
    for (std::size_t k = 0; k < n; ++k) column[k] = ells[k][h] - ells[k][t];
    detail::mean_and_error(column, unused, c.residue_std_err[t]);
  }
  c.mean_total = c.mean_ell[h];
  for (int t = 0; t <= h; ++t) c.residue[t] = c.mean_total - c.mean_ell[t];
  detail::mean_and_error(final_dist, c.final_distance, c.final_distance_std_err);
  c.mean_final_rdm = CMatrix::Zero(finals[0].rows(), finals[0].cols());
  for (const CMatrix& m : finals) c.mean_final_rdm += m;
  c.mean_final_rdm /= static_cast<double>(n);
  c.converged = h >= 5 ? convergence_check(c) : false;
  return c;
}

}  // namespace iqme::circuit

#endif  // IQME_CIRCUIT_HPP
