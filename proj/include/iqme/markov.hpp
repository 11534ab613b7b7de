#ifndef IQME_MARKOV_HPP
#define IQME_MARKOV_HPP

// Single-qubit Lindblad engine. Time is dimensionless (tau = gamma t). The
// generator is a rotation about x plus amplitude decay towards a pole of the
// z axis plus dephasing in the same basis; a ModelInterpretation fixes how
// (alpha, gamma') map onto those rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iqme/errors.hpp"
#include "iqme/parallel.hpp"
#include "iqme/qgeom.hpp"

namespace iqme::markov {

/// How alpha splits into (decay rate, dephasing rate).
enum class RateRule {
  Literal,        // (alpha, 1 - alpha)
  Magnitude,      // (alpha, |1 - alpha|)
  Percent,        // (alpha / 100, 1 - alpha / 100)
  UnitDephasing,  // (alpha, 1)
};

/// Angular frequency of the x rotation in units of 1/gamma'.
enum class HamiltonianScale {
  Inverse,      // 1 / gamma'
  HalfInverse,  // 1 / (2 gamma')
  Off,          // no rotation; test hook, never part of the calibration grid
};

inline std::string_view to_string(RateRule r) {
  switch (r) {
    case RateRule::Literal: return "literal";
    case RateRule::Magnitude: return "magnitude";
    case RateRule::Percent: return "percent";
    case RateRule::UnitDephasing: return "unit_dephasing";
  }
  return "?";
}

inline std::string_view to_string(HamiltonianScale s) {
  switch (s) {
    case HamiltonianScale::Inverse: return "inverse";
    case HamiltonianScale::HalfInverse: return "half_inverse";
    case HamiltonianScale::Off: return "off";
  }
  return "?";
}

struct ModelInterpretation {
  RateRule rule = RateRule::Magnitude;
  int rotation_sign = 1;
  int decay_pole = 1;  // Bloch z of the decay target
  HamiltonianScale scale = HamiltonianScale::Inverse;

  /// "rule/sign/pole/scale", e.g. "magnitude/-1/-1/half_inverse".
  [[nodiscard]] std::string label() const {
    auto sgn = [](int v) { return v > 0 ? std::string("+1") : std::string("-1"); };
    return std::string(to_string(rule)) + "/" + sgn(rotation_sign) + "/" + sgn(decay_pole) + "/" +
           std::string(to_string(scale));
  }

  static ModelInterpretation parse(std::string_view text) {
    std::array<std::string, 4> parts;
    std::size_t k = 0;
    for (char c : text) {
      if (c == '/') {
        if (++k == parts.size()) break;
      } else {
        parts[k].push_back(c);
      }
    }
    if (k != 3) throw std::invalid_argument("interpretation must look like rule/sign/pole/scale: " + std::string(text));
    ModelInterpretation m;
    if (parts[0] == "literal") m.rule = RateRule::Literal;
    else if (parts[0] == "magnitude") m.rule = RateRule::Magnitude;
    else if (parts[0] == "percent") m.rule = RateRule::Percent;
    else if (parts[0] == "unit_dephasing") m.rule = RateRule::UnitDephasing;
    else throw std::invalid_argument("unknown rate rule '" + parts[0] + "'");
    auto sign = [&](const std::string& s) {
      if (s == "+1" || s == "1") return 1;
      if (s == "-1") return -1;
      throw std::invalid_argument("sign must be +1 or -1, got '" + s + "'");
    };
    m.rotation_sign = sign(parts[1]);
    m.decay_pole = sign(parts[2]);
    if (parts[3] == "inverse") m.scale = HamiltonianScale::Inverse;
    else if (parts[3] == "half_inverse") m.scale = HamiltonianScale::HalfInverse;
    else if (parts[3] == "off") m.scale = HamiltonianScale::Off;
    else throw std::invalid_argument("unknown Hamiltonian scale '" + parts[3] + "'");
    return m;
  }

  friend bool operator==(const ModelInterpretation&, const ModelInterpretation&) = default;
};

/// The 32 candidates in lexicographic order (rule, sign +/-, pole +/-, scale).
inline std::vector<ModelInterpretation> interpretation_grid() {
  std::vector<ModelInterpretation> grid;
  for (RateRule rule : {RateRule::Literal, RateRule::Magnitude, RateRule::Percent, RateRule::UnitDephasing})
    for (int sign : {1, -1})
      for (int pole : {1, -1})
        for (HamiltonianScale scale : {HamiltonianScale::Inverse, HamiltonianScale::HalfInverse})
          grid.push_back({rule, sign, pole, scale});
  return grid;
}

struct MarkovParams {
  double alpha = 100.0;
  double gamma_prime = 0.94;
  ModelInterpretation interpretation{};

  void validate() const {
    if (!(gamma_prime > 0.0)) throw ConfigurationError("gamma' must be positive");
    if (!(alpha >= 0.0)) throw ConfigurationError("alpha must be non-negative");
  }
};

/// Bloch-form rates. Transverse components relax at (decay + dephasing)/2,
/// the z component relaxes at `decay` towards `pole`.
struct EffectiveRates {
  double decay = 0.0;
  double dephasing = 0.0;
  double omega = 0.0;
  double pole = 1.0;

  [[nodiscard]] double transverse() const { return 0.5 * (decay + dephasing); }
  [[nodiscard]] double longitudinal() const { return decay; }
  /// Upper bound on the spectral radius of the linear Bloch generator.
  [[nodiscard]] double stiffness() const {
    return std::max(std::abs(transverse()), std::abs(longitudinal())) + std::abs(omega);
  }
};

/// Rates implied by the interpretation; may be negative (see require_physical_rates).
inline EffectiveRates effective_rates(const MarkovParams& p) {
  p.validate();
  const ModelInterpretation& m = p.interpretation;
  EffectiveRates r;
  switch (m.rule) {
    case RateRule::Literal:
      r.decay = p.alpha;
      r.dephasing = 1.0 - p.alpha;
      break;
    case RateRule::Magnitude:
      r.decay = p.alpha;
      r.dephasing = std::abs(1.0 - p.alpha);
      break;
    case RateRule::Percent:
      r.decay = p.alpha / 100.0;
      r.dephasing = 1.0 - p.alpha / 100.0;
      break;
    case RateRule::UnitDephasing:
      r.decay = p.alpha;
      r.dephasing = 1.0;
      break;
  }
  double scale = 0.0;
  switch (m.scale) {
    case HamiltonianScale::Inverse: scale = 1.0 / p.gamma_prime; break;
    case HamiltonianScale::HalfInverse: scale = 0.5 / p.gamma_prime; break;
    case HamiltonianScale::Off: scale = 0.0; break;
  }
  r.omega = m.rotation_sign * scale;
  r.pole = m.decay_pole;
  return r;
}

inline const EffectiveRates& require_physical_rates(const EffectiveRates& r) {
  if (r.decay < 0.0 || r.dephasing < 0.0)
    throw ConfigurationError("interpretation yields a negative rate (decay " + iqme::detail::format_value(r.decay) +
                             ", dephasing " + iqme::detail::format_value(r.dephasing) + ")");
  return r;
}

namespace detail {
inline BlochVector rhs_unchecked(const BlochVector& r, const EffectiveRates& k) {
  const double gt = k.transverse();
  return {-gt * r.x, -k.omega * r.z - gt * r.y, k.omega * r.y - k.longitudinal() * (r.z - k.pole)};
}
}  // namespace detail

/// dr/dtau. The x component obeys xdot = -Gamma_T x independently of (y, z).
inline BlochVector bloch_rhs(const BlochVector& r, const MarkovParams& p) {
  if (r.norm() > 1.0 + 1e-9) throw DomainError("Bloch vector outside the unit ball");
  return detail::rhs_unchecked(r, require_physical_rates(effective_rates(p)));
}

/// Full matrix Lindbladian -i[H, rho] + G_d A_decay[rho] + G_p A_deph[rho] with
/// H = (omega/2) sigma_x, A_O[rho] = O rho O^+ - {O^+ O, rho}/2.
inline TangentOperator matrix_rhs(const DensityMatrix& rho, const MarkovParams& p) {
  if (rho.dim() != 2) throw InvalidStateError("qubit Lindbladian needs a 2x2 state");
  const EffectiveRates k = require_physical_rates(effective_rates(p));
  // Basis index of the decay target: |0> has sigma_z = +1.
  const int target = k.pole > 0 ? 0 : 1;
  const int source = 1 - target;
  CMatrix jump = CMatrix::Zero(2, 2);
  jump(target, source) = 1.0;
  CMatrix projector = CMatrix::Zero(2, 2);
  projector(target, target) = 1.0;
  auto dissipator = [&](const CMatrix& op) {
    const CMatrix& r = rho.matrix();
    const CMatrix n = op.adjoint() * op;
    return CMatrix(op * r * op.adjoint() - 0.5 * (n * r + r * n));
  };
  const CMatrix h = 0.5 * k.omega * pauli::x();
  const Complex i(0.0, 1.0);
  CMatrix out = -i * (h * rho.matrix() - rho.matrix() * h);
  out += k.decay * dissipator(jump) + k.dephasing * dissipator(projector);
  return TangentOperator(std::move(out));
}

/// Analytic fixed point: x = 0 and (y, z) from the 2x2 linear system.
inline BlochVector steady_state(const MarkovParams& p) {
  const EffectiveRates k = effective_rates(p);
  const double gt = k.transverse();
  const double gl = k.longitudinal();
  // [-gt, -w; w, -gl] (y, z)^T = (0, -gl pole)^T
  const double det = gt * gl + k.omega * k.omega;
  if (std::abs(det) < 1e-300) throw ConfigurationError("fixed-point system is singular");
  const double y = -k.omega * gl * k.pole / det;
  const double z = gt * gl * k.pole / det;
  const BlochVector s{0.0, y, z};
  if (s.norm() > 1.0 + 1e-12)
    throw UnphysicalInterpretationError("steady state outside the Bloch ball, |r| = " + iqme::detail::format_value(s.norm()) +
                                        " (y = " + iqme::detail::format_value(y) + ", z = " + iqme::detail::format_value(z) + ")");
  return s;
}

struct IntegrationOptions {
  int n_steps = 1000;
  double tau_max = 30.0;
  /// Upper bound on h * stiffness; n_steps is raised until it holds.
  double max_step_stiffness = 0.02;
};

/// Number of RK4 steps actually used for the given rates: the smallest
/// multiple of n_steps that satisfies the stiffness bound, so every
/// (steps / n_steps)-th sample lies on the nominal grid.
inline int effective_step_count(const EffectiveRates& k, const IntegrationOptions& opt) {
  if (opt.n_steps < 1 || !(opt.tau_max > 0.0)) throw ConfigurationError("integration needs n_steps >= 1 and tau_max > 0");
  const double needed = std::min(std::ceil(opt.tau_max * k.stiffness() / opt.max_step_stiffness), 5.0e7);
  const int refine = std::max(1, static_cast<int>(std::ceil(needed / opt.n_steps)));
  return opt.n_steps * refine;
}

/// Fixed-step classical RK4. Calls visit(i, tau_i, r_i, rdot_i) for every
/// sample i = 0..steps. Throws InstabilityError when a sample leaves the
/// Bloch ball by more than 1e-6.
template <class Visitor>
void integrate_visit(const BlochVector& r0, const MarkovParams& p, const IntegrationOptions& opt, Visitor&& visit) {
  if (r0.norm() > 1.0 + 1e-12) throw DomainError("initial Bloch vector outside the unit ball");
  const EffectiveRates k = require_physical_rates(effective_rates(p));
  const int steps = effective_step_count(k, opt);
  const double h = opt.tau_max / steps;
  BlochVector r = r0;
  BlochVector f = detail::rhs_unchecked(r, k);
  visit(0, 0.0, r, f);
  for (int i = 1; i <= steps; ++i) {
    const BlochVector k1 = f;
    const BlochVector k2 = detail::rhs_unchecked(r + (0.5 * h) * k1, k);
    const BlochVector k3 = detail::rhs_unchecked(r + (0.5 * h) * k2, k);
    const BlochVector k4 = detail::rhs_unchecked(r + h * k3, k);
    r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (r.norm() > 1.0 + 1e-6)
      throw InstabilityError("integration left the Bloch ball at tau = " + iqme::detail::format_value(i * h) +
                             " (|r| = " + iqme::detail::format_value(r.norm()) + ")");
    f = detail::rhs_unchecked(r, k);
    visit(i, i * h, r, f);
  }
}

struct Trajectory {
  std::vector<double> times;
  std::vector<BlochVector> states;
  std::vector<BlochVector> velocities;
};

inline Trajectory integrate(const BlochVector& r0, const MarkovParams& p, const IntegrationOptions& opt = {}) {
  Trajectory t;
  const int steps = effective_step_count(effective_rates(p), opt);
  t.times.reserve(steps + 1);
  t.states.reserve(steps + 1);
  t.velocities.reserve(steps + 1);
  integrate_visit(r0, p, opt, [&](int, double tau, const BlochVector& r, const BlochVector& v) {
    t.times.push_back(tau);
    t.states.push_back(r);
    t.velocities.push_back(v);
  });
  return t;
}

/// Half the speed 1/2 sqrt(D(rho, rhodot)) of a qubit, via the closed form.
inline double half_speed(const BlochVector& r, const BlochVector& v, MetricKind metric) {
  if (metric == MetricKind::HM && 0.5 * (1.0 - r.norm()) < kHarmonicMinEigenvalue)
    throw DomainError("HM metric needs a strictly mixed state; minimum eigenvalue is " +
                      iqme::detail::format_value(0.5 * (1.0 - r.norm())));
  return 0.5 * std::sqrt(qubit_speed_closed_form(r, v, metric));
}

/// l(t_i) by composite trapezoid of 1/2 sqrt(D) over the samples.
inline std::vector<double> trajectory_length(const std::vector<BlochVector>& states,
                                             const std::vector<BlochVector>& velocities,
                                             const std::vector<double>& times, MetricKind metric) {
  if (states.size() != times.size() || velocities.size() != times.size())
    throw std::invalid_argument("trajectory_length: sequences are not aligned");
  std::vector<double> ell(times.size(), 0.0);
  if (times.empty()) return ell;
  double prev = half_speed(states[0], velocities[0], metric);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double cur = half_speed(states[i], velocities[i], metric);
    ell[i] = ell[i - 1] + 0.5 * (times[i] - times[i - 1]) * (prev + cur);
    prev = cur;
  }
  return ell;
}

inline std::vector<double> trajectory_length(const Trajectory& t, MetricKind metric) {
  return trajectory_length(t.states, t.velocities, t.times, metric);
}

/// d = 1/2 D_geo(rho(t), rho_steady) = arccos F (SLD, also used for HM) or arccos A (WY).
inline double half_geodesic(const BlochVector& a, const BlochVector& b, MetricKind metric) {
  if (metric == MetricKind::WY) return std::acos(qubit_affinity(a, b));
  return std::acos(qubit_fidelity(a, b));
}

inline std::vector<double> geodesic_curve(const std::vector<BlochVector>& states, const BlochVector& steady,
                                          MetricKind metric = MetricKind::SLD) {
  std::vector<double> d(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) d[i] = half_geodesic(states[i], steady, metric);
  return d;
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<BlochVector> states;
  std::vector<double> ell;
  std::vector<double> geo;
  double total_length = 0.0;
  std::vector<double> residue;
  MetricKind metric = MetricKind::SLD;
  MarkovParams params{};
};

inline TrajectoryRecord simulate(const BlochVector& r0, const MarkovParams& p, MetricKind metric,
                                 const IntegrationOptions& opt = {}) {
  Trajectory t = integrate(r0, p, opt);
  TrajectoryRecord rec;
  rec.ell = trajectory_length(t, metric);
  rec.geo = geodesic_curve(t.states, steady_state(p), metric);
  rec.total_length = rec.ell.back();
  rec.residue.resize(rec.ell.size());
  for (std::size_t i = 0; i < rec.ell.size(); ++i) rec.residue[i] = rec.total_length - rec.ell[i];
  rec.times = std::move(t.times);
  rec.states = std::move(t.states);
  rec.metric = metric;
  rec.params = p;
  return rec;
}

/// Total length L = l(tau_max) without storing the trajectory.
inline double total_length(const BlochVector& r0, const MarkovParams& p, MetricKind metric,
                           const IntegrationOptions& opt = {}) {
  double ell = 0.0;
  double prev_speed = 0.0;
  double prev_tau = 0.0;
  integrate_visit(r0, p, opt, [&](int i, double tau, const BlochVector& r, const BlochVector& v) {
    const double s = half_speed(r, v, metric);
    if (i > 0) ell += 0.5 * (tau - prev_tau) * (prev_speed + s);
    prev_speed = s;
    prev_tau = tau;
  });
  return ell;
}

// ---------------------------------------------------------------------------
// Calibration against published (L, d(0)) values.

struct AnchorCase {
  std::string label;
  double gamma_prime;
  BlochVector a;
  BlochVector b;
  double length_a;
  double length_b;
  double geo_a;
  double geo_b;
};

/// Four cases at alpha = 100; initial states lie in the x = 0 plane.
inline std::vector<AnchorCase> reference_anchors() {
  return {
      {"i", 0.94, {0.0, 0.5, 0.0}, {0.0, 0.0, 0.5}, 0.890, 1.046, 0.782, 1.046},
      {"ii", 0.52, {0.0, -0.95, -0.25}, {0.0, 0.0, 0.0}, 1.019, 0.781, 0.663, 0.781},
      {"iii", 0.94, {0.0, 0.9, 0.0}, {0.0, 0.0, 0.2}, 1.214, 0.885, 0.780, 0.885},
      {"iv", 0.94, {0.0, 0.0, -0.25}, {0.0, 0.5, 0.25}, 0.658, 1.013, 0.658, 0.908},
  };
}

inline constexpr double kCalibrationAcceptance = 0.01;
inline constexpr double kCalibrationFailure = 0.05;

struct CandidateResult {
  ModelInterpretation interpretation;
  bool physical = false;
  std::string reason;              // why a candidate was rejected
  std::vector<double> residuals;   // per case: L_A, L_B, d_A(0), d_B(0), computed - published
  double max_deviation = std::numeric_limits<double>::infinity();
};

struct CalibrationReport {
  double alpha = 100.0;
  std::vector<AnchorCase> anchors;
  std::vector<CandidateResult> candidates;
  std::size_t best = std::numeric_limits<std::size_t>::max();

  [[nodiscard]] bool has_winner() const { return best < candidates.size(); }
  [[nodiscard]] const CandidateResult& winner() const { return candidates.at(best); }
  [[nodiscard]] double best_deviation() const {
    return has_winner() ? winner().max_deviation : std::numeric_limits<double>::infinity();
  }
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, CalibrationReport report) : Error(what), report_(std::move(report)) {}
  [[nodiscard]] const CalibrationReport& report() const { return report_; }

 private:
  CalibrationReport report_;
};

inline CandidateResult evaluate_candidate(const ModelInterpretation& interp, const std::vector<AnchorCase>& anchors,
                                          double alpha, const IntegrationOptions& opt) {
  CandidateResult res;
  res.interpretation = interp;
  try {
    for (const AnchorCase& c : anchors) {
      MarkovParams p{alpha, c.gamma_prime, interp};
      require_physical_rates(effective_rates(p));
      const BlochVector s = steady_state(p);
      res.residuals.push_back(total_length(c.a, p, MetricKind::SLD, opt) - c.length_a);
      res.residuals.push_back(total_length(c.b, p, MetricKind::SLD, opt) - c.length_b);
      res.residuals.push_back(half_geodesic(c.a, s, MetricKind::SLD) - c.geo_a);
      res.residuals.push_back(half_geodesic(c.b, s, MetricKind::SLD) - c.geo_b);
    }
  } catch (const Error& e) {
    res.physical = false;
    res.reason = e.what();
    res.residuals.clear();
    return res;
  }
  res.physical = true;
  res.max_deviation = 0.0;
  for (double r : res.residuals) res.max_deviation = std::max(res.max_deviation, std::abs(r));
  return res;
}

/// Scores every candidate; never throws on a poor fit.
inline CalibrationReport run_calibration(const std::vector<AnchorCase>& anchors = reference_anchors(), double alpha = 100.0,
                                         const std::vector<ModelInterpretation>& grid = interpretation_grid(),
                                         const IntegrationOptions& opt = {}) {
  CalibrationReport rep;
  rep.alpha = alpha;
  rep.anchors = anchors;
  rep.candidates.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { rep.candidates[i] = evaluate_candidate(grid[i], anchors, alpha, opt); });
  for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
    const CandidateResult& c = rep.candidates[i];
    if (!c.physical) continue;
    if (!rep.has_winner() || c.max_deviation < rep.winner().max_deviation - 1e-12) rep.best = i;
  }
  return rep;
}

/// Best interpretation; CalibrationError if none is within kCalibrationFailure.
inline ModelInterpretation calibrate(const std::vector<AnchorCase>& anchors = reference_anchors(), double alpha = 100.0,
                                     const IntegrationOptions& opt = {}) {
  CalibrationReport rep = run_calibration(anchors, alpha, interpretation_grid(), opt);
  if (!rep.has_winner()) throw CalibrationError("calibration failed: no physical interpretation", std::move(rep));
  if (rep.best_deviation() > kCalibrationFailure) {
    const std::string msg = "calibration failed: best candidate " + rep.winner().interpretation.label() +
                            " deviates by " + iqme::detail::format_value(rep.best_deviation());
    throw CalibrationError(msg, std::move(rep));
  }
  return rep.winner().interpretation;
}

// ---------------------------------------------------------------------------
// Heatmap of L - d(0) over the x = 0 disk.

struct MapPoint {
  double y = 0.0;
  double z = 0.0;
  double length = 0.0;
  double d0 = 0.0;
  double excess = 0.0;
  double speed = 0.0;  // sqrt(D(rho, L[rho])) at the point itself
};

struct MapOptions {
  double spacing = 0.02;
  bool clip_speed = false;
  double speed_clip = 3.0;
  IntegrationOptions integration{};
};

/// Grid coordinates k * spacing with y^2 + z^2 <= 1 - 1e-9, y-major order.
inline std::vector<std::pair<double, double>> disk_grid(double spacing) {
  if (!(spacing > 0.0) || spacing > 1.0) throw ConfigurationError("grid spacing must be in (0, 1]");
  const int half = static_cast<int>(std::floor(1.0 / spacing + 1e-9));
  std::vector<std::pair<double, double>> pts;
  for (int iy = -half; iy <= half; ++iy)
    for (int iz = -half; iz <= half; ++iz) {
      const double y = iy * spacing;
      const double z = iz * spacing;
      if (y * y + z * z <= 1.0 - 1e-9) pts.emplace_back(y, z);
    }
  return pts;
}

inline std::vector<MapPoint> distance_map(const MarkovParams& p, MetricKind metric, const MapOptions& opt = {}) {
  const auto grid = disk_grid(opt.spacing);
  const BlochVector steady = steady_state(p);
  const EffectiveRates k = require_physical_rates(effective_rates(p));
  std::vector<MapPoint> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const BlochVector r0{0.0, grid[i].first, grid[i].second};
    MapPoint& m = out[i];
    m.y = r0.y;
    m.z = r0.z;
    m.length = total_length(r0, p, metric, opt.integration);
    m.d0 = half_geodesic(r0, steady, metric);
    m.excess = m.length - m.d0;
    m.speed = 2.0 * half_speed(r0, detail::rhs_unchecked(r0, k), metric);
    if (opt.clip_speed) m.speed = std::min(m.speed, opt.speed_clip);
  });
  return out;
}

}  // namespace iqme::markov

#endif  // IQME_MARKOV_HPP
