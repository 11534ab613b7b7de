#ifndef IQME_ANALYSIS_HPP
#define IQME_ANALYSIS_HPP

// Crossing detection on pairs of relaxation curves (residue R or geodesic d)
// and the resulting Mpemba verdicts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iqme/circuit.hpp"
#include "iqme/errors.hpp"
#include "iqme/markov.hpp"

namespace iqme::analysis {

struct CurvePair {
  std::vector<double> times;
  std::vector<double> a;
  std::vector<double> b;
  std::pair<std::string, std::string> labels{"A", "B"};
};

enum class VerdictKind { Crossing, NoCrossing, OrderingViolated };

inline std::string_view to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Crossing: return "crossing";
    case VerdictKind::NoCrossing: return "no_crossing";
    case VerdictKind::OrderingViolated: return "ordering_violated";
  }
  return "?";
}

struct MpembaVerdict {
  VerdictKind kind = VerdictKind::NoCrossing;
  std::optional<double> t_c;
  double margin = 0.0;  // max |a - b| at samples t >= t_c
  bool relabeled = false;
  std::string label_a = "A";
  std::string label_b = "B";

  [[nodiscard]] bool crossed() const { return kind == VerdictKind::Crossing; }
};

/// Tie band of the noiseless single-qubit curves.
inline constexpr double kMarkovBand = 1e-9;

/// Samples with |a - b| <= band[i] count as ties. The curves must start with
/// a > b beyond the band. A crossing needs at least one sample with a < b
/// (beyond the band) after the last sample with a > b, and no a > b sample
/// afterwards. t_c interpolates linearly the final sign change of a - b.
inline MpembaVerdict detect_crossing(const CurvePair& pair, const std::vector<double>& band) {
  const std::size_t n = pair.times.size();
  if (pair.a.size() != n || pair.b.size() != n) throw std::invalid_argument("curve pair has mismatched lengths");
  if (band.size() != n) throw std::invalid_argument("tie band length differs from the curves");
  if (n < 2) throw std::invalid_argument("curve pair needs at least two samples");
  MpembaVerdict v;
  v.label_a = pair.labels.first;
  v.label_b = pair.labels.second;
  std::vector<double> diff(n);
  std::vector<int> sign(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = pair.a[i] - pair.b[i];
    sign[i] = diff[i] > band[i] ? 1 : (diff[i] < -band[i] ? -1 : 0);
  }
  if (sign[0] != 1) {
    v.kind = VerdictKind::OrderingViolated;
    return v;
  }
  std::size_t last_pos = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (sign[i] == 1) last_pos = i;
  std::size_t first_neg = n;
  for (std::size_t i = last_pos + 1; i < n; ++i)
    if (sign[i] == -1) {
      first_neg = i;
      break;
    }
  if (first_neg == n) {
    v.kind = VerdictKind::NoCrossing;
    return v;
  }
  std::size_t k = first_neg;
  for (std::size_t i = last_pos + 1; i <= first_neg; ++i)
    if (diff[i - 1] > 0.0 && diff[i] <= 0.0) k = i;
  const double t0 = pair.times[k - 1];
  const double t1 = pair.times[k];
  const double tc = diff[k] == 0.0 ? t1 : t0 + (t1 - t0) * diff[k - 1] / (diff[k - 1] - diff[k]);
  v.kind = VerdictKind::Crossing;
  v.t_c = tc;
  for (std::size_t i = 0; i < n; ++i)
    if (pair.times[i] >= tc) v.margin = std::max(v.margin, std::abs(diff[i]));
  return v;
}

inline MpembaVerdict detect_crossing(const CurvePair& pair, double band = 0.0) {
  return detect_crossing(pair, std::vector<double>(pair.times.size(), band));
}

namespace detail {
inline void require_compatible(const markov::TrajectoryRecord& x, const markov::TrajectoryRecord& y, bool same_metric) {
  if (same_metric && x.metric != y.metric) throw std::invalid_argument("records use different metrics");
  const markov::MarkovParams& p = x.params;
  const markov::MarkovParams& q = y.params;
  if (p.alpha != q.alpha || p.gamma_prime != q.gamma_prime || !(p.interpretation == q.interpretation))
    throw std::invalid_argument("records use different model parameters");
  if (x.times != y.times) throw std::invalid_argument("records use different time grids");
}

inline MpembaVerdict ordered_verdict(std::vector<double> times, const std::vector<double>& first,
                                     const std::vector<double>& second, std::vector<double> band) {
  CurvePair pair{std::move(times), first, second, {"A", "B"}};
  bool swapped = false;
  if (first.at(0) < second.at(0)) {
    std::swap(pair.a, pair.b);
    std::swap(pair.labels.first, pair.labels.second);
    swapped = true;
  }
  MpembaVerdict v = detect_crossing(pair, band);
  v.relabeled = swapped;
  return v;
}
}  // namespace detail

/// IQME: crossing of the residues R = L - l, after relabeling so that A has the larger R(0).
inline MpembaVerdict iqme_verdict(const markov::TrajectoryRecord& ra, const markov::TrajectoryRecord& rb) {
  detail::require_compatible(ra, rb, true);
  return detail::ordered_verdict(ra.times, ra.residue, rb.residue, std::vector<double>(ra.times.size(), kMarkovBand));
}

/// QME: crossing of d(t), same relabeling rule.
inline MpembaVerdict qme_verdict(const markov::TrajectoryRecord& ra, const markov::TrajectoryRecord& rb) {
  detail::require_compatible(ra, rb, true);
  return detail::ordered_verdict(ra.times, ra.geo, rb.geo, std::vector<double>(ra.times.size(), kMarkovBand));
}

/// Metric-independent IQME: gated on R_SLD^A(0) > R_HM^B(0), then R_HM^A is
/// compared against R_SLD^B. A is the state with the larger SLD residue at t = 0.
inline MpembaVerdict universal_iqme_check(const markov::TrajectoryRecord& a_sld, const markov::TrajectoryRecord& a_hm,
                                          const markov::TrajectoryRecord& b_sld, const markov::TrajectoryRecord& b_hm) {
  if (a_sld.metric != MetricKind::SLD || b_sld.metric != MetricKind::SLD || a_hm.metric != MetricKind::HM ||
      b_hm.metric != MetricKind::HM)
    throw std::invalid_argument("universal check needs one SLD and one HM record per state");
  detail::require_compatible(a_sld, a_hm, false);
  detail::require_compatible(a_sld, b_sld, false);
  detail::require_compatible(a_sld, b_hm, false);
  const bool swap = a_sld.residue.at(0) < b_sld.residue.at(0);
  const auto& xs = swap ? b_sld : a_sld;
  const auto& xh = swap ? b_hm : a_hm;
  const auto& ys = swap ? a_sld : b_sld;
  const auto& yh = swap ? a_hm : b_hm;
  MpembaVerdict v;
  v.relabeled = swap;
  v.label_a = swap ? "B" : "A";
  v.label_b = swap ? "A" : "B";
  if (!(xs.residue.at(0) > yh.residue.at(0) + kMarkovBand)) {
    v.kind = VerdictKind::OrderingViolated;
    return v;
  }
  CurvePair pair{xs.times, xh.residue, ys.residue, {v.label_a, v.label_b}};
  MpembaVerdict inner = detect_crossing(pair, kMarkovBand);
  inner.relabeled = swap;
  return inner;
}

struct CircuitVerdict {
  MpembaVerdict verdict;
  double final_gap = 0.0;   // |a - b| at the last sample with nonzero band
  double final_band = 0.0;  // 2 x combined standard error there
  bool significant = false;
};

/// IQME between two trajectory-averaged curves. Ties are resolved with a band
/// of 2x the combined standard error of the residues; a crossing is only
/// reported when the gap at the last informative sample (R is identically
/// zero at the horizon) exceeds that band.
inline CircuitVerdict circuit_verdict(const circuit::AveragedCurve& x, const circuit::AveragedCurve& y,
                                      std::pair<std::string, std::string> labels = {"A", "B"}) {
  if (x.times != y.times) throw std::invalid_argument("curves use different step grids");
  const std::size_t n = x.times.size();
  std::vector<double> t(n), band(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = x.times[i];
    band[i] = 2.0 * std::hypot(x.residue_std_err[i], y.residue_std_err[i]);
  }
  CurvePair pair{t, x.residue, y.residue, labels};
  bool swapped = false;
  if (x.residue.at(0) < y.residue.at(0)) {
    std::swap(pair.a, pair.b);
    std::swap(pair.labels.first, pair.labels.second);
    swapped = true;
  }
  CircuitVerdict out;
  out.verdict = detect_crossing(pair, band);
  out.verdict.relabeled = swapped;
  std::size_t k = n - 1;
  while (k > 0 && band[k] == 0.0) --k;
  out.final_gap = std::abs(pair.a[k] - pair.b[k]);
  out.final_band = band[k];
  out.significant = pair.a[k] - pair.b[k] < -band[k];
  if (out.verdict.crossed() && !out.significant) {
    out.verdict.kind = VerdictKind::NoCrossing;
    out.verdict.t_c.reset();
    out.verdict.margin = 0.0;
  }
  return out;
}

}  // namespace iqme::analysis

#endif  // IQME_ANALYSIS_HPP
