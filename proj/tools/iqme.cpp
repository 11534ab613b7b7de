// iqme: command-line driver for the single-qubit and circuit experiments.
//
// Exit codes: 0 success, 2 argument error, 3 calibration failure,
// 4 numerical instability.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iqme/analysis.hpp"
#include "iqme/circuit.hpp"
#include "iqme/markov.hpp"
#include "iqme/parallel.hpp"
#include "iqme/qgeom.hpp"

#ifndef IQME_VERSION
#define IQME_VERSION "dev"
#endif

namespace {

using iqme::BlochVector;
using iqme::MetricKind;
using json = nlohmann::json;

enum ExitCode { kOk = 0, kArgs = 2, kCalibration = 3, kNumerical = 4 };

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Parameters that fully determine a run, in a stable order.
struct Manifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
};

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// CSV with a '#' manifest block. Timing and thread count go to a JSON
/// sidecar so that the CSV bytes depend only on the flags.
void write_csv(const std::string& path, const Manifest& m, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# iqme " << IQME_VERSION << "\n";
  out << "# command: " << m.command << "\n";
  for (const auto& [k, v] : m.entries) out << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void write_sidecar(const std::string& csv_path, const Manifest& m, double seconds) {
  json j;
  j["command"] = m.command;
  j["version"] = IQME_VERSION;
  json params = json::object();
  for (const auto& [k, v] : m.entries) params[k] = v;
  j["parameters"] = params;
  j["output"] = std::filesystem::path(csv_path).filename().string();
  j["wall_clock_seconds"] = seconds;
  j["threads"] = iqme::thread_count();
  std::ofstream(csv_path + ".manifest.json", std::ios::binary) << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Interpretation handling shared by the markov commands.

struct ResolvedInterpretation {
  iqme::markov::ModelInterpretation interp;
  std::string source;
  std::optional<double> max_deviation;
  bool accepted = true;
};

void warn_if_rejected(const ResolvedInterpretation& r) {
  if (!r.accepted)
    std::cerr << "warning: interpretation " << r.interp.label() << " misses the calibration anchors by "
              << short_num(r.max_deviation.value_or(NAN)) << " (tolerance " << iqme::markov::kCalibrationAcceptance
              << "); results are not calibrated\n";
}

ResolvedInterpretation resolve_interpretation(const std::string& label, const std::string& calibration_path) {
  using namespace iqme::markov;
  ResolvedInterpretation r;
  if (!label.empty()) {
    r.interp = ModelInterpretation::parse(label);
    r.source = "flag";
    return r;
  }
  if (!calibration_path.empty() && std::filesystem::exists(calibration_path)) {
    json j = json::parse(std::ifstream(calibration_path));
    r.interp = ModelInterpretation::parse(j.at("interpretation").get<std::string>());
    r.source = calibration_path;
    r.max_deviation = j.at("max_deviation").get<double>();
    r.accepted = j.at("accepted").get<bool>();
    warn_if_rejected(r);
    return r;
  }
  CalibrationReport rep = run_calibration();
  if (!rep.has_winner()) throw CalibrationError("calibration failed: no physical interpretation", std::move(rep));
  r.interp = rep.winner().interpretation;
  r.source = "in-process calibration";
  r.max_deviation = rep.best_deviation();
  r.accepted = rep.best_deviation() <= kCalibrationAcceptance;
  warn_if_rejected(r);
  return r;
}

void describe_interpretation(Manifest& m, const ResolvedInterpretation& r) {
  m.add("interpretation", r.interp.label());
  m.add("interpretation_source", r.source);
  if (r.max_deviation) m.add("calibration_max_deviation", num(*r.max_deviation));
  m.add("calibration_accepted", r.accepted ? "true" : "false");
}

BlochVector parse_point(const std::string& text) {
  std::stringstream ss(text);
  std::string y, z, extra;
  if (!std::getline(ss, y, ',') || !std::getline(ss, z, ',') || std::getline(ss, extra, ','))
    throw std::invalid_argument("expected a point as y,z but got '" + text + "'");
  return {0.0, std::stod(y), std::stod(z)};
}

std::string format_point(const BlochVector& r) { return num(r.y) + "," + num(r.z); }

std::string describe(const iqme::analysis::MpembaVerdict& v) {
  std::string s(iqme::analysis::to_string(v.kind));
  if (v.t_c) s += " t_c=" + num(*v.t_c) + " margin=" + num(v.margin);
  if (v.relabeled) s += " (inputs relabeled)";
  return s;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string output = "calibration.csv";
  std::string interpretation_file = "interpretation.json";
  std::string only;
  int steps = 1000;
};

int cmd_calibrate(const CalibrateArgs& a) {
  using namespace iqme::markov;
  Stopwatch clock;
  std::vector<ModelInterpretation> grid = interpretation_grid();
  if (!a.only.empty()) grid = {ModelInterpretation::parse(a.only)};
  IntegrationOptions opt;
  opt.n_steps = a.steps;
  const CalibrationReport rep = run_calibration(reference_anchors(), 100.0, grid, opt);

  Manifest m{"calibrate", {}};
  m.add("alpha", num(rep.alpha));
  m.add("candidates", std::to_string(grid.size()));
  m.add("n_steps", std::to_string(a.steps));
  m.add("acceptance_tolerance", num(kCalibrationAcceptance));
  m.add("failure_tolerance", num(kCalibrationFailure));
  m.add("winner", rep.has_winner() ? rep.winner().interpretation.label() : "none");
  if (rep.has_winner()) m.add("winner_max_deviation", num(rep.best_deviation()));

  std::vector<std::string> columns{"candidate", "physical", "max_residual"};
  for (const AnchorCase& c : rep.anchors)
    for (const char* q : {"L_A", "L_B", "d_A0", "d_B0"}) columns.push_back(c.label + "_" + q);
  columns.push_back("reason");
  std::vector<std::vector<std::string>> rows;
  for (const CandidateResult& c : rep.candidates) {
    std::vector<std::string> row{c.interpretation.label(), c.physical ? "true" : "false",
                                 c.physical ? num(c.max_deviation) : "nan"};
    for (std::size_t k = 0; k < rep.anchors.size() * 4; ++k) row.push_back(c.physical ? num(c.residuals[k]) : "nan");
    std::string reason = c.reason;
    for (char& ch : reason)
      if (ch == ',') ch = ';';
    row.push_back(reason);
    rows.push_back(std::move(row));
  }
  write_csv(a.output, m, columns, rows);
  write_sidecar(a.output, m, clock.seconds());

  for (const CandidateResult& c : rep.candidates)
    std::cout << c.interpretation.label() << "  "
              << (c.physical ? "max residual " + short_num(c.max_deviation) : "unphysical: " + c.reason) << "\n";
  if (!rep.has_winner()) {
    std::cerr << "calibration failed: no physical interpretation\n";
    return kCalibration;
  }
  const bool accepted = rep.best_deviation() <= kCalibrationAcceptance;
  json j;
  j["interpretation"] = rep.winner().interpretation.label();
  j["max_deviation"] = rep.best_deviation();
  j["accepted"] = accepted;
  j["alpha"] = rep.alpha;
  std::ofstream(a.interpretation_file, std::ios::binary) << j.dump(2) << "\n";
  std::cout << "best: " << rep.winner().interpretation.label() << " max residual " << short_num(rep.best_deviation())
            << (accepted ? " (accepted)" : " (outside tolerance " + short_num(kCalibrationAcceptance) + ")") << "\n";
  if (rep.best_deviation() > kCalibrationFailure) {
    std::cerr << "calibration failed: best max residual " << short_num(rep.best_deviation()) << " exceeds "
              << short_num(kCalibrationFailure) << "\n";
    return kCalibration;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct MarkovArgs {
  std::string case_label;
  double alpha = 100.0;
  std::optional<double> gamma_prime;
  std::string a, b;
  std::string metric = "sld";
  std::string interpretation;
  std::string calibration = "interpretation.json";
  std::string output = "markov.csv";
  int steps = 1000;
  double tau_max = 30.0;
};

int cmd_markov(const MarkovArgs& args) {
  using namespace iqme::markov;
  namespace an = iqme::analysis;
  Stopwatch clock;
  double gamma_prime = 0.94;
  BlochVector a, b;
  bool have_a = false, have_b = false;
  if (!args.case_label.empty()) {
    bool found = false;
    for (const AnchorCase& c : reference_anchors())
      if (c.label == args.case_label) {
        gamma_prime = c.gamma_prime;
        a = c.a;
        b = c.b;
        have_a = have_b = found = true;
      }
    if (!found) throw std::invalid_argument("unknown case '" + args.case_label + "' (expected i, ii, iii or iv)");
  }
  if (args.gamma_prime) gamma_prime = *args.gamma_prime;
  if (!args.a.empty()) a = parse_point(args.a), have_a = true;
  if (!args.b.empty()) b = parse_point(args.b), have_b = true;
  if (!have_a || !have_b) throw std::invalid_argument("give --case or both --a and --b");
  if (a.norm() > 1.0 || b.norm() > 1.0) throw std::invalid_argument("initial states must satisfy y^2 + z^2 <= 1");

  const MetricKind metric = iqme::parse_metric(args.metric);
  const ResolvedInterpretation ri = resolve_interpretation(args.interpretation, args.calibration);
  const MarkovParams p{args.alpha, gamma_prime, ri.interp};
  p.validate();
  IntegrationOptions opt;
  opt.n_steps = args.steps;
  opt.tau_max = args.tau_max;

  const TrajectoryRecord ra = simulate(a, p, metric, opt);
  const TrajectoryRecord rb = simulate(b, p, metric, opt);
  const an::MpembaVerdict iq = an::iqme_verdict(ra, rb);
  const an::MpembaVerdict qm = an::qme_verdict(ra, rb);
  std::optional<an::MpembaVerdict> universal;
  if (metric == MetricKind::HM) {
    const TrajectoryRecord sa = simulate(a, p, MetricKind::SLD, opt);
    const TrajectoryRecord sb = simulate(b, p, MetricKind::SLD, opt);
    universal = an::universal_iqme_check(sa, ra, sb, rb);
  }

  Manifest m{"markov", {}};
  if (!args.case_label.empty()) m.add("case", args.case_label);
  m.add("alpha", num(p.alpha));
  m.add("gamma_prime", num(p.gamma_prime));
  m.add("a", format_point(a));
  m.add("b", format_point(b));
  m.add("metric", std::string(iqme::to_string(metric)));
  describe_interpretation(m, ri);
  m.add("steady_state", format_point(steady_state(p)));
  m.add("n_steps", std::to_string(opt.n_steps));
  m.add("integration_steps", std::to_string(ra.times.size() - 1));
  m.add("tau_max", num(opt.tau_max));
  m.add("L_A", num(ra.total_length));
  m.add("L_B", num(rb.total_length));
  m.add("d_A0", num(ra.geo.front()));
  m.add("d_B0", num(rb.geo.front()));
  m.add("iqme", describe(iq));
  m.add("qme", describe(qm));
  if (universal) m.add("universal_iqme", describe(*universal));

  const std::size_t stride = (ra.times.size() - 1) / static_cast<std::size_t>(opt.n_steps);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < ra.times.size(); i += stride)
    rows.push_back({num(ra.times[i]), num(ra.states[i].y), num(ra.states[i].z), num(ra.ell[i]), num(ra.geo[i]),
                    num(ra.residue[i]), num(rb.states[i].y), num(rb.states[i].z), num(rb.ell[i]), num(rb.geo[i]),
                    num(rb.residue[i])});
  write_csv(args.output, m, {"tau", "yA", "zA", "ellA", "dA", "RA", "yB", "zB", "ellB", "dB", "RB"}, rows);
  write_sidecar(args.output, m, clock.seconds());

  std::cout << "interpretation: " << ri.interp.label() << "\n";
  std::cout << "L_A = " << short_num(ra.total_length) << "  L_B = " << short_num(rb.total_length)
            << "  d_A(0) = " << short_num(ra.geo.front()) << "  d_B(0) = " << short_num(rb.geo.front()) << "\n";
  std::cout << "IQME: " << describe(iq) << "\n";
  std::cout << "QME: " << describe(qm) << "\n";
  if (universal) std::cout << "universal IQME: " << describe(*universal) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct MapArgs {
  double alpha = 100.0;
  double gamma_prime = 0.94;
  std::string metric = "sld";
  double spacing = 0.02;
  std::string interpretation;
  std::string calibration = "interpretation.json";
  std::string output = "map.csv";
  std::string speeds;
  bool clip_speeds = false;
  std::string svg;
  int steps = 1000;
};

/// Blue-to-yellow ramp for t in [0, 1].
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(68 + t * (253 - 68)));
  const int g = static_cast<int>(std::lround(1 + t * (231 - 1)));
  const int b = static_cast<int>(std::lround(84 + t * (37 - 84)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void write_svg(const std::string& path, const std::vector<iqme::markov::MapPoint>& pts, double spacing) {
  double hi = 0.0;
  for (const auto& p : pts) hi = std::max(hi, p.excess);
  const double scale = 200.0;
  const double cell = spacing * scale;
  std::ofstream out(path, std::ios::binary);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(-scale - cell) << " " << num(-scale - cell) << " "
      << num(2 * scale + 2 * cell) << " " << num(2 * scale + 2 * cell) << "\">\n";
  for (const auto& p : pts)
    out << "<rect x=\"" << num(p.y * scale - cell / 2) << "\" y=\"" << num(-p.z * scale - cell / 2) << "\" width=\""
        << num(cell) << "\" height=\"" << num(cell) << "\" fill=\"" << ramp(hi > 0 ? p.excess / hi : 0.0) << "\"/>\n";
  out << "<circle cx=\"0\" cy=\"0\" r=\"" << num(scale) << "\" fill=\"none\" stroke=\"black\"/>\n</svg>\n";
}

int cmd_markov_map(const MapArgs& args) {
  using namespace iqme::markov;
  Stopwatch clock;
  const MetricKind metric = iqme::parse_metric(args.metric);
  const ResolvedInterpretation ri = resolve_interpretation(args.interpretation, args.calibration);
  const MarkovParams p{args.alpha, args.gamma_prime, ri.interp};
  MapOptions opt;
  opt.spacing = args.spacing;
  opt.clip_speed = args.clip_speeds;
  opt.integration.n_steps = args.steps;
  const std::vector<MapPoint> pts = distance_map(p, metric, opt);

  Manifest m{"markov-map", {}};
  m.add("alpha", num(p.alpha));
  m.add("gamma_prime", num(p.gamma_prime));
  m.add("metric", std::string(iqme::to_string(metric)));
  m.add("spacing", num(opt.spacing));
  describe_interpretation(m, ri);
  m.add("steady_state", format_point(steady_state(p)));
  m.add("n_steps", std::to_string(opt.integration.n_steps));
  m.add("tau_max", num(opt.integration.tau_max));
  m.add("points", std::to_string(pts.size()));

  std::vector<std::vector<std::string>> rows;
  rows.reserve(pts.size());
  for (const auto& q : pts) rows.push_back({num(q.y), num(q.z), num(q.length), num(q.d0), num(q.excess)});
  write_csv(args.output, m, {"y", "z", "L", "d0", "excess"}, rows);
  write_sidecar(args.output, m, clock.seconds());

  if (!args.speeds.empty()) {
    Manifest ms = m;
    ms.command = "markov-map speeds";
    ms.add("speed_clip", args.clip_speeds ? num(opt.speed_clip) : "none");
    std::vector<std::vector<std::string>> srows;
    for (const auto& q : pts) srows.push_back({num(q.y), num(q.z), num(q.speed)});
    write_csv(args.speeds, ms, {"y", "z", "speed"}, srows);
    write_sidecar(args.speeds, ms, clock.seconds());
  }
  if (!args.svg.empty()) write_svg(args.svg, pts, opt.spacing);

  double worst = 0.0, worst_axis = 0.0;
  for (const auto& q : pts) {
    worst = std::min(worst, q.excess);
    if (std::abs(q.y) < 1e-12) worst_axis = std::max(worst_axis, q.excess);
  }
  std::cout << "points: " << pts.size() << "  min excess: " << short_num(worst)
            << "  max excess on y = 0: " << short_num(worst_axis) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct CircuitArgs {
  int n = 16;
  std::vector<double> theta{0.1, 0.5};
  std::string family = "neel";
  std::string subsystem = "1";
  int subsystem_first = 0;
  std::string metric = "sld";
  int steps = 20;
  int trajectories = 500;
  std::uint64_t seed = 0;
  std::string prefix = "circuit";
};

/// Ferro verdicts only use theta >= 0.4 pi, where the finite-size crossover is absent.
constexpr double kFerroThetaFloor = 0.4;

int cmd_circuit(const CircuitArgs& args) {
  using namespace iqme::circuit;
  namespace an = iqme::analysis;
  Stopwatch clock;
  CircuitConfig base;
  base.n_qubits = args.n;
  base.family = parse_family(args.family);
  base.subsystem = args.subsystem == "quarter" ? SubsystemChoice::Quarter : SubsystemChoice::Single;
  base.subsystem_first = args.subsystem_first;
  base.metric = iqme::parse_metric(args.metric);
  base.horizon = args.steps;
  base.n_trajectories = args.trajectories;
  base.master_seed = args.seed;
  if (args.theta.empty()) throw std::invalid_argument("need at least one theta");
  for (double t : args.theta)
    if (!(t >= 0.0 && t <= 0.5)) throw std::invalid_argument("theta must lie in [0, 0.5] (units of pi)");
  if (args.trajectories < 2) throw std::invalid_argument("need at least two trajectories");
  base.validate();

  Manifest common{"circuit", {}};
  common.add("n_qubits", std::to_string(base.n_qubits));
  common.add("family", std::string(to_string(base.family)));
  common.add("subsystem", "qubits " + std::to_string(base.region().first) + ".." +
                              std::to_string(base.region().first + base.region().count - 1));
  common.add("metric", std::string(iqme::to_string(base.metric)));
  common.add("steps", std::to_string(base.horizon));
  common.add("trajectories", std::to_string(base.n_trajectories));
  common.add("seed", std::to_string(base.master_seed));
  common.add("gates", "fresh block-Haar U(1) gate per layer and position; even layer first");

  std::vector<AveragedCurve> curves;
  for (double t : args.theta) {
    CircuitConfig cfg = base;
    cfg.theta = t * std::numbers::pi;
    curves.push_back(average_curves(cfg));
    const AveragedCurve& c = curves.back();
    Manifest m = common;
    m.add("theta_over_pi", num(t));
    m.add("mean_total", num(c.mean_total));
    m.add("converged", c.converged ? "true" : "false");
    m.add("final_distance_to_equilibrium", num(c.final_distance));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < c.times.size(); ++i)
      rows.push_back({std::to_string(c.times[i]), num(c.mean_ell[i]), num(c.std_err[i]), num(c.residue[i])});
    const std::string path = args.prefix + "_theta" + short_num(t) + ".csv";
    write_csv(path, m, {"step", "mean_ell", "std_err", "residue"}, rows);
    write_sidecar(path, m, clock.seconds());
    std::cout << "theta = " << short_num(t) << "pi  L = " << short_num(c.mean_total) << " +- "
              << short_num(c.std_err.back()) << "  converged: " << (c.converged ? "yes" : "no")
              << "  distance to equilibrium: " << short_num(c.final_distance) << "\n";
  }

  std::vector<std::vector<std::string>> summary;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const AveragedCurve& c = curves[i];
    summary.push_back({num(args.theta[i]), num(c.mean_total), num(c.std_err.back()), c.converged ? "true" : "false",
                       num(c.final_distance), num(c.final_distance_std_err), num(c.mean_final_rdm(0, 0).real())});
  }
  write_csv(args.prefix + "_summary.csv", common,
            {"theta_over_pi", "mean_total", "mean_total_std_err", "converged", "final_distance",
             "final_distance_std_err", "final_rdm_00"},
            summary);
  write_sidecar(args.prefix + "_summary.csv", common, clock.seconds());

  std::vector<std::vector<std::string>> verdicts;
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      const double ta = args.theta[i], tb = args.theta[j];
      const bool excluded = base.family == Family::Ferro && std::min(ta, tb) < kFerroThetaFloor - 1e-12;
      const an::CircuitVerdict v =
          an::circuit_verdict(curves[i], curves[j], {short_num(ta) + "pi", short_num(tb) + "pi"});
      const std::string kind = excluded ? "excluded" : std::string(an::to_string(v.verdict.kind));
      verdicts.push_back({num(ta), num(tb), kind, v.verdict.label_a, v.verdict.t_c ? num(*v.verdict.t_c) : "nan",
                          num(v.final_gap), num(v.final_band)});
      std::cout << "IQME " << short_num(ta) << "pi vs " << short_num(tb) << "pi: " << kind;
      if (!excluded && v.verdict.t_c) std::cout << " t_c=" << short_num(*v.verdict.t_c);
      if (excluded) std::cout << " (theta below 0.4pi is in the finite-size crossover regime)";
      std::cout << "\n";
    }
  write_csv(args.prefix + "_verdicts.csv", common,
            {"theta_a", "theta_b", "kind", "first_at_t0", "t_c", "final_gap", "final_band"}, verdicts);
  write_sidecar(args.prefix + "_verdicts.csv", common, clock.seconds());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory lengths and Mpemba verdicts for a driven qubit and random U(1) circuits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IQME_VERSION);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fit the model interpretation to the reference anchors");
  cal->add_option("--output", ca.output, "Report CSV");
  cal->add_option("--interpretation-file", ca.interpretation_file, "Where the chosen interpretation is stored");
  cal->add_option("--only", ca.only, "Score a single candidate, e.g. literal/+1/+1/inverse");
  cal->add_option("--steps", ca.steps, "Nominal RK4 steps to tau = 30")->check(CLI::PositiveNumber);

  MarkovArgs ma;
  auto* mk = app.add_subcommand("markov", "Relaxation curves and verdicts for two initial states");
  mk->add_option("--case", ma.case_label, "Reference case")->check(CLI::IsMember({"i", "ii", "iii", "iv"}));
  mk->add_option("--alpha", ma.alpha, "Decay/dephasing mix")->check(CLI::NonNegativeNumber);
  mk->add_option("--gamma-prime", ma.gamma_prime, "Relative unitary strength")->check(CLI::PositiveNumber);
  mk->add_option("--a", ma.a, "Initial state A as y,z");
  mk->add_option("--b", ma.b, "Initial state B as y,z");
  mk->add_option("--metric", ma.metric, "sld, hm or wy")->check(CLI::IsMember({"sld", "bures", "hm", "wy"}));
  mk->add_option("--interpretation", ma.interpretation, "Override the calibrated interpretation");
  mk->add_option("--calibration", ma.calibration, "Interpretation file written by calibrate");
  mk->add_option("--output", ma.output, "Curves CSV");
  mk->add_option("--steps", ma.steps, "Nominal RK4 steps")->check(CLI::PositiveNumber);
  mk->add_option("--tau-max", ma.tau_max, "Integration horizon")->check(CLI::PositiveNumber);

  MapArgs mp;
  auto* map = app.add_subcommand("markov-map", "L - d(0) over the y-z disk");
  map->add_option("--alpha", mp.alpha)->check(CLI::NonNegativeNumber);
  map->add_option("--gamma-prime", mp.gamma_prime)->check(CLI::PositiveNumber);
  map->add_option("--metric", mp.metric)->check(CLI::IsMember({"sld", "bures", "hm", "wy"}));
  map->add_option("--spacing", mp.spacing, "Grid spacing")->check(CLI::Range(1e-3, 1.0));
  map->add_option("--interpretation", mp.interpretation);
  map->add_option("--calibration", mp.calibration);
  map->add_option("--output", mp.output, "Heatmap CSV");
  map->add_option("--speeds", mp.speeds, "Also write instantaneous speeds to this CSV");
  map->add_flag("--clip-speeds", mp.clip_speeds, "Clip exported speeds at 3");
  map->add_option("--svg", mp.svg, "Also write an SVG raster of the excess");
  map->add_option("--steps", mp.steps)->check(CLI::PositiveNumber);

  CircuitArgs cc;
  auto* cir = app.add_subcommand("circuit", "Trajectory-averaged lengths in U(1) brick-wall circuits");
  cir->add_option("--n", cc.n, "Number of qubits")->check(CLI::Range(2, 24));
  cir->add_option("--theta", cc.theta, "Tilt angles in units of pi")->delimiter(',');
  cir->add_option("--family", cc.family)->check(CLI::IsMember({"neel", "ferro", "ferro-domain-wall", "ferro_domain_wall"}));
  cir->add_option("--subsystem", cc.subsystem, "1 or quarter")->check(CLI::IsMember({"1", "quarter"}));
  cir->add_option("--subsystem-first", cc.subsystem_first, "First qubit of the subsystem")->check(CLI::NonNegativeNumber);
  cir->add_option("--metric", cc.metric, "sld or wy")->check(CLI::IsMember({"sld", "bures", "wy"}));
  cir->add_option("--steps", cc.steps, "Time steps (two layers each)")->check(CLI::PositiveNumber);
  cir->add_option("--trajectories", cc.trajectories)->check(CLI::PositiveNumber);
  cir->add_option("--seed", cc.seed, "Master seed");
  cir->add_option("--output-prefix", cc.prefix, "Prefix of the CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kArgs;
  }

  try {
    if (cal->parsed()) return cmd_calibrate(ca);
    if (mk->parsed()) return cmd_markov(ma);
    if (map->parsed()) return cmd_markov_map(mp);
    if (cir->parsed()) return cmd_circuit(cc);
  } catch (const iqme::markov::CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCalibration;
  } catch (const iqme::InstabilityError& e) {
    std::cerr << "numerical instability: " << e.what() << "\n";
    return kNumerical;
  } catch (const iqme::DomainError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const iqme::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
