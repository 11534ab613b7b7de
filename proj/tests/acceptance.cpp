// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "iqme/analysis.hpp"
#include "iqme/circuit.hpp"
#include "iqme/markov.hpp"
#include "iqme/qgeom.hpp"

using namespace iqme;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs a criterion; an escaping exception counts as a failure.
void criterion(int id, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, what] = body();
    report(id, ok, what);
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* yes_no(bool b) { return b ? "yes" : "no"; }

// Interpretation picked by calibration (the best candidate, accepted or not).
markov::ModelInterpretation calibrated() {
  static const markov::ModelInterpretation interp = [] {
    const markov::CalibrationReport rep = markov::run_calibration();
    return rep.winner().interpretation;
  }();
  return interp;
}

markov::MarkovParams params_for(double gamma_prime) { return {100.0, gamma_prime, calibrated()}; }

BlochVector yz(double y, double z) { return {0.0, y, z}; }

circuit::AveragedCurve circuit_run(circuit::Family f, double theta_over_pi, MetricKind m, int n = 12, int traj = 1000) {
  circuit::CircuitConfig c;
  c.n_qubits = n;
  c.family = f;
  c.theta = theta_over_pi * kPi;
  c.metric = m;
  c.horizon = 20;
  c.n_trajectories = traj;
  c.master_seed = 2024;
  return circuit::average_curves(c);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const fs::path& dir, const std::string& args, int threads) {
  const std::string cmd = "cd '" + dir.string() + "' && IQME_THREADS=" + std::to_string(threads) + " '" + IQME_CLI_PATH +
                          "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  criterion(1, [] {
    const auto t0 = std::chrono::steady_clock::now();
    const markov::CalibrationReport rep = markov::run_calibration();
    const double dt = seconds_since(t0);
    const double dev = rep.best_deviation();
    const bool ok = rep.has_winner() && dev <= 0.01 && dt < 30.0;
    return std::pair{ok, fmt("calibration: best %s max |deviation| %.4f over 16 anchors (tol 0.01), %.2f s (limit 30 s)",
                             rep.has_winner() ? rep.winner().interpretation.label().c_str() : "none", dev, dt)};
  });

  criterion(2, [] {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool iqme[4], qme[4];
    const auto anchors = markov::reference_anchors();
    for (std::size_t c = 0; c < anchors.size(); ++c) {
      const auto p = params_for(anchors[c].gamma_prime);
      const auto ra = markov::simulate(anchors[c].a, p, MetricKind::SLD);
      const auto rb = markov::simulate(anchors[c].b, p, MetricKind::SLD);
      iqme[c] = analysis::iqme_verdict(ra, rb).crossed();
      qme[c] = analysis::qme_verdict(ra, rb).crossed();
      detail += fmt(" %s:IQME=%s,QME=%s", anchors[c].label.c_str(), yes_no(iqme[c]), yes_no(qme[c]));
    }
    const double dt = seconds_since(t0);
    const bool ok = iqme[0] && iqme[1] && !iqme[2] && !iqme[3] && qme[2] && !qme[1] && dt < 10.0;
    return std::pair{ok, fmt("verdicts (want IQME i,ii only; QME iii not ii):%s, %.2f s (limit 10 s)", detail.c_str(), dt)};
  });

  criterion(3, [] {
    const auto p = params_for(0.94);
    const BlochVector a = yz(0.1, 0.0), b = yz(0.0, 0.9);
    const auto as = markov::simulate(a, p, MetricKind::SLD);
    const auto bs = markov::simulate(b, p, MetricKind::SLD);
    const auto ah = markov::simulate(a, p, MetricKind::HM);
    const auto bh = markov::simulate(b, p, MetricKind::HM);
    const bool hm = analysis::iqme_verdict(ah, bh).crossed();
    const bool sld = analysis::iqme_verdict(as, bs).crossed();
    const auto uni = analysis::universal_iqme_check(as, ah, bs, bh);
    return std::pair{hm && sld, fmt("HM experiment: IQME under HM %s, under SLD %s (universal: %s)", yes_no(hm), yes_no(sld),
                                    std::string(analysis::to_string(uni.kind)).c_str())};
  });

  criterion(4, [] {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g;
    double worst_speed = 0.0, worst_fid = 0.0;
    for (int k = 0; k < 10000; ++k) {
      BlochVector r, s;
      do r = {u(gen), u(gen), u(gen)}; while (r.norm() > 0.999);
      do s = {u(gen), u(gen), u(gen)}; while (s.norm() > 0.999);
      const BlochVector v{g(gen), g(gen), g(gen)};
      const DensityMatrix rho = bloch_to_density(r);
      const TangentOperator xdot = TangentOperator::from_bloch(v);
      for (MetricKind m : {MetricKind::SLD, MetricKind::HM, MetricKind::WY}) {
        const double ref = qubit_speed_closed_form(r, v, m);
        worst_speed = std::max(worst_speed, std::abs(petz_speed(rho, xdot, m) - ref) / ref);
      }
      const DensityMatrix sigma = bloch_to_density(s);
      worst_fid = std::max(worst_fid, std::abs(fidelity_qubit(rho, sigma) - fidelity_general(rho, sigma)));
    }
    return std::pair{worst_speed < 1e-9 && worst_fid < 1e-9,
                     fmt("oracles on 10000 pairs: speed rel err %.2e, fidelity fast path err %.2e (tol 1e-9)", worst_speed,
                         worst_fid)};
  });

  criterion(5, [] {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 1);
    double worst = -1e300;
    int n = 0;
    while (n < 100) {
      const BlochVector r{u(gen), u(gen), u(gen)};
      if (r.norm() > 0.95) continue;
      const auto p = params_for(pick(gen) ? 0.94 : 0.52);
      const auto s = markov::simulate(r, p, MetricKind::SLD);
      const auto w = markov::simulate(r, p, MetricKind::WY);
      const auto h = markov::simulate(r, p, MetricKind::HM);
      for (std::size_t i = 0; i < s.ell.size(); ++i)
        worst = std::max({worst, s.ell[i] - w.ell[i], w.ell[i] - h.ell[i]});
      ++n;
    }
    return std::pair{worst <= 1e-9, fmt("metric sandwich on 100 trajectories: max violation %.2e (slack 1e-9)", worst)};
  });

  criterion(6, [] {
    double worst = -1e300;
    int points = 0;
    for (double gp : {0.52, 0.94}) {
      markov::MapOptions opt;
      opt.spacing = 0.05;
      for (const auto& pt : markov::distance_map(params_for(gp), MetricKind::SLD, opt))
        if (pt.y == 0.0) {
          worst = std::max(worst, pt.excess);
          ++points;
        }
    }
    return std::pair{points > 0 && worst < 0.01,
                     fmt("geodesic follower on y = 0: max L - d(0) = %.4f over %d points (limit 0.01)", worst, points)};
  });

  circuit::AveragedCurve neel_low, neel_high;
  criterion(7, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    neel_low = circuit_run(circuit::Family::Neel, 0.1, MetricKind::SLD);
    neel_high = circuit_run(circuit::Family::Neel, 0.5, MetricKind::SLD);
    const double dt = seconds_since(t0);
    const auto v = analysis::circuit_verdict(neel_low, neel_high, {"0.1pi", "0.5pi"});
    const bool longer = neel_high.mean_total > neel_low.mean_total;
    const double dist = std::max(neel_low.final_distance, neel_high.final_distance);
    const bool ok = v.verdict.crossed() && v.significant && longer && dist < 0.05 && dt < 600.0;
    return std::pair{ok, fmt("Neel N=12 x1000: %s, final gap %.4f vs band %.4f, L(0.5pi)=%.4f L(0.1pi)=%.4f, "
                             "distance to I/2 %.4f (limit 0.05), %.1f s",
                             std::string(analysis::to_string(v.verdict.kind)).c_str(), v.final_gap, v.final_band,
                             neel_high.mean_total, neel_low.mean_total, dist, dt)};
  });

  criterion(8, [] {
    const double thetas[3] = {0.4, 0.45, 0.5};
    std::vector<circuit::AveragedCurve> curves;
    double worst_dist = 0.0;
    for (double t : thetas) {
      curves.push_back(circuit_run(circuit::Family::Ferro, t, MetricKind::SLD));
      const DensityMatrix mean_rdm(curves.back().mean_final_rdm);
      const DensityMatrix eq = circuit::equilibrium_rdm(t * kPi, 1);
      worst_dist = std::max(worst_dist, std::acos(std::min(1.0, uhlmann_fidelity(mean_rdm, eq))));
    }
    int crossings = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (analysis::circuit_verdict(curves[i], curves[j]).verdict.crossed()) ++crossings;
    const bool low_converged = circuit_run(circuit::Family::Ferro, 0.2, MetricKind::SLD).converged;
    const bool ok = crossings == 0 && worst_dist < 0.05 && !low_converged;
    return std::pair{ok, fmt("ferro N=12: %d crossings among 0.4/0.45/0.5pi, RDM distance %.4f (limit 0.05), "
                             "0.2pi converged: %s",
                             crossings, worst_dist, yes_no(low_converged))};
  });

  criterion(9, [] {
    const auto c = circuit_run(circuit::Family::Ferro, 0.0, MetricKind::SLD, 12, 50);
    bool zero = true;
    for (double l : c.mean_ell) zero = zero && l == 0.0;
    circuit::CircuitConfig cfg;
    cfg.n_qubits = 12;
    cfg.theta = 0.0;
    cfg.family = circuit::Family::Ferro;
    for (std::uint64_t k = 0; k < 5; ++k)
      for (double l : circuit::run_trajectory(cfg, k).ell) zero = zero && l == 0.0;
    return std::pair{zero, std::string("ferro theta=0: every l(t_j) is exactly 0: ") + yes_no(zero)};
  });

  criterion(10, [&] {
    const auto low = circuit_run(circuit::Family::Neel, 0.1, MetricKind::WY);
    const auto high = circuit_run(circuit::Family::Neel, 0.5, MetricKind::WY);
    const auto wy = analysis::circuit_verdict(low, high);
    const auto sld = analysis::circuit_verdict(neel_low, neel_high);
    const bool ok = !neel_low.times.empty() && wy.verdict.kind == sld.verdict.kind && wy.significant == sld.significant;
    return std::pair{ok, fmt("WY verdict %s (gap %.4f, band %.4f) vs SLD %s",
                             std::string(analysis::to_string(wy.verdict.kind)).c_str(), wy.final_gap, wy.final_band,
                             std::string(analysis::to_string(sld.verdict.kind)).c_str())};
  });

  criterion(11, [] {
    const fs::path root = fs::temp_directory_path() / "iqme_acceptance";
    fs::remove_all(root);
    const std::string interp = " --interpretation " + calibrated().label();
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"calibrate", {"calibration.csv"}},
        {"markov --case ii" + interp, {"markov.csv"}},
        {"markov-map --spacing 0.1 --steps 500" + interp, {"map.csv"}},
        {"circuit --n 8 --theta 0.1,0.5 --trajectories 200 --seed 11",
         {"circuit_theta0.1.csv", "circuit_theta0.5.csv", "circuit_summary.csv", "circuit_verdicts.csv"}},
    };
    int compared = 0, mismatched = 0;
    for (std::size_t c = 0; c < commands.size(); ++c) {
      std::vector<fs::path> dirs;
      for (int threads : {1, 1, 8, 8}) {
        const fs::path d = root / (std::to_string(c) + "_" + std::to_string(threads) + "_" + std::to_string(dirs.size()));
        fs::create_directories(d);
        const int code = run_cli(d, commands[c].first, threads);
        if (code != 0 && code != 3) ++mismatched;
        dirs.push_back(d);
      }
      for (const auto& f : commands[c].second)
        for (std::size_t k = 1; k < dirs.size(); ++k) {
          ++compared;
          const std::string a = slurp(dirs[0] / f);
          if (a.empty() || a != slurp(dirs[k] / f)) ++mismatched;
        }
    }
    fs::remove_all(root);
    return std::pair{mismatched == 0,
                     fmt("CLI determinism with IQME_THREADS 1 and 8: %d/%d CSV comparisons identical", compared - mismatched,
                         compared)};
  });

  criterion(12, [] {
    double m[2][2] = {};
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      CounterRng rng(12, 0, 0, static_cast<std::uint64_t>(k));
      const CMatrix u = circuit::haar_unitary(2, rng);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m[i][j] += std::norm(u(i, j));
    }
    double worst_moment = 0.0;
    for (auto& row : m)
      for (double x : row) worst_moment = std::max(worst_moment, std::abs(x / n - 0.5));
    const Eigen::Matrix4cd q = circuit::pair_charge();
    double worst_comm = 0.0;
    for (int k = 0; k < 10000; ++k) {
      CounterRng rng(13, static_cast<std::uint64_t>(k), 0, 0);
      const Eigen::Matrix4cd g = circuit::sample_gate(rng).matrix();
      worst_comm = std::max(worst_comm, (g * q - q * g).cwiseAbs().maxCoeff());
    }
    return std::pair{worst_moment <= 0.005 && worst_comm < 1e-12,
                     fmt("Haar: max |E|u_ij|^2 - 0.5| = %.4f over 100000 (tol 0.005), max |[U,Q]| = %.1e (tol 1e-12)",
                         worst_moment, worst_comm)};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
