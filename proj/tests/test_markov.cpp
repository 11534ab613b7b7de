#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "iqme/markov.hpp"

using namespace iqme;
using namespace iqme::markov;
using Catch::Approx;

namespace {

// Moderate rates so that 1000 fixed steps are already in the asymptotic regime.
MarkovParams mild(double alpha = 2.0, double gp = 0.94, const char* label = "unit_dephasing/+1/+1/inverse") {
  return {alpha, gp, ModelInterpretation::parse(label)};
}

BlochVector random_disk(std::mt19937_64& gen, double rmax) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    BlochVector r{u(gen), u(gen), u(gen)};
    if (r.norm() < rmax) return r;
  }
}

// Plain RK4 on the matrix form, used as an independent long-time oracle.
BlochVector relax_matrix_form(BlochVector r0, const MarkovParams& p, double tau, double h) {
  CMatrix rho = bloch_to_density(r0).matrix();
  auto f = [&](const CMatrix& m) { return matrix_rhs(DensityMatrix(m), p).matrix(); };
  const int steps = static_cast<int>(std::ceil(tau / h));
  for (int i = 0; i < steps; ++i) {
    const CMatrix k1 = f(rho);
    const CMatrix k2 = f(rho + 0.5 * h * k1);
    const CMatrix k3 = f(rho + 0.5 * h * k2);
    const CMatrix k4 = f(rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return density_to_bloch(DensityMatrix(rho));
}

}  // namespace

TEST_CASE("interpretation grid has 32 distinct candidates in lexicographic order") {
  const auto grid = interpretation_grid();
  REQUIRE(grid.size() == 32);
  CHECK(grid.front().label() == "literal/+1/+1/inverse");
  CHECK(grid[1].label() == "literal/+1/+1/half_inverse");
  CHECK(grid.back().label() == "unit_dephasing/-1/-1/half_inverse");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(ModelInterpretation::parse(grid[i].label()) == grid[i]);
    for (std::size_t j = i + 1; j < grid.size(); ++j) CHECK_FALSE(grid[i] == grid[j]);
  }
  CHECK_THROWS_AS(ModelInterpretation::parse("magnitude/+1/+1"), std::invalid_argument);
  CHECK_THROWS_AS(ModelInterpretation::parse("other/+1/+1/inverse"), std::invalid_argument);
}

TEST_CASE("rate rules") {
  auto rates = [](const char* label, double alpha) {
    return effective_rates({alpha, 0.5, ModelInterpretation::parse(label)});
  };
  CHECK(rates("literal/+1/+1/inverse", 100).dephasing == Approx(-99));
  CHECK(rates("magnitude/+1/+1/inverse", 100).dephasing == Approx(99));
  CHECK(rates("percent/+1/+1/inverse", 100).decay == Approx(1.0));
  CHECK(rates("percent/+1/+1/inverse", 100).dephasing == Approx(0.0).margin(1e-15));
  CHECK(rates("unit_dephasing/+1/+1/inverse", 3).dephasing == Approx(1.0));
  CHECK(rates("unit_dephasing/-1/+1/inverse", 3).omega == Approx(-2.0));
  CHECK(rates("unit_dephasing/+1/-1/half_inverse", 3).omega == Approx(1.0));
  CHECK(rates("unit_dephasing/+1/-1/half_inverse", 3).pole == -1.0);
  CHECK_THROWS_AS(effective_rates({1.0, 0.0, {}}), ConfigurationError);
  CHECK_THROWS_AS(effective_rates({-1.0, 0.5, {}}), ConfigurationError);
}

TEST_CASE("bloch_rhs examples") {
  const MarkovParams p = mild();
  const BlochVector s = steady_state(p);
  CHECK(bloch_rhs(s, p).norm() < 1e-14);

  const EffectiveRates k = effective_rates(p);
  const BlochVector v = bloch_rhs({0.3, 0.0, 0.0}, p);
  CHECK(v.x == Approx(-0.3 * k.transverse()).epsilon(1e-14));
  const BlochVector w = bloch_rhs({0.0, 0.0, 0.0}, p);
  CHECK(v.y == Approx(w.y).margin(1e-15));
  CHECK(v.z == Approx(w.z).margin(1e-15));

  CHECK_THROWS_AS(bloch_rhs({0, 0, 0.2}, {100, 0.94, ModelInterpretation::parse("literal/+1/+1/inverse")}),
                  ConfigurationError);
  CHECK_THROWS_AS(bloch_rhs({0, 0, 1.1}, p), DomainError);
}

TEST_CASE("matrix form agrees with the Bloch form") {
  std::mt19937_64 gen(31);
  for (const ModelInterpretation& m : interpretation_grid()) {
    if (m.rule == RateRule::Literal) continue;
    for (double gp : {0.52, 0.94}) {
      const MarkovParams p{100.0, gp, m};
      for (int k = 0; k < 20; ++k) {
        const BlochVector r = random_disk(gen, 1.0);
        const TangentOperator t = matrix_rhs(bloch_to_density(r), p);
        CHECK(std::abs(t.matrix().trace()) < 1e-12);
        const BlochVector want = bloch_rhs(r, p);
        const CMatrix expected = 0.5 * (want.x * pauli::x() + want.y * pauli::y() + want.z * pauli::z());
        CHECK((t.matrix() - expected).cwiseAbs().maxCoeff() < 1e-10);
      }
      const TangentOperator at_rest = matrix_rhs(bloch_to_density(steady_state(p)), p);
      CHECK(at_rest.matrix().cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("steady state") {
  MarkovParams off = mild();
  off.interpretation.scale = HamiltonianScale::Off;
  const BlochVector s = steady_state(off);
  CHECK(s.x == 0.0);
  CHECK(s.y == Approx(0.0).margin(1e-15));
  CHECK(s.z == Approx(1.0).margin(1e-15));
  off.interpretation.decay_pole = -1;
  CHECK(steady_state(off).z == Approx(-1.0).margin(1e-15));

  // Literal rule at alpha = 100: transverse damping 1/2 pushes |y| = 2|z|/gamma' out of the ball.
  for (const ModelInterpretation& m : interpretation_grid()) {
    if (m.rule != RateRule::Literal) continue;
    CHECK_THROWS_AS(steady_state({100.0, 0.94, m}), UnphysicalInterpretationError);
  }

  for (const ModelInterpretation& m : interpretation_grid()) {
    if (m.rule == RateRule::Literal) continue;
    const BlochVector r = steady_state({100.0, 0.94, m});
    CHECK(r.norm() < 1.0);
  }
}

TEST_CASE("steady state matches long matrix-form integration") {
  for (const char* label : {"magnitude/-1/-1/half_inverse", "unit_dephasing/+1/+1/inverse", "percent/-1/+1/inverse"}) {
    const MarkovParams p{100.0, 0.94, ModelInterpretation::parse(label)};
    const double h = 0.2 / std::max(1.0, effective_rates(p).stiffness());
    const BlochVector end = relax_matrix_form({0.3, -0.4, 0.2}, p, 200.0, std::max(h, 2e-3));
    CHECK((end - steady_state(p)).norm() < 1e-6);
  }
}

TEST_CASE("integration") {
  const MarkovParams p = mild();
  const BlochVector s = steady_state(p);

  const Trajectory still = integrate(s, p);
  for (const BlochVector& r : still.states) CHECK((r - s).norm() < 1e-12);

  const Trajectory t = integrate({0.4, 0.2, -0.3}, p);
  REQUIRE(t.times.size() == static_cast<std::size_t>(effective_step_count(effective_rates(p), {})) + 1);
  const double gt = effective_rates(p).transverse();
  double worst = 0.0;
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    worst = std::max(worst, std::abs(t.states[i].x - 0.4 * std::exp(-gt * t.times[i])));
    CHECK(t.states[i].norm() <= 1.0 + 1e-6);
  }
  CHECK(worst < 1e-6);
  CHECK((t.states.back() - s).norm() < 1e-4);

  IntegrationOptions fine;
  fine.n_steps = 2000;
  const Trajectory t2 = integrate({0.4, 0.2, -0.3}, p, fine);
  CHECK((t2.states.back() - t.states.back()).norm() < 1e-8);

  CHECK_THROWS_AS(integrate({0, 0, 1.2}, p), DomainError);
}

TEST_CASE("stiff rates refine the step count to a multiple of n_steps") {
  const MarkovParams p{100.0, 0.94, ModelInterpretation::parse("magnitude/+1/+1/inverse")};
  const int steps = effective_step_count(effective_rates(p), {});
  CHECK(steps % 1000 == 0);
  CHECK(30.0 / steps * effective_rates(p).stiffness() <= 0.02 + 1e-12);
  IntegrationOptions loose;
  loose.max_step_stiffness = 1.0;
  CHECK(effective_step_count(effective_rates(mild()), loose) == 1000);
  const Trajectory t = integrate({0.0, 0.5, 0.5}, p);
  for (const BlochVector& r : t.states) CHECK(r.norm() <= 1.0 + 1e-6);
}

TEST_CASE("x decouples from (y, z)") {
  const MarkovParams p = mild(3.0, 0.52, "magnitude/-1/+1/half_inverse");
  const Trajectory a = integrate({0.5, 0.3, -0.2}, p);
  const Trajectory b = integrate({0.0, 0.3, -0.2}, p);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK(std::abs(a.states[i].y - b.states[i].y) < 1e-10);
    CHECK(std::abs(a.states[i].z - b.states[i].z) < 1e-10);
  }
}

TEST_CASE("trajectory length quadrature") {
  const MarkovParams p = mild();
  const BlochVector s = steady_state(p);
  const Trajectory still = integrate(s, p);
  for (double l : trajectory_length(still, MetricKind::SLD)) CHECK(l == Approx(0.0).margin(1e-12));

  // Straight diameter z: 0.99 -> -0.99. Bures length 1/2 int dz / sqrt(1 - z^2) = asin(0.99).
  const int n = 20000;
  std::vector<double> times(n + 1);
  std::vector<BlochVector> states(n + 1), vel(n + 1);
  for (int i = 0; i <= n; ++i) {
    times[i] = static_cast<double>(i) / n;
    states[i] = {0.0, 0.0, 0.99 - 1.98 * times[i]};
    vel[i] = {0.0, 0.0, -1.98};
  }
  const std::vector<double> ell = trajectory_length(states, vel, times, MetricKind::SLD);
  CHECK(ell.back() == Approx(std::asin(0.99)).margin(1e-4));
  CHECK(std::asin(0.99) == Approx(1.4293).margin(1e-4));
}

TEST_CASE("trajectory records") {
  const MarkovParams p = mild(2.0, 0.52);
  const TrajectoryRecord rec = simulate({0.0, -0.6, 0.3}, p, MetricKind::SLD);
  for (std::size_t i = 1; i < rec.ell.size(); ++i) {
    CHECK(rec.ell[i] >= rec.ell[i - 1]);
    CHECK(rec.residue[i] <= rec.residue[i - 1] + 1e-15);
  }
  for (std::size_t i = 0; i < rec.ell.size(); ++i) CHECK(rec.residue[i] == rec.total_length - rec.ell[i]);
  CHECK(rec.residue.back() >= -1e-6);
  CHECK(rec.residue.back() <= 1e-3);
  CHECK(rec.geo.back() < 0.01);
  for (double d : rec.geo) CHECK(d >= 0.0);
  CHECK(rec.total_length >= rec.geo.front() - 1e-6);
  CHECK(total_length({0.0, -0.6, 0.3}, p, MetricKind::SLD) == Approx(rec.total_length).epsilon(1e-14));

  IntegrationOptions fine;
  fine.n_steps = 2000;
  CHECK(std::abs(total_length({0.0, -0.6, 0.3}, p, MetricKind::SLD, fine) - rec.total_length) < 1e-4);

  const TrajectoryRecord at_rest = simulate(steady_state(p), p, MetricKind::SLD);
  CHECK(at_rest.geo.front() == Approx(0.0).margin(1e-7));
}

TEST_CASE("metric ordering on identical trajectories") {
  std::mt19937_64 gen(17);
  const MarkovParams p = mild(2.0, 0.94, "magnitude/+1/-1/inverse");
  for (int k = 0; k < 20; ++k) {
    const BlochVector r0 = random_disk(gen, 0.95);
    const Trajectory t = integrate(r0, p);
    const auto s = trajectory_length(t, MetricKind::SLD);
    const auto w = trajectory_length(t, MetricKind::WY);
    const auto h = trajectory_length(t, MetricKind::HM);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i] <= w[i] + 1e-9);
      CHECK(w[i] <= h[i] + 1e-9);
    }
  }
}

TEST_CASE("HM lengths need interior states") {
  MarkovParams p = mild();
  p.interpretation.scale = HamiltonianScale::Off;
  // Pure decay from the opposite pole ends on a pure state.
  CHECK_THROWS_AS(simulate({0.0, 0.0, -0.5}, p, MetricKind::HM), DomainError);
}

TEST_CASE("geodesic curve") {
  const MarkovParams p = mild();
  const BlochVector s = steady_state(p);
  CHECK(half_geodesic(s, s, MetricKind::SLD) == Approx(0.0).margin(1e-7));
  CHECK(half_geodesic(s, s, MetricKind::WY) == Approx(0.0).margin(1e-7));
  const Trajectory t = integrate({0.0, 0.7, -0.1}, p);
  const auto d = geodesic_curve(t.states, s);
  CHECK(d.back() < 0.01);
  CHECK(d.front() == Approx(std::acos(uhlmann_fidelity(bloch_to_density({0.0, 0.7, -0.1}), bloch_to_density(s))))
                         .margin(1e-9));
}

TEST_CASE("calibration recovers a planted interpretation") {
  // Anchors generated from a known candidate; calibrate must select it.
  const ModelInterpretation planted = ModelInterpretation::parse("unit_dephasing/-1/+1/half_inverse");
  std::vector<AnchorCase> anchors;
  const double alpha = 1.5;
  const std::vector<std::pair<BlochVector, BlochVector>> pts = {
      {{0, 0.5, 0.0}, {0, 0.0, 0.5}}, {{0, -0.95, -0.25}, {0, 0, 0}}, {{0, 0.9, 0.0}, {0, 0.0, 0.2}}};
  const double gps[] = {0.94, 0.52, 0.94};
  for (int c = 0; c < 3; ++c) {
    const MarkovParams p{alpha, gps[c], planted};
    const BlochVector s = steady_state(p);
    anchors.push_back({std::to_string(c), gps[c], pts[c].first, pts[c].second,
                       total_length(pts[c].first, p, MetricKind::SLD), total_length(pts[c].second, p, MetricKind::SLD),
                       half_geodesic(pts[c].first, s, MetricKind::SLD), half_geodesic(pts[c].second, s, MetricKind::SLD)});
  }
  const CalibrationReport rep = run_calibration(anchors, alpha);
  REQUIRE(rep.has_winner());
  CHECK(rep.winner().interpretation == planted);
  CHECK(rep.best_deviation() < 1e-12);
  CHECK(calibrate(anchors, alpha) == planted);
  for (const CandidateResult& c : rep.candidates)
    if (c.physical) CHECK(c.residuals.size() == 12);
}

TEST_CASE("calibration failure carries the full residual table") {
  std::vector<AnchorCase> anchors = reference_anchors();
  for (AnchorCase& a : anchors) a.length_a = a.length_b = 10.0;
  try {
    calibrate(anchors);
    FAIL("expected a calibration failure");
  } catch (const CalibrationError& e) {
    CHECK(e.report().candidates.size() == 32);
    CHECK(e.report().best_deviation() > kCalibrationFailure);
  }
}

TEST_CASE("calibration report on the reference anchors") {
  const CalibrationReport rep = run_calibration();
  REQUIRE(rep.candidates.size() == 32);
  for (const CandidateResult& c : rep.candidates) {
    if (c.interpretation.rule == RateRule::Literal) {
      CHECK_FALSE(c.physical);
      CHECK_FALSE(c.reason.empty());
    } else {
      CHECK(c.physical);
      CHECK(c.residuals.size() == 16);
    }
  }
  REQUIRE(rep.has_winner());
  // Ties within 1e-12 resolve towards the earlier candidate.
  for (std::size_t i = 0; i < rep.best; ++i)
    if (rep.candidates[i].physical) CHECK(rep.candidates[i].max_deviation > rep.best_deviation() - 1e-12);
  const CalibrationReport again = run_calibration();
  CHECK(again.best == rep.best);
  CHECK(again.winner().residuals == rep.winner().residuals);
}

TEST_CASE("distance map") {
  const MarkovParams p = mild(2.0, 0.94);
  MapOptions opt;
  opt.spacing = 0.125;
  const auto pts = distance_map(p, MetricKind::SLD, opt);
  CHECK(pts.size() == disk_grid(0.125).size());
  for (const MapPoint& m : pts) {
    CHECK(m.y * m.y + m.z * m.z <= 1.0);
    CHECK(m.excess >= -1e-6);
    CHECK(m.excess == m.length - m.d0);
    CHECK(m.speed >= 0.0);
  }
  opt.clip_speed = true;
  for (const MapPoint& m : distance_map(p, MetricKind::SLD, opt)) CHECK(m.speed <= 3.0);

  const BlochVector s = steady_state(p);
  CHECK(total_length(s, p, MetricKind::SLD) == Approx(0.0).margin(1e-12));
  CHECK(disk_grid(0.5).size() == 9);
  CHECK_THROWS_AS(disk_grid(0.0), ConfigurationError);
}
