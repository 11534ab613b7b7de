// Small tour of the qubit geometry: speeds under the three metrics, the
// Bures and Wigner-Yanase distances to the maximally mixed state, and the
// relaxation of one state under the single-qubit Lindbladian.

#include <cstdio>

#include "iqme/markov.hpp"
#include "iqme/qgeom.hpp"

int main() {
  using namespace iqme;
  const BlochVector r{0.0, 0.3, 0.5};
  const BlochVector v{0.2, -1.0, 0.4};
  std::printf("speed at r = (0, 0.3, 0.5), rdot = (0.2, -1, 0.4)\n");
  for (MetricKind m : {MetricKind::SLD, MetricKind::WY, MetricKind::HM}) {
    const double eig = petz_speed(bloch_to_density(r), TangentOperator::from_bloch(v), m);
    std::printf("  %-3s  eigenbasis %.6f  closed form %.6f\n", to_string(m).data(), eig,
                qubit_speed_closed_form(r, v, m));
  }

  const DensityMatrix rho = bloch_to_density(r);
  const DensityMatrix mixed = DensityMatrix::maximally_mixed(2);
  std::printf("distance to I/2: Bures %.6f  WY %.6f\n", geodesic_distance(rho, mixed, MetricKind::SLD),
              geodesic_distance(rho, mixed, MetricKind::WY));

  markov::MarkovParams p;
  p.alpha = 2.0;
  p.gamma_prime = 0.94;
  p.interpretation = markov::ModelInterpretation::parse("unit_dephasing/+1/+1/inverse");
  const markov::TrajectoryRecord rec = markov::simulate(r, p, MetricKind::SLD);
  const BlochVector s = markov::steady_state(p);
  std::printf("steady state (%.4f, %.4f, %.4f)\n", s.x, s.y, s.z);
  std::printf("L = %.6f  d(0) = %.6f  d(end) = %.2e\n", rec.total_length, rec.geo.front(), rec.geo.back());
}
