#pragma once

// Generator-variance bounds at fixed mean photon number.  Works in the
// total/difference photon basis |N, n> (N = n_a + n_b, n = n_a - n_b) of
// the intra-interferometer state, where the phase generator
// H = (a+a - b+b)/2 is diagonal with eigenvalue n/2.  Provides the
// coefficient choice that maximises the variance of H for a given total
// photon distribution, and the two-point distribution showing that the
// maximised spread grows without bound while the mean stays fixed.

#include <map>
#include <utility>

#include "gqfi/state.hpp"

namespace gqfi {

// Probability distribution over the total photon number N, finite
// support.  Weights must be nonnegative and sum to 1 within 1e-12.
struct TotalPhotonDistribution {
  std::map<int, double> p;  // N -> p_N
};

// Sparse amplitudes C_{N,n} of a pure two-mode state in the |N, n>
// basis.  Physical occupancies require n in {-N, -N+2, ..., N}; the
// squared amplitudes must sum to 1 within 1e-12.
struct TwoModeCoefficients {
  std::map<std::pair<int, int>, complexd> c;  // (N, n) -> C_{N,n}
};

// Throw std::invalid_argument when an invariant above is broken.
void validate(const TotalPhotonDistribution& dist);
void validate(const TwoModeCoefficients& coeffs);

// Mean total photon number sum_N p_N N.
double mean_photon(const TotalPhotonDistribution& dist);

// The coefficient choice maximising the variance of H at fixed level
// weights: everything on the extreme difference values,
// |C_{N,-N}|^2 = |C_{N,N}|^2 = p_N / 2 (level zero keeps all of p_0 on
// C_{0,0}).  Levels with zero weight are omitted.
TwoModeCoefficients max_variance_coeffs(const TotalPhotonDistribution& dist);

// Variance of the phase generator,
// (1/4) sum |C|^2 n^2 - [(1/2) sum |C|^2 n]^2; for the maximising
// coefficients this equals (1/4) sum_N p_N N^2.
double variance_h(const TwoModeCoefficients& coeffs);

// Two-point distribution {p_0 = 1 - nbar/N, p_N = nbar/N} occupying
// level N = max(ceil(4 kappa^2 / nbar), ceil(nbar), 1).  Its mean is
// exactly nbar while the maximised spread sqrt(nbar N) / 2 reaches any
// requested kappa — fixing the mean does not bound the generator
// variance.
struct VarianceDemo {
  TotalPhotonDistribution dist;
  int n_level = 1;       // the occupied level N
  double delta_h = 0.0;  // sqrt(nbar * N) / 2, at least kappa
};

// Requires n_bar > 0 and kappa > 0; throws std::invalid_argument
// otherwise, or when the occupied level would exceed 1e9.
VarianceDemo unbounded_demo(double n_bar, double kappa);

}  // namespace gqfi
