#pragma once

// Quantum Fisher information of the lossy interferometer and the derived
// phase-estimation metrics.  The same quantity is reachable by four
// independent routes -- the general two-mode Gaussian formula, the
// fidelity finite-difference limit, the closed form at aligned phases,
// and the squeezed-vacuum special cases -- and the tests pin them against
// each other.

#include <string>

#include "gqfi/state.hpp"

namespace gqfi {

// Additive split of the information: the covariance contribution
// (including the symplectic-eigenvalue term, which vanishes whenever the
// symplectic spectrum is phase-independent, as it is for this pipeline)
// plus the displacement contribution 2 d_dot+ sigma^{-1} d_dot.
struct QfiBreakdown {
  double i_total = 0.0;
  double i_matrix_part = 0.0;
  double i_displacement_part = 0.0;
  double tau_1 = 1.0;  // symplectic eigenvalues of the output, tau_1 >= tau_2
  double tau_2 = 1.0;
};

// Phase-estimation summary: mean input photons, information, the
// Cramer-Rao bound delta_phi = 1/sqrt(I), and the gain over a coherent
// probe of the same energy, J = sqrt(I / (eta n_bar)) with eta the
// arm-averaged transmissivity.
struct PrecisionReport {
  double n_bar = 0.0;
  double qfi = 0.0;
  double delta_phi_bound = 0.0;  // +infinity when the information vanishes
  double j_ratio = 0.0;          // 0 when undefined (no photons or no information)
};

struct QfiOptions {
  // The symplectic-eigenvalue term is evaluated with the symmetric
  // denominators tau_i^4 - 1 by default; this switch restores the
  // asymmetric variant with tau_1^2 - 1.  Immaterial whenever the
  // spectrum does not move with the phase (the whole term is then zero).
  bool tau_denominator_as_printed = false;
};

// General two-mode Gaussian Fisher information from a state and its phase
// derivative.  Throws std::invalid_argument on non-Hermitian or
// ill-conditioned covariances (condition number above 1e12) and on
// numerically pure covariances with non-negligible derivatives (those are
// a 0/0 of the formula; use the parameter-level overload, which
// regularises the loss).  Throws std::runtime_error if the result falls
// below -1e-8.
QfiBreakdown qfi_general(const Matrix4cd& sigma, const Matrix4cd& sigma_dot,
                         const Vector4cd& d, const Vector4cd& d_dot,
                         const QfiOptions& options = {});

// The same formula evaluated on the interferometer pipeline with its
// analytic derivative.  Numerically pure outputs (largest symplectic
// eigenvalue within a scale-aware window of 1) are handled by evaluating
// the covariance term at slightly deepened losses eta -> eta (1 - delta)
// and extrapolating delta -> 0.  The symplectic-eigenvalue term is
// required to vanish here (the output spectrum is phase-independent); a
// violation raises std::runtime_error.
QfiBreakdown qfi_general(const ProductStateParams& params,
                         const ChannelConfig& cfg,
                         const QfiOptions& options = {});

// Uhlmann fidelity of two Gaussian states from covariance determinants
// and the displacement gap.  Returns a value in [0, 1 + 1e-9]; throws
// std::runtime_error (reporting the determinant invariants) if the outer
// radicand goes negative, and std::invalid_argument on unphysical inputs.
double fidelity_gaussian(const GaussianState& state_1,
                         const GaussianState& state_2);

// Fisher information as the distinguishability limit
// 8 (1 - sqrt F(rho_phi, rho_phi+eps)) / eps^2, Richardson-extrapolated
// over eps, eps/2, eps/4.  epsilon must lie in [1e-6, 1e-2]; the default
// balances truncation against the 1 - sqrt(F) cancellation.  Throws
// std::runtime_error carrying both extrapolants when they disagree.
double qfi_fidelity_limit(const ProductStateParams& params,
                          const ChannelConfig& cfg, double epsilon = 2e-3);

// Canonical phase assignment maximising the information at fixed
// magnitudes: omega_a = omega_b = theta_a = beta_b = 0, theta_b = pi,
// beta_a = pi/2.  Satisfies all three alignment conditions exactly.
ProductStateParams optimal_phases(const ProductStateParams& params);

// Empty string when every binding phase-alignment condition holds within
// 1e-9; otherwise names the first violated cosine.  A condition binds
// only when the magnitudes multiplying it are nonzero, so e.g. any phases
// pass for a coherent-only input.
std::string phase_condition_violation(const ProductStateParams& params);

// Closed-form information at aligned phases and symmetric loss, as a
// function of the squeezing magnitudes, displacement magnitudes and eta
// alone.  Throws std::invalid_argument when a binding alignment condition
// is violated (naming it) or eta lies outside [0, 1].
double qfi_closed_form(const ProductStateParams& params, double eta);

// Displaced-squeezed-vacuum pair with all photons in squeezing:
// I = eta^2 nbar (nbar + 2) / (1 + (1 - eta) eta nbar).
double qfi_dsv(double n_bar, double eta);

// Equal displaced-squeezed modes (alpha, r per mode):
// I = eta { 2 e^{2r} alpha^2 / (eta + e^{2r}(1 - eta))
//           + eta sinh^2(2r) / (1 + eta (1 - eta)(cosh 2r - 1)) }.
double qfi_dsdv(double alpha, double r, double eta);

// Bundled Cramer-Rao metrics.  Uses the closed form when its
// preconditions hold (aligned phases, eta_a = eta_b), the general route
// otherwise; delta_phi_bound is +infinity when the information vanishes.
PrecisionReport precision_report(const ProductStateParams& params,
                                 const ChannelConfig& cfg);

}  // namespace gqfi
