#pragma once

// Two-mode Gaussian states in the mode-operator basis u = (a, b, a+, b+),
// represented by the mean vector d = <u> and the covariance matrix
//   sigma_ij = <{du_i, du_j+}>   (du = u - <u>, anticommutator ordering),
// so the vacuum has sigma = identity.  All pipeline stages (input
// preparation, 50:50 beam splitter, per-mode photon loss, differential
// phase) act as maps on (d, sigma).

#include <complex>
#include <utility>

#include <Eigen/Dense>

namespace gqfi {

using complexd = std::complex<double>;
using Eigen::Matrix4cd;
using Eigen::Vector4cd;

// Per-mode preparation R(omega) D(alpha) S(xi) |0>, applied right-to-left
// (squeeze, then displace, then rotate), with alpha = alpha_abs e^{i beta}
// and xi = r e^{i theta}.
struct ProductStateParams {
  double omega_a = 0.0;
  double omega_b = 0.0;
  double alpha_abs_a = 0.0;  // |alpha_a| >= 0
  double alpha_abs_b = 0.0;  // |alpha_b| >= 0
  double beta_a = 0.0;
  double beta_b = 0.0;
  double r_a = 0.0;  // squeezing magnitude >= 0
  double r_b = 0.0;
  double theta_a = 0.0;
  double theta_b = 0.0;
};

// Interferometer channel: per-mode transmissivities and the differential
// phase accumulated between the arms.
struct ChannelConfig {
  double eta_a = 1.0;  // in [0, 1]
  double eta_b = 1.0;  // in [0, 1]
  double phi = 0.0;
};

struct GaussianState {
  Vector4cd d = Vector4cd::Zero();
  Matrix4cd sigma = Matrix4cd::Identity();
};

// diag(1, 1, -1, -1): the metric pairing annihilators against creators.
// A = metric_k() * sigma drives the symplectic spectrum and the
// Fisher-information formula.
Matrix4cd metric_k();

// Throws std::invalid_argument on non-finite or negative-magnitude entries.
void validate(const ProductStateParams& params);
void validate(const ChannelConfig& cfg);

// Largest |sigma - sigma+| element; tests pin this below 1e-12.
double hermiticity_defect(const Matrix4cd& sigma);

// (d, sigma) of the product state; cross-mode covariances vanish.
GaussianState build_input_state(const ProductStateParams& params);

// 50:50 beam splitter, fixed as the mode map a -> (a - i b)/sqrt(2),
// b -> (b - i a)/sqrt(2).
GaussianState apply_beam_splitter(const GaussianState& state);

// Pure photon loss: d -> E d, sigma -> E sigma E + (1 - E^2) with
// E = diag(sqrt(eta_a), sqrt(eta_b), sqrt(eta_a), sqrt(eta_b)).
GaussianState apply_loss(const GaussianState& state, double eta_a,
                         double eta_b);

// Differential phase a -> e^{i phi/2} a, b -> e^{-i phi/2} b.  Commutes
// with apply_loss.
GaussianState apply_phase(const GaussianState& state, double phi);

// Full pipeline: input -> beam splitter -> loss -> phase.
GaussianState interferometer_output(const ProductStateParams& params,
                                    const ChannelConfig& cfg);

// Symplectic eigenvalues (tau_1 >= tau_2) of sigma from traces of A = K
// sigma:  tau_{1,2} = (1/2) sqrt(tr(A^2) +- sqrt(tr(A^2)^2 - 16 det A)).
// Throws std::runtime_error if the smaller eigenvalue falls below
// 1 - 1e-9 (unphysical covariance).
std::pair<double, double> symplectic_eigenvalues(const GaussianState& state);

// Exact analytic d/dphi of the pipeline output: with J = diag(1,-1,-1,1),
// d_dot = (i/2) J d and sigma_dot = (i/2)(J sigma - sigma J).
std::pair<Vector4cd, Matrix4cd> state_derivative(
    const ProductStateParams& params, const ChannelConfig& cfg);

// Total mean photon number of the input product state:
// |alpha_a|^2 + sinh^2 r_a + |alpha_b|^2 + sinh^2 r_b.
double mean_photon_input(const ProductStateParams& params);

}  // namespace gqfi
