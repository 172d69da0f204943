#include "gqfi/state.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gqfi {

namespace {

constexpr complexd kI(0.0, 1.0);

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "parameter " << name << " must be finite, got " << v;
    throw std::invalid_argument(msg.str());
  }
}

void require_magnitude(double v, const char* name) {
  require_finite(v, name);
  if (v < 0.0) {
    std::ostringstream msg;
    msg << "magnitude " << name << " must be >= 0, got " << v;
    throw std::invalid_argument(msg.str());
  }
}

void require_transmissivity(double v, const char* name) {
  require_finite(v, name);
  if (v < 0.0 || v > 1.0) {
    std::ostringstream msg;
    msg << "transmissivity " << name << " must lie in [0, 1], got " << v;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

Matrix4cd metric_k() {
  Matrix4cd k = Matrix4cd::Zero();
  k.diagonal() << 1.0, 1.0, -1.0, -1.0;
  return k;
}

void validate(const ProductStateParams& p) {
  require_finite(p.omega_a, "omega_a");
  require_finite(p.omega_b, "omega_b");
  require_magnitude(p.alpha_abs_a, "alpha_abs_a");
  require_magnitude(p.alpha_abs_b, "alpha_abs_b");
  require_finite(p.beta_a, "beta_a");
  require_finite(p.beta_b, "beta_b");
  require_magnitude(p.r_a, "r_a");
  require_magnitude(p.r_b, "r_b");
  require_finite(p.theta_a, "theta_a");
  require_finite(p.theta_b, "theta_b");
}

void validate(const ChannelConfig& cfg) {
  require_transmissivity(cfg.eta_a, "eta_a");
  require_transmissivity(cfg.eta_b, "eta_b");
  require_finite(cfg.phi, "phi");
}

double hermiticity_defect(const Matrix4cd& sigma) {
  return (sigma - sigma.adjoint()).cwiseAbs().maxCoeff();
}

GaussianState build_input_state(const ProductStateParams& p) {
  validate(p);

  // Rotation applied last:  <a> = e^{i omega} alpha, and the central
  // moments of a squeezed vacuum pick up e^{2 i omega} on <da^2>:
  //   <{da, da+}> = cosh 2r,   <{da, da}> = -e^{i(theta + 2 omega)} sinh 2r.
  const complexd alpha_a =
      p.alpha_abs_a * std::exp(kI * (p.beta_a + p.omega_a));
  const complexd alpha_b =
      p.alpha_abs_b * std::exp(kI * (p.beta_b + p.omega_b));
  const complexd sq_a =
      -std::exp(kI * (p.theta_a + 2.0 * p.omega_a)) * std::sinh(2.0 * p.r_a);
  const complexd sq_b =
      -std::exp(kI * (p.theta_b + 2.0 * p.omega_b)) * std::sinh(2.0 * p.r_b);

  GaussianState st;
  st.d << alpha_a, alpha_b, std::conj(alpha_a), std::conj(alpha_b);

  st.sigma = Matrix4cd::Zero();
  st.sigma(0, 0) = st.sigma(2, 2) = std::cosh(2.0 * p.r_a);
  st.sigma(1, 1) = st.sigma(3, 3) = std::cosh(2.0 * p.r_b);
  st.sigma(0, 2) = sq_a;
  st.sigma(2, 0) = std::conj(sq_a);
  st.sigma(1, 3) = sq_b;
  st.sigma(3, 1) = std::conj(sq_b);
  return st;
}

GaussianState apply_beam_splitter(const GaussianState& state) {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix4cd m = Matrix4cd::Zero();
  m(0, 0) = s;
  m(0, 1) = -kI * s;
  m(1, 0) = -kI * s;
  m(1, 1) = s;
  m(2, 2) = s;
  m(2, 3) = kI * s;
  m(3, 2) = kI * s;
  m(3, 3) = s;

  GaussianState out;
  out.d = m * state.d;
  out.sigma = m * state.sigma * m.adjoint();
  return out;
}

GaussianState apply_loss(const GaussianState& state, double eta_a,
                         double eta_b) {
  require_transmissivity(eta_a, "eta_a");
  require_transmissivity(eta_b, "eta_b");

  Eigen::Vector4d e;
  e << std::sqrt(eta_a), std::sqrt(eta_b), std::sqrt(eta_a), std::sqrt(eta_b);

  GaussianState out;
  out.d = e.cast<complexd>().asDiagonal() * state.d;
  out.sigma = e.asDiagonal() * state.sigma * e.asDiagonal();
  out.sigma.diagonal().array() +=
      (1.0 - e.array().square()).cast<complexd>();
  return out;
}

GaussianState apply_phase(const GaussianState& state, double phi) {
  require_finite(phi, "phi");

  Vector4cd m;
  const complexd ph = std::exp(kI * (phi / 2.0));
  m << ph, std::conj(ph), std::conj(ph), ph;

  GaussianState out;
  out.d = m.asDiagonal() * state.d;
  out.sigma = m.asDiagonal() * state.sigma * m.conjugate().asDiagonal();
  return out;
}

GaussianState interferometer_output(const ProductStateParams& params,
                                    const ChannelConfig& cfg) {
  validate(cfg);
  GaussianState st = build_input_state(params);
  st = apply_beam_splitter(st);
  st = apply_loss(st, cfg.eta_a, cfg.eta_b);
  st = apply_phase(st, cfg.phi);
  return st;
}

std::pair<double, double> symplectic_eigenvalues(const GaussianState& state) {
  // The spectrum of K Sigma is {+-tau_1, +-tau_2}, but extracting it via
  // tr((K Sigma)^2) and det(K Sigma) cancels products as large as
  // ||Sigma||^4 down to O(1) numbers, which loses every digit once the
  // squeezing is strong.  Sigma^{1/2} K Sigma^{1/2} is similar to
  // K Sigma and Hermitian, so its eigenvalues come out of a self-adjoint
  // solve with only an O(eps ||Sigma||) absolute error.
  const Matrix4cd sym = 0.5 * (state.sigma + state.sigma.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4cd> sigma_eig(sym);
  if (sigma_eig.info() != Eigen::Success) {
    throw std::runtime_error(
        "symplectic_eigenvalues: covariance eigendecomposition failed");
  }
  const Eigen::Vector4d lambda = sigma_eig.eigenvalues();
  const double sigma_scale = std::max(1.0, lambda(3));
  if (lambda(0) <= 1e-12 * sigma_scale) {
    throw std::runtime_error(
        "symplectic_eigenvalues: covariance is not positive definite");
  }
  const Matrix4cd root = sigma_eig.eigenvectors() *
                         lambda.cwiseSqrt().cast<complexd>().asDiagonal() *
                         sigma_eig.eigenvectors().adjoint();
  const Matrix4cd m = root * metric_k() * root;
  Eigen::SelfAdjointEigenSolver<Matrix4cd> m_eig(0.5 * (m + m.adjoint()));
  if (m_eig.info() != Eigen::Success) {
    throw std::runtime_error(
        "symplectic_eigenvalues: spectral solve failed");
  }

  // Eigenvalues arrive ascending as {-tau_1, -tau_2, tau_2, tau_1};
  // averaging each +- pair cancels part of the rounding noise.
  const Eigen::Vector4d mu = m_eig.eigenvalues();
  double tau1 = 0.5 * (mu(3) - mu(0));
  double tau2 = 0.5 * (mu(2) - mu(1));

  if (tau2 < 1.0 - std::max(1e-9, 1e-12 * sigma_scale)) {
    std::ostringstream msg;
    msg << "symplectic_eigenvalues: smaller eigenvalue " << tau2
        << " violates the physicality bound tau >= 1";
    throw std::runtime_error(msg.str());
  }
  // Sub-unit values inside the tolerance are rounding artefacts of an
  // eigenvalue that is exactly 1.
  tau2 = std::max(tau2, 1.0);
  tau1 = std::max(tau1, tau2);
  return {tau1, tau2};
}

std::pair<Vector4cd, Matrix4cd> state_derivative(
    const ProductStateParams& params, const ChannelConfig& cfg) {
  const GaussianState st = interferometer_output(params, cfg);

  // Only the final phase map depends on phi; differentiating
  // diag(e^{i phi/2}, e^{-i phi/2}, e^{-i phi/2}, e^{i phi/2}) gives the
  // generator (i/2) J with J = diag(1, -1, -1, 1).
  Eigen::Vector4d j;
  j << 1.0, -1.0, -1.0, 1.0;
  const Matrix4cd jm = j.cast<complexd>().asDiagonal();

  const Vector4cd d_dot = 0.5 * kI * (jm * st.d);
  const Matrix4cd sigma_dot = 0.5 * kI * (jm * st.sigma - st.sigma * jm);
  return {d_dot, sigma_dot};
}

double mean_photon_input(const ProductStateParams& p) {
  validate(p);
  const double sa = std::sinh(p.r_a);
  const double sb = std::sinh(p.r_b);
  return p.alpha_abs_a * p.alpha_abs_a + sa * sa + p.alpha_abs_b * p.alpha_abs_b +
         sb * sb;
}

}  // namespace gqfi
