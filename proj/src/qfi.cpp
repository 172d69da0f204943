#include "gqfi/qfi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gqfi {

namespace {

// Covariance condition number above which the formula is refused.
constexpr double kConditionLimit = 1e12;

// tau_1 - 1 below this counts as numerically pure: the covariance term
// of the formula is then a 0/0 and needs the loss-regularised limit
// instead of a direct evaluation.  The window widens with the size of
// the covariance because that is how the eigenvalue rounding error
// grows; states inside it by accident merely take the regularised
// route, which extrapolates to the same value.
constexpr double kPureTauWindow = 1e-7;

double pure_tau_window(const Matrix4cd& sigma) {
  return std::max(kPureTauWindow, 1e-10 * sigma.norm());
}

// Frobenius norm of sigma_dot below which the covariance term is taken
// as exactly zero (the covariance does not move with the phase at all,
// e.g. for coherent-only inputs).
constexpr double kQuietSigmaDot = 1e-4;

// Pipeline guarantee: the output symplectic spectrum is phase-independent.
// Floor of the relative eigenvalue gap tolerated between two phases
// (genuine spectral motion shows up at full scale, rounding noise stays
// near machine precision times the covariance size).
constexpr double kSpectrumMotionLimit = 1e-9;

double condition_number(const Matrix4cd& m) {
  Eigen::JacobiSVD<Matrix4cd> svd(m);
  const double smallest = svd.singularValues().minCoeff();
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues().maxCoeff() / smallest;
}

struct CovarianceTerm {
  double value = 0.0;     // full covariance contribution
  double tau_term = 0.0;  // the symplectic-eigenvalue part alone
};

// Covariance contribution for a state with moving covariance.  No purity
// guard here: callers keep |det(K sigma) - 1| away from the cancellation
// floor (the relative error of the enclosed difference grows like
// 1e-16 / |det A - 1|).
CovarianceTerm covariance_term(const Matrix4cd& sigma,
                               const Matrix4cd& sigma_dot,
                               const QfiOptions& options) {
  const Matrix4cd k = metric_k();
  const Matrix4cd a = k * sigma;
  const Matrix4cd a_dot = k * sigma_dot;
  const double det_a = a.determinant().real();

  const Eigen::FullPivLU<Matrix4cd> a_lu(a);
  const Matrix4cd a_inv_dot = a_lu.solve(a_dot);
  const double det_piece = det_a * (a_inv_dot * a_inv_dot).trace().real();

  const Matrix4cd quad = Matrix4cd::Identity() + a * a;
  const double det_quad = quad.determinant().real();
  if (det_quad <= 0.0) {
    throw std::runtime_error(
        "fisher information: det(1 + (K sigma)^2) is not positive");
  }
  const Eigen::FullPivLU<Matrix4cd> quad_lu(quad);
  const Matrix4cd quad_inv_dot = quad_lu.solve(a_dot);
  const double quad_piece =
      std::sqrt(det_quad) * (quad_inv_dot * quad_inv_dot).trace().real();

  // Motion of the symplectic eigenvalues from trace derivatives:
  // 4 tau_{1,2}^2 = tr(A^2) +- s with s = sqrt(tr(A^2)^2 - 16 det A), so
  // 8 tau_i tau_i_dot = d/dphi tr(A^2) +- s_dot.  A degenerate spectrum
  // (s ~ 0) contributes nothing: the prefactor tau_1^2 - tau_2^2 = s / 2.
  double tau_term = 0.0;
  const double trace_a2 = (a * a).trace().real();
  const double disc = trace_a2 * trace_a2 - 16.0 * det_a;
  const double split = std::sqrt(std::max(disc, 0.0));
  if (split >= 1e-8 * std::max(1.0, trace_a2)) {
    const double tau_1 = 0.5 * std::sqrt(trace_a2 + split);
    const double tau_2 = 0.5 * std::sqrt(trace_a2 - split);
    const double trace_dot = 2.0 * (a * a_dot).trace().real();
    const double det_dot = det_a * a_inv_dot.trace().real();
    const double split_dot =
        (2.0 * trace_a2 * trace_dot - 16.0 * det_dot) / (2.0 * split);
    const double tau_1_dot = (trace_dot + split_dot) / (8.0 * tau_1);
    const double tau_2_dot = (trace_dot - split_dot) / (8.0 * tau_2);
    const double denom_1 = options.tau_denominator_as_printed
                               ? tau_1 * tau_1 - 1.0
                               : std::pow(tau_1, 4) - 1.0;
    const double denom_2 = std::pow(tau_2, 4) - 1.0;
    // A unit eigenvalue sits at the vacuum floor, where its motion must
    // vanish; treat the fraction as zero there and reject genuine motion.
    auto fraction = [](double dot, double denom) {
      if (std::abs(denom) < 1e-9) {
        if (std::abs(dot) < 1e-9) return 0.0;
        throw std::runtime_error(
            "fisher information: symplectic eigenvalue at the vacuum floor "
            "with nonzero motion");
      }
      return dot * dot / denom;
    };
    tau_term = 4.0 * (tau_1 * tau_1 - tau_2 * tau_2) *
               (fraction(tau_2_dot, denom_2) - fraction(tau_1_dot, denom_1));
  }

  CovarianceTerm out;
  out.tau_term = tau_term;
  out.value = (det_piece + quad_piece + tau_term) / (2.0 * (det_a - 1.0));
  return out;
}

// Covariance contribution evaluated through the symplectic spectrum.
// tr((K sigma)^2) and det(K sigma) cancel products as large as
// ||sigma||^4 down to O(1) numbers, so for strongly squeezed states the
// determinant factors must come from the stable eigenvalues instead:
// det(K sigma) = (tau_1 tau_2)^2 and det(1 + (K sigma)^2) =
// ((1 + tau_1^2)(1 + tau_2^2))^2.  Only the LU solves touch the raw
// matrices.  The caller guarantees a phase-independent spectrum, so the
// eigenvalue-motion term is identically zero here.
CovarianceTerm covariance_term_spectral(const Matrix4cd& sigma,
                                        const Matrix4cd& sigma_dot) {
  GaussianState probe;
  probe.sigma = sigma;
  const auto taus = symplectic_eigenvalues(probe);
  const double det_a =
      taus.first * taus.first * taus.second * taus.second;

  const Matrix4cd a = metric_k() * sigma;
  const Matrix4cd a_dot = metric_k() * sigma_dot;
  const Eigen::FullPivLU<Matrix4cd> a_lu(a);
  const Matrix4cd a_inv_dot = a_lu.solve(a_dot);
  const double det_piece = det_a * (a_inv_dot * a_inv_dot).trace().real();

  const Matrix4cd quad = Matrix4cd::Identity() + a * a;
  const Eigen::FullPivLU<Matrix4cd> quad_lu(quad);
  const Matrix4cd quad_inv_dot = quad_lu.solve(a_dot);
  const double quad_piece = (1.0 + taus.first * taus.first) *
                            (1.0 + taus.second * taus.second) *
                            (quad_inv_dot * quad_inv_dot).trace().real();

  CovarianceTerm out;
  out.tau_term = 0.0;
  out.value = (det_piece + quad_piece) / (2.0 * (det_a - 1.0));
  return out;
}

double displacement_term(const Matrix4cd& sigma, const Vector4cd& d_dot) {
  const Eigen::FullPivLU<Matrix4cd> sigma_lu(sigma);
  return 2.0 * (d_dot.adjoint() * sigma_lu.solve(d_dot)).value().real();
}

// Covariance term at a proportionally deepened loss, for the pure-state
// limit eta' -> eta.
CovarianceTerm covariance_term_damped(const ProductStateParams& params,
                                      const ChannelConfig& cfg,
                                      double shrink) {
  ChannelConfig damped = cfg;
  damped.eta_a *= 1.0 - shrink;
  damped.eta_b *= 1.0 - shrink;
  const GaussianState out = interferometer_output(params, damped);
  const auto derivative = state_derivative(params, damped);
  return covariance_term_spectral(out.sigma, derivative.second);
}

QfiBreakdown finish_breakdown(QfiBreakdown breakdown) {
  breakdown.i_total =
      breakdown.i_matrix_part + breakdown.i_displacement_part;
  if (breakdown.i_total < -1e-8) {
    std::ostringstream msg;
    msg << "fisher information: negative value " << breakdown.i_total
        << " signals an internal inconsistency";
    throw std::runtime_error(msg.str());
  }
  return breakdown;
}

// Pipeline invariant: the phase map is a congruence that leaves the
// symplectic spectrum alone, so the eigenvalues at a finitely rotated
// phase must match the ones at phi up to the eigenvalue rounding noise
// (which grows with the size of the covariance).
void require_phase_independent_spectrum(const ProductStateParams& params,
                                        const ChannelConfig& cfg,
                                        const std::pair<double, double>& taus,
                                        double sigma_norm) {
  ChannelConfig rotated = cfg;
  rotated.phi += 0.35;
  const auto moved =
      symplectic_eigenvalues(interferometer_output(params, rotated));
  const double tol = std::max(kSpectrumMotionLimit, 1e-11 * sigma_norm);
  const double gap =
      std::max(std::abs(moved.first - taus.first) / std::max(1.0, taus.first),
               std::abs(moved.second - taus.second) /
                   std::max(1.0, taus.second));
  if (gap > tol) {
    std::ostringstream msg;
    msg << "fisher information: the output symplectic spectrum moved with "
           "the phase (relative gap "
        << gap << "); the pipeline spectrum must be phase-independent";
    throw std::runtime_error(msg.str());
  }
}

}  // namespace

QfiBreakdown qfi_general(const Matrix4cd& sigma, const Matrix4cd& sigma_dot,
                         const Vector4cd& d, const Vector4cd& d_dot,
                         const QfiOptions& options) {
  if (!sigma.allFinite() || !sigma_dot.allFinite() || !d.allFinite() ||
      !d_dot.allFinite()) {
    throw std::invalid_argument("fisher information: non-finite input");
  }
  if (hermiticity_defect(sigma) > 1e-10) {
    throw std::invalid_argument(
        "fisher information: covariance is not hermitian");
  }
  const double cond = condition_number(sigma);
  if (!(cond <= kConditionLimit)) {
    std::ostringstream msg;
    msg << "fisher information: covariance condition number " << cond
        << " exceeds " << kConditionLimit;
    throw std::invalid_argument(msg.str());
  }

  GaussianState probe;
  probe.d = d;
  probe.sigma = sigma;
  const auto taus = symplectic_eigenvalues(probe);

  QfiBreakdown breakdown;
  breakdown.tau_1 = taus.first;
  breakdown.tau_2 = taus.second;
  breakdown.i_displacement_part = displacement_term(sigma, d_dot);

  if (sigma_dot.norm() < kQuietSigmaDot) {
    breakdown.i_matrix_part = 0.0;
  } else if (taus.first - 1.0 < pure_tau_window(sigma)) {
    throw std::invalid_argument(
        "fisher information: covariance is numerically pure while its "
        "derivative is not negligible; evaluate through the "
        "parameter-level overload, which regularises the loss");
  } else {
    breakdown.i_matrix_part = covariance_term(sigma, sigma_dot, options).value;
  }
  return finish_breakdown(breakdown);
}

QfiBreakdown qfi_general(const ProductStateParams& params,
                         const ChannelConfig& cfg, const QfiOptions& options) {
  validate(params);
  validate(cfg);
  const GaussianState out = interferometer_output(params, cfg);
  const auto derivative = state_derivative(params, cfg);
  const Vector4cd& d_dot = derivative.first;
  const Matrix4cd& sigma_dot = derivative.second;
  const auto taus = symplectic_eigenvalues(out);

  QfiBreakdown breakdown;
  breakdown.tau_1 = taus.first;
  breakdown.tau_2 = taus.second;
  breakdown.i_displacement_part = displacement_term(out.sigma, d_dot);

  require_phase_independent_spectrum(params, cfg, taus, out.sigma.norm());
  if (sigma_dot.norm() < kQuietSigmaDot) {
    breakdown.i_matrix_part = 0.0;
  } else if (taus.first - 1.0 < pure_tau_window(out.sigma)) {
    // 0/0 of the covariance term at a pure output: evaluate at deepened
    // losses and extrapolate the shrink to zero (the error is linear in
    // the shrink, so 2 f(delta/2) - f(delta) cancels the leading order).
    // The residual grows like (shrink * n_bar)^2 while the subtractive
    // noise grows like 1e-16 / (shrink * n_bar), so the shrink is scaled
    // to hold shrink * n_bar ~ 3e-5 regardless of the state's size.
    const double shrink = 3e-5 / std::max(1.0, mean_photon_input(params));
    const CovarianceTerm coarse = covariance_term_damped(params, cfg, shrink);
    const CovarianceTerm fine =
        covariance_term_damped(params, cfg, 0.5 * shrink);
    breakdown.i_matrix_part = 2.0 * fine.value - coarse.value;
  } else {
    breakdown.i_matrix_part =
        covariance_term_spectral(out.sigma, sigma_dot).value;
  }
  return finish_breakdown(breakdown);
}

double fidelity_gaussian(const GaussianState& state_1,
                         const GaussianState& state_2) {
  double largest_tau = 1.0;
  for (const GaussianState* state : {&state_1, &state_2}) {
    if (!state->sigma.allFinite() || !state->d.allFinite()) {
      throw std::invalid_argument("gaussian fidelity: non-finite state");
    }
    if (hermiticity_defect(state->sigma) > 1e-10) {
      throw std::invalid_argument(
          "gaussian fidelity: covariance is not hermitian");
    }
    // Also rejects sub-vacuum covariances.
    largest_tau = std::max(largest_tau, symplectic_eigenvalues(*state).first);
  }
  const Matrix4cd k = metric_k();
  const Matrix4cd sum = state_1.sigma + state_2.sigma;
  const double delta = sum.determinant().real();
  if (delta <= 0.0) {
    throw std::runtime_error(
        "gaussian fidelity: det(sigma_1 + sigma_2) is not positive");
  }

  const Vector4cd gap = state_1.d - state_2.d;
  const Eigen::FullPivLU<Matrix4cd> sum_lu(sum);
  const double exponent = (gap.adjoint() * sum_lu.solve(gap)).value().real();

  // A pure pair has Lambda = 0 and a zero outer radicand identically;
  // evaluating them through the determinants would square-root the
  // rounding noise, so take the degenerate form directly.
  if (largest_tau <= 1.0 + 1e-8) {
    const double fidelity = 4.0 * std::exp(-exponent) / std::sqrt(delta);
    if (fidelity > 1.0 + 1e-9) {
      std::ostringstream msg;
      msg << "gaussian fidelity: value " << fidelity << " exceeds 1";
      throw std::runtime_error(msg.str());
    }
    return fidelity;
  }

  const double gamma =
      (Matrix4cd::Identity() + k * state_1.sigma * k * state_2.sigma)
          .determinant()
          .real();
  // Each det(sigma + K) is nonnegative for a physical covariance and hits
  // zero at purity, so noise-level negatives are clamped.
  const double lambda = std::max(((state_1.sigma + k).determinant() *
                                  (state_2.sigma + k).determinant())
                                     .real(),
                                 0.0);
  if (gamma < 0.0) {
    std::ostringstream msg;
    msg << "gaussian fidelity: negative purity invariant Gamma = " << gamma;
    throw std::runtime_error(msg.str());
  }
  const double root_sum = std::sqrt(gamma) + std::sqrt(lambda);
  double radicand = root_sum * root_sum - delta;
  if (radicand < -1e-9 * std::max(1.0, root_sum * root_sum)) {
    std::ostringstream msg;
    msg << "gaussian fidelity: negative radicand " << radicand
        << " (Gamma = " << gamma << ", Lambda = " << lambda
        << ", Delta = " << delta << ")";
    throw std::runtime_error(msg.str());
  }
  radicand = std::max(radicand, 0.0);

  // 4 e^{-x} / (root_sum - sqrt(radicand)), rationalised so a small
  // radicand never meets a subtractive cancellation.
  const double fidelity =
      4.0 * std::exp(-exponent) * (root_sum + std::sqrt(radicand)) / delta;
  if (fidelity > 1.0 + 1e-9) {
    std::ostringstream msg;
    msg << "gaussian fidelity: value " << fidelity << " exceeds 1";
    throw std::runtime_error(msg.str());
  }
  return fidelity;
}

double qfi_fidelity_limit(const ProductStateParams& params,
                          const ChannelConfig& cfg, double epsilon) {
  validate(params);
  validate(cfg);
  if (!(epsilon >= 1e-6 && epsilon <= 1e-2)) {
    throw std::invalid_argument(
        "fidelity-limit information: epsilon must lie in [1e-6, 1e-2]");
  }
  const GaussianState base = interferometer_output(params, cfg);
  const auto quotient = [&](double eps) {
    ChannelConfig shifted = cfg;
    shifted.phi += eps;
    const GaussianState moved = interferometer_output(params, shifted);
    return 8.0 * (1.0 - std::sqrt(fidelity_gaussian(base, moved))) /
           (eps * eps);
  };
  const double g_0 = quotient(epsilon);
  const double g_1 = quotient(0.5 * epsilon);
  const double g_2 = quotient(0.25 * epsilon);
  const double extrap_a = (4.0 * g_1 - g_0) / 3.0;
  const double extrap_b = (4.0 * g_2 - g_1) / 3.0;

  // Clean quadratic convergence makes successive extrapolants agree far
  // better than the raw quotients, but each quotient also carries an
  // absolute rounding error of about 4*dF/e^2, where dF is the noise in
  // the fidelity itself (measured below 4e-15 across mixed-state pairs;
  // budgeted at 2e-14 for headroom).  The finest quotient dominates, so
  // the extrapolant gap is allowed that much slack on top of the usual
  // one-quarter ratio bound; without the slack, states whose quadratic
  // error term is tiny would be rejected on pure rounding jitter.
  constexpr double kFidelityNoise = 2e-14;
  const double e_fine = 0.25 * epsilon;
  const double noise_gap = 8.0 * kFidelityNoise / (e_fine * e_fine);
  const double first_gap = std::abs(g_1 - g_0);
  const double extrap_gap = std::abs(extrap_b - extrap_a);
  const bool converged = extrap_gap <= 0.25 * first_gap + noise_gap;
  if (!converged) {
    std::ostringstream msg;
    msg << "fidelity-limit information did not converge: extrapolants "
        << extrap_a << " and " << extrap_b;
    throw std::runtime_error(msg.str());
  }
  return extrap_b;
}

ProductStateParams optimal_phases(const ProductStateParams& params) {
  validate(params);
  ProductStateParams aligned = params;
  aligned.omega_a = 0.0;
  aligned.omega_b = 0.0;
  aligned.theta_a = 0.0;
  aligned.theta_b = M_PI;
  aligned.beta_a = 0.5 * M_PI;
  aligned.beta_b = 0.0;
  return aligned;
}

std::string phase_condition_violation(const ProductStateParams& params) {
  constexpr double kTol = 1e-9;
  if (params.r_a > 0.0 && params.r_b > 0.0) {
    const double c = std::cos(params.theta_a - params.theta_b +
                              2.0 * params.omega_a - 2.0 * params.omega_b);
    if (std::abs(c + 1.0) > kTol) {
      return "cos(theta_a - theta_b + 2 omega_a - 2 omega_b) must be -1";
    }
  }
  if (params.alpha_abs_a > 0.0 && params.r_b > 0.0) {
    const double c = std::cos(params.theta_b - 2.0 * (params.beta_a +
                                                      params.omega_a -
                                                      params.omega_b));
    if (std::abs(c - 1.0) > kTol) {
      return "cos(theta_b - 2 (beta_a + omega_a - omega_b)) must be +1";
    }
  }
  if (params.alpha_abs_b > 0.0 && params.r_a > 0.0) {
    const double c = std::cos(params.theta_a - 2.0 * (params.beta_b -
                                                      params.omega_a +
                                                      params.omega_b));
    if (std::abs(c - 1.0) > kTol) {
      return "cos(theta_a - 2 (beta_b - omega_a + omega_b)) must be +1";
    }
  }
  return {};
}

double qfi_closed_form(const ProductStateParams& params, double eta) {
  validate(params);
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument(
        "closed-form information: eta must lie in [0, 1]");
  }
  const std::string violated = phase_condition_violation(params);
  if (!violated.empty()) {
    throw std::invalid_argument(
        "closed-form information requires aligned phases: " + violated);
  }
  const double r_a = params.r_a;
  const double r_b = params.r_b;
  const double alpha2_a = params.alpha_abs_a * params.alpha_abs_a;
  const double alpha2_b = params.alpha_abs_b * params.alpha_abs_b;

  // Both numerator and denominator vanish without squeezing; the term is
  // identically zero there.
  double squeeze_term = 0.0;
  if (r_a + r_b > 0.0) {
    const double c_a = std::cosh(2.0 * r_a);
    const double c_b = std::cosh(2.0 * r_b);
    const double s_sum = std::sinh(r_a + r_b);
    const double numerator =
        (eta * c_a + eta * c_b + (1.0 - eta) * std::cosh(2.0 * r_a - 2.0 * r_b) -
         eta - 1.0) *
        s_sum * s_sum;
    const double denominator =
        (1.0 - 2.0 * eta + 2.0 * eta * eta) * (c_a + c_b) +
        2.0 * eta * (1.0 - eta) * c_a * c_b -
        2.0 * (1.0 - eta * (1.0 - eta));
    squeeze_term = numerator / denominator;
  }

  const double disp_numerator =
      std::exp(r_a + r_b) * (alpha2_a + alpha2_b) -
      2.0 * eta * (std::exp(r_b) * std::sinh(r_a) * alpha2_a +
                   std::exp(r_a) * std::sinh(r_b) * alpha2_b);
  const double disp_denominator =
      (std::cosh(r_a) + (1.0 - 2.0 * eta) * std::sinh(r_a)) *
      (std::cosh(r_b) + (1.0 - 2.0 * eta) * std::sinh(r_b));
  return eta * (squeeze_term + disp_numerator / disp_denominator);
}

double qfi_dsv(double n_bar, double eta) {
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument(
        "squeezed-vacuum information: n_bar must be >= 0");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument(
        "squeezed-vacuum information: eta must lie in [0, 1]");
  }
  return eta * eta * n_bar * (n_bar + 2.0) /
         (1.0 + (1.0 - eta) * eta * n_bar);
}

double qfi_dsdv(double alpha, double r, double eta) {
  if (!(alpha >= 0.0) || !(r >= 0.0)) {
    throw std::invalid_argument(
        "displaced-squeezed information: alpha and r must be >= 0");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument(
        "displaced-squeezed information: eta must lie in [0, 1]");
  }
  const double e_2r = std::exp(2.0 * r);
  const double displacement =
      2.0 * e_2r * alpha * alpha / (eta + e_2r * (1.0 - eta));
  const double s_2r = std::sinh(2.0 * r);
  const double squeezing = eta * s_2r * s_2r /
                           (1.0 + eta * (1.0 - eta) * (std::cosh(2.0 * r) - 1.0));
  return eta * (displacement + squeezing);
}

PrecisionReport precision_report(const ProductStateParams& params,
                                 const ChannelConfig& cfg) {
  validate(params);
  validate(cfg);
  PrecisionReport report;
  report.n_bar = mean_photon_input(params);
  const bool closed_form_applies =
      cfg.eta_a == cfg.eta_b && phase_condition_violation(params).empty();
  report.qfi = closed_form_applies ? qfi_closed_form(params, cfg.eta_a)
                                   : qfi_general(params, cfg).i_total;
  report.delta_phi_bound = report.qfi > 0.0
                               ? 1.0 / std::sqrt(report.qfi)
                               : std::numeric_limits<double>::infinity();
  const double energy = 0.5 * (cfg.eta_a + cfg.eta_b) * report.n_bar;
  report.j_ratio =
      report.qfi > 0.0 && energy > 0.0 ? std::sqrt(report.qfi / energy) : 0.0;
  return report;
}

}  // namespace gqfi
