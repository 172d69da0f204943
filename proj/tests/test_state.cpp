#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "gqfi/state.hpp"
#include "support/oracles.hpp"

using namespace gqfi;
using namespace gqfi::testing;

namespace {

constexpr complexd kI(0.0, 1.0);

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("input state: vacuum, squeezed and coherent examples") {
  ProductStateParams vac;
  const GaussianState v = build_input_state(vac);
  CHECK(max_abs(v.d) == 0.0);
  CHECK(max_abs(v.sigma - Matrix4cd::Identity()) < 1e-15);

  ProductStateParams sq;
  sq.r_a = 1.0;
  const GaussianState s = build_input_state(sq);
  const double n_a = 0.5 * (s.sigma(0, 0).real() - 1.0) + std::norm(s.d(0));
  CHECK(n_a == doctest::Approx(1.3810978455418157).epsilon(1e-14));
  CHECK(s.sigma(0, 2).real() == doctest::Approx(-std::sinh(2.0)).epsilon(1e-14));

  ProductStateParams coh;
  coh.alpha_abs_a = 2.0;
  coh.beta_a = M_PI / 2.0;
  const GaussianState c = build_input_state(coh);
  CHECK(std::abs(c.d(0) - complexd(0.0, 2.0)) < 1e-14);
  CHECK(std::abs(c.d(2) - complexd(0.0, -2.0)) < 1e-14);
  CHECK(max_abs(c.sigma - Matrix4cd::Identity()) < 1e-15);
}

TEST_CASE("input state: parameter validation") {
  ProductStateParams p;
  p.r_a = -0.5;
  CHECK_THROWS_AS(build_input_state(p), std::invalid_argument);

  p = ProductStateParams{};
  p.alpha_abs_b = -1.0;
  CHECK_THROWS_AS(build_input_state(p), std::invalid_argument);

  p = ProductStateParams{};
  p.theta_a = std::nan("");
  CHECK_THROWS_AS(build_input_state(p), std::invalid_argument);

  p = ProductStateParams{};
  p.omega_b = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(build_input_state(p), std::invalid_argument);
}

TEST_CASE("beam splitter: vacuum fixed point and mode mixing") {
  const GaussianState vac;
  const GaussianState out = apply_beam_splitter(vac);
  CHECK(max_abs(out.d) < 1e-15);
  CHECK(max_abs(out.sigma - Matrix4cd::Identity()) < 1e-15);

  const complexd alpha(0.7, 0.2);
  GaussianState one_arm;
  one_arm.d << alpha, 0.0, std::conj(alpha), 0.0;
  const GaussianState mixed = apply_beam_splitter(one_arm);
  CHECK(std::abs(mixed.d(0) - alpha / std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(mixed.d(1) + kI * alpha / std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(mixed.d(2) - std::conj(mixed.d(0))) < 1e-14);
  CHECK(std::abs(mixed.d(3) - std::conj(mixed.d(1))) < 1e-14);
}

TEST_CASE("beam splitter: preserves hermiticity on random states") {
  std::mt19937 rng(7001);
  for (int i = 0; i < 25; ++i) {
    const GaussianState st = build_input_state(random_params(rng, 2.0, 1.5));
    const GaussianState out = apply_beam_splitter(st);
    CHECK(hermiticity_defect(out.sigma) < 1e-14);
  }
}

TEST_CASE("loss: identity, full loss, photon-number scaling") {
  std::mt19937 rng(7002);
  const GaussianState st =
      apply_beam_splitter(build_input_state(random_params(rng, 2.0, 1.5)));

  const GaussianState same = apply_loss(st, 1.0, 1.0);
  CHECK(max_abs(same.d - st.d) < 1e-15);
  CHECK(max_abs(same.sigma - st.sigma) < 1e-15);

  const GaussianState dark = apply_loss(st, 0.0, 0.0);
  CHECK(max_abs(dark.d) < 1e-15);
  CHECK(max_abs(dark.sigma - Matrix4cd::Identity()) < 1e-15);

  ProductStateParams sq;
  sq.r_a = 1.0;
  const GaussianState damped = apply_loss(build_input_state(sq), 0.5, 0.5);
  const double n_a = 0.5 * (damped.sigma(0, 0).real() - 1.0);
  CHECK(n_a == doctest::Approx(0.5 * 1.3810978455418157).epsilon(1e-13));

  CHECK_THROWS_AS(apply_loss(st, 1.2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(apply_loss(st, 0.5, -0.1), std::invalid_argument);
}

TEST_CASE("loss: composition multiplies transmissivities") {
  std::mt19937 rng(7003);
  std::uniform_real_distribution<double> eta(0.1, 1.0);
  for (int i = 0; i < 25; ++i) {
    const GaussianState st =
        apply_beam_splitter(build_input_state(random_params(rng, 2.0, 1.5)));
    const double ea1 = eta(rng), eb1 = eta(rng), ea2 = eta(rng),
                 eb2 = eta(rng);
    const GaussianState twice = apply_loss(apply_loss(st, ea1, eb1), ea2, eb2);
    const GaussianState once = apply_loss(st, ea1 * ea2, eb1 * eb2);
    CHECK(max_abs(twice.d - once.d) < 1e-12);
    CHECK(max_abs(twice.sigma - once.sigma) < 1e-12);
  }
}

TEST_CASE("phase: identity at 0, sign flip of means at 2pi") {
  std::mt19937 rng(7004);
  const GaussianState st =
      apply_beam_splitter(build_input_state(random_params(rng, 2.0, 1.5)));

  const GaussianState same = apply_phase(st, 0.0);
  CHECK(max_abs(same.d - st.d) < 1e-15);
  CHECK(max_abs(same.sigma - st.sigma) < 1e-15);

  // phi = 2pi multiplies each mode operator by e^{+-i pi} = -1, so the
  // covariance returns to itself while the means flip sign.
  const GaussianState turn = apply_phase(st, 2.0 * M_PI);
  CHECK(max_abs(turn.d + st.d) < 1e-13);
  CHECK(max_abs(turn.sigma - st.sigma) < 1e-13);
}

TEST_CASE("phase and loss commute") {
  std::mt19937 rng(7005);
  std::uniform_real_distribution<double> eta(0.0, 1.0);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  for (int i = 0; i < 25; ++i) {
    const GaussianState st =
        apply_beam_splitter(build_input_state(random_params(rng, 2.0, 1.5)));
    const double ea = eta(rng), eb = eta(rng), phi = phase(rng);
    const GaussianState pl = apply_phase(apply_loss(st, ea, eb), phi);
    const GaussianState lp = apply_loss(apply_phase(st, phi), ea, eb);
    CHECK(max_abs(pl.d - lp.d) < 1e-13);
    CHECK(max_abs(pl.sigma - lp.sigma) < 1e-13);
  }
}

TEST_CASE("pipeline: vacuum input stays vacuum") {
  ProductStateParams vac;
  ChannelConfig cfg{0.37, 0.81, 1.3};
  const GaussianState out = interferometer_output(vac, cfg);
  CHECK(max_abs(out.d) < 1e-15);
  CHECK(max_abs(out.sigma - Matrix4cd::Identity()) < 1e-15);
}

TEST_CASE("pipeline: squeezed-pair covariance entries at eta = 1") {
  // r_a = r_b with opposite squeezing phases: the diagonal-block
  // interference term cancels (Q = 0) and the off-diagonal amplitude
  // doubles (R = 2 sinh 2r).
  const double r = 0.65;
  const ProductStateParams p = dsv_params(r);
  ChannelConfig cfg{1.0, 1.0, 0.9};
  const GaussianState out = interferometer_output(p, cfg);

  CHECK(std::abs(out.sigma(0, 1)) < 1e-14);  // Q/2
  const complexd r_entry = -2.0 * out.sigma(0, 2) *
                           std::exp(-kI * cfg.phi);  // entry = -e^{i phi} R/2
  CHECK(r_entry.real() == doctest::Approx(2.0 * std::sinh(2.0 * r)).epsilon(1e-13));
  CHECK(std::abs(r_entry.imag()) < 1e-14);
}

TEST_CASE("pipeline: matches the explicit symmetric-loss covariance") {
  std::mt19937 rng(7006);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  const double etas[] = {0.3, 0.7, 1.0};
  for (int i = 0; i < 60; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    const double eta = etas[i % 3];
    ChannelConfig cfg{eta, eta, phase(rng)};
    const GaussianState out = interferometer_output(p, cfg);
    const Matrix4cd ref = symmetric_loss_covariance(p, eta, cfg.phi);
    CHECK(max_abs(out.sigma - ref) < 1e-12);
    CHECK(hermiticity_defect(out.sigma) < 1e-12);
  }
}

TEST_CASE("pipeline: output moments match the closed forms") {
  std::mt19937 rng(7007);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  const double etas[] = {0.3, 0.7, 1.0};
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    const double eta = etas[i % 3];
    ChannelConfig cfg{eta, eta, phase(rng)};
    const GaussianState out = interferometer_output(p, cfg);
    const Moments got = moments_from_state(out);
    const Moments want = expected_moments(p, cfg);
    worst = std::max(worst, max_moment_deviation(got, want));
  }
  CHECK(worst < 1e-11);
}

TEST_CASE("pipeline: asymmetric losses keep moments consistent") {
  std::mt19937 rng(7008);
  std::uniform_real_distribution<double> eta(0.1, 1.0);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    ChannelConfig cfg{eta(rng), eta(rng), phase(rng)};
    const GaussianState out = interferometer_output(p, cfg);
    worst = std::max(
        worst, max_moment_deviation(moments_from_state(out),
                                    expected_moments(p, cfg)));
  }
  CHECK(worst < 1e-11);
}

TEST_CASE("symplectic eigenvalues: pure states sit at 1") {
  std::mt19937 rng(7009);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  for (int i = 0; i < 25; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    ChannelConfig cfg{1.0, 1.0, phase(rng)};
    const auto [t1, t2] = symplectic_eigenvalues(interferometer_output(p, cfg));
    CHECK(t1 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(t2 == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("symplectic eigenvalues: lossy closed form") {
  // cosh(2r) = 3 at half transmissivity gives tau = sqrt(2) exactly.
  const double r = 0.5 * std::acosh(3.0);
  ChannelConfig cfg{0.5, 0.5, 0.4};
  const auto [t1, t2] =
      symplectic_eigenvalues(interferometer_output(dsv_params(r), cfg));
  CHECK(t1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(t2 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  ProductStateParams p;
  p.r_a = 1.0;
  p.r_b = 0.3;
  ChannelConfig cfg2{0.8, 0.8, 1.1};
  const auto [u1, u2] =
      symplectic_eigenvalues(interferometer_output(p, cfg2));
  const double ta = tau_closed_form(1.0, 0.8);
  const double tb = tau_closed_form(0.3, 0.8);
  CHECK(u1 == doctest::Approx(std::max(ta, tb)).epsilon(1e-10));
  CHECK(u2 == doctest::Approx(std::min(ta, tb)).epsilon(1e-10));
}

TEST_CASE("symplectic eigenvalues: closed form across a random grid") {
  std::mt19937 rng(7010);
  std::uniform_real_distribution<double> eta(0.05, 1.0);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  for (int i = 0; i < 60; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    const double e = eta(rng);
    ChannelConfig cfg{e, e, phase(rng)};
    const auto [t1, t2] =
        symplectic_eigenvalues(interferometer_output(p, cfg));
    const double ta = tau_closed_form(p.r_a, e);
    const double tb = tau_closed_form(p.r_b, e);
    CHECK(t1 == doctest::Approx(std::max(ta, tb)).epsilon(1e-10));
    CHECK(t2 == doctest::Approx(std::min(ta, tb)).epsilon(1e-10));
  }
}

TEST_CASE("symplectic eigenvalues: rejects unphysical covariances") {
  GaussianState bad;
  bad.sigma = 0.5 * Matrix4cd::Identity();
  CHECK_THROWS_AS(symplectic_eigenvalues(bad), std::runtime_error);
}

TEST_CASE("derivative: vacuum is phase-insensitive") {
  ProductStateParams vac;
  ChannelConfig cfg{0.8, 0.8, 0.3};
  const auto [d_dot, sigma_dot] = state_derivative(vac, cfg);
  CHECK(max_abs(d_dot) < 1e-15);
  CHECK(max_abs(sigma_dot) < 1e-15);
}

TEST_CASE("derivative: matches central finite differences") {
  std::mt19937 rng(7011);
  std::uniform_real_distribution<double> eta(0.1, 1.0);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  const double h = 1e-5;
  for (int i = 0; i < 30; ++i) {
    const ProductStateParams p = random_params(rng, 2.0, 1.5);
    ChannelConfig cfg{eta(rng), eta(rng), phase(rng)};
    const auto [d_dot, sigma_dot] = state_derivative(p, cfg);

    ChannelConfig up = cfg, dn = cfg;
    up.phi += h;
    dn.phi -= h;
    const GaussianState fwd = interferometer_output(p, up);
    const GaussianState bwd = interferometer_output(p, dn);
    const Vector4cd d_fd = (fwd.d - bwd.d) / (2.0 * h);
    const Matrix4cd sigma_fd = (fwd.sigma - bwd.sigma) / (2.0 * h);

    const double d_scale = std::max(1.0, d_fd.cwiseAbs().maxCoeff());
    const double s_scale = std::max(1.0, sigma_fd.cwiseAbs().maxCoeff());
    CHECK(max_abs(d_dot - d_fd) / d_scale < 1e-8);
    CHECK(max_abs(sigma_dot - sigma_fd) / s_scale < 1e-8);
  }
}

TEST_CASE("derivative: support pattern for a squeezed pair") {
  // Only entries carrying the phase factor differentiate to something
  // nonzero: (a,a+)-type corners, never the mode-diagonal entries.
  ChannelConfig cfg{0.7, 0.7, 0.5};
  const auto [d_dot, sigma_dot] = state_derivative(dsv_params(0.8), cfg);
  CHECK(max_abs(d_dot) < 1e-15);
  CHECK(std::abs(sigma_dot(0, 0)) < 1e-15);
  CHECK(std::abs(sigma_dot(1, 1)) < 1e-15);
  CHECK(std::abs(sigma_dot(0, 1)) < 1e-15);  // Q vanishes for equal r
  CHECK(std::abs(sigma_dot(0, 3)) < 1e-15);  // S carries no phi
  CHECK(std::abs(sigma_dot(0, 2)) > 0.1);    // the e^{i phi} R corner
  CHECK(std::abs(sigma_dot(1, 3)) > 0.1);
}

TEST_CASE("derivative: coherent input mean rotates at half rate") {
  ProductStateParams p;
  p.alpha_abs_a = 1.0;
  ChannelConfig cfg{0.6, 0.6, 0.2};
  const auto [d_dot, sigma_dot] = state_derivative(p, cfg);
  const GaussianState out = interferometer_output(p, cfg);
  CHECK(std::abs(d_dot(0)) ==
        doctest::Approx(0.5 * std::abs(out.d(0))).epsilon(1e-12));
  CHECK(std::abs(out.d(0)) ==
        doctest::Approx(std::sqrt(0.6 / 2.0)).epsilon(1e-12));
  CHECK(max_abs(sigma_dot) < 1e-15);
}

TEST_CASE("mean photon number of the input") {
  ProductStateParams zero;
  CHECK(mean_photon_input(zero) == 0.0);

  ProductStateParams sq;
  sq.r_a = sq.r_b = 1.0;
  CHECK(mean_photon_input(sq) ==
        doctest::Approx(2.0 * 1.3810978455418157).epsilon(1e-14));

  ProductStateParams coh;
  coh.alpha_abs_a = coh.alpha_abs_b = std::sqrt(10.0);
  CHECK(mean_photon_input(coh) == doctest::Approx(20.0).epsilon(1e-14));
}

TEST_CASE("physicality holds after every channel stage") {
  std::mt19937 rng(7012);
  std::uniform_real_distribution<double> eta(0.0, 1.0);
  std::uniform_real_distribution<double> phase(-6.0, 6.0);
  for (int i = 0; i < 40; ++i) {
    GaussianState st = build_input_state(random_params(rng, 2.0, 1.5));
    st = apply_beam_splitter(st);
    CHECK_NOTHROW(symplectic_eigenvalues(st));
    st = apply_loss(st, eta(rng), eta(rng));
    CHECK_NOTHROW(symplectic_eigenvalues(st));
    st = apply_phase(st, phase(rng));
    const auto [t1, t2] = symplectic_eigenvalues(st);
    CHECK(t2 >= 1.0 - 1e-9);
    CHECK(t1 >= t2);
  }
}
