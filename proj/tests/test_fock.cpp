#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "gqfi/fock.hpp"
#include "gqfi/state.hpp"
#include "support/oracles.hpp"

using gqfi::ChannelConfig;
using gqfi::complexd;
using gqfi::FockBranchState;
using gqfi::FockDensityMatrix;
using gqfi::FockMoments;
using gqfi::MomentOp;
using gqfi::PhaseGenerator;
using gqfi::ProductStateParams;

namespace {

constexpr complexd kI{0.0, 1.0};

double mode_a_mean_photons(const Eigen::VectorXcd& psi, int cutoff) {
  const int n = cutoff + 1;
  double acc = 0.0;
  for (int k = 0; k <= cutoff; ++k) {
    for (int l = 0; l <= cutoff; ++l) {
      acc += k * std::norm(psi(k * n + l));
    }
  }
  return acc;
}

// Phase imprint as an explicit diagonal conjugation, for order-swap checks.
Eigen::MatrixXcd phase_sandwich(const Eigen::MatrixXcd& rho, int cutoff,
                                double phi) {
  const int n = cutoff + 1;
  Eigen::VectorXcd diag(n * n);
  for (int k = 0; k <= cutoff; ++k) {
    for (int l = 0; l <= cutoff; ++l) {
      diag(k * n + l) = std::exp(kI * (phi * 0.5 * (k - l)));
    }
  }
  return diag.asDiagonal() * rho * diag.conjugate().asDiagonal();
}

double max_moment_gap(const FockMoments& got, const gqfi::testing::Moments& want) {
  double gap = 0.0;
  gap = std::max(gap, std::abs(got.a - want.a));
  gap = std::max(gap, std::abs(got.a2 - want.a2));
  gap = std::max(gap, std::abs(got.adag_a - want.adag_a));
  gap = std::max(gap, std::abs(got.b - want.b));
  gap = std::max(gap, std::abs(got.b2 - want.b2));
  gap = std::max(gap, std::abs(got.bdag_b - want.bdag_b));
  gap = std::max(gap, std::abs(got.ab - want.ab));
  gap = std::max(gap, std::abs(got.ab_dag - want.ab_dag));
  return gap;
}

FockMoments dense_moments(const FockDensityMatrix& rho) {
  FockMoments m;
  m.a = gqfi::moment(rho, MomentOp::a);
  m.a2 = gqfi::moment(rho, MomentOp::a2);
  m.adag_a = gqfi::moment(rho, MomentOp::adag_a);
  m.b = gqfi::moment(rho, MomentOp::b);
  m.b2 = gqfi::moment(rho, MomentOp::b2);
  m.bdag_b = gqfi::moment(rho, MomentOp::bdag_b);
  m.ab = gqfi::moment(rho, MomentOp::ab);
  m.ab_dag = gqfi::moment(rho, MomentOp::ab_dag);
  m.leakage = rho.leakage;
  return m;
}

}  // namespace

TEST_CASE("fock input reproduces the single-mode reference states") {
  SUBCASE("vacuum") {
    const Eigen::VectorXcd psi = gqfi::build_fock_input({}, 4);
    CHECK(std::abs(psi(0) - 1.0) < 1e-14);
    CHECK(psi.tail(psi.size() - 1).norm() < 1e-14);
  }

  SUBCASE("squeezed vacuum, r = 1") {
    ProductStateParams params;
    params.r_a = 1.0;
    const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
    CHECK(cutoff >= 16);
    const Eigen::VectorXcd psi = gqfi::build_fock_input(params, cutoff);
    CHECK(1.0 - psi.squaredNorm() < 1e-8);
    CHECK(mode_a_mean_photons(psi, cutoff) ==
          doctest::Approx(std::sinh(1.0) * std::sinh(1.0)).epsilon(1e-8));
    const int n = cutoff + 1;
    for (int k = 1; k <= cutoff; k += 2) {
      CHECK(std::abs(psi(k * n)) < 1e-12);
    }
  }

  SUBCASE("coherent state, |alpha| = 1") {
    ProductStateParams params;
    params.alpha_abs_a = 1.0;
    params.beta_a = 0.3;
    params.omega_a = 0.4;
    const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
    const Eigen::VectorXcd psi = gqfi::build_fock_input(params, cutoff);
    CHECK(mode_a_mean_photons(psi, cutoff) == doctest::Approx(1.0).epsilon(1e-9));
    const int n = cutoff + 1;
    double factorial = 1.0;
    for (int k = 0; k <= 3; ++k) {
      if (k > 0) factorial *= k;
      CHECK(std::abs(std::norm(psi(k * n)) - std::exp(-1.0) / factorial) < 1e-10);
    }
    // the displacement phase and the rotation both land on <a>
    const double arg = std::arg(psi(1 * n) / psi(0));
    CHECK(std::remainder(arg - (params.beta_a + params.omega_a), 2.0 * M_PI) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("a cutoff that truncates the state is rejected") {
    ProductStateParams params;
    params.r_a = 1.0;
    CHECK_THROWS_AS(gqfi::build_fock_input(params, 8), std::invalid_argument);
  }
}

TEST_CASE("auto cutoff sizes by the photon-number tail") {
  CHECK(gqfi::auto_cutoff({}, 1e-9, 120) == 16);  // vacuum floor

  ProductStateParams small;
  small.alpha_abs_a = 1.0;
  ProductStateParams big = gqfi::testing::dsv_params(1.0);
  const int c_small = gqfi::auto_cutoff(small, 1e-9, 120);
  const int c_big = gqfi::auto_cutoff(big, 1e-9, 120);
  CHECK(c_small < c_big);
  CHECK(gqfi::auto_cutoff(big, 1e-12, 160) > c_big);

  CHECK_THROWS_AS(gqfi::auto_cutoff(gqfi::testing::dsv_params(1.0), 1e-12, 20),
                  std::invalid_argument);
}

TEST_CASE("loss channel limits, trace preservation and the half-loss mean") {
  ProductStateParams params;
  params.r_a = 0.6;
  params.alpha_abs_b = 0.7;
  params.beta_b = 1.1;
  const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
  ChannelConfig lossless;
  const FockDensityMatrix rho =
      gqfi::output_density_matrix(params, lossless, cutoff);

  SUBCASE("eta = 1 is the identity") {
    const FockDensityMatrix out = gqfi::loss_channel(rho, 1.0, 1.0);
    CHECK((out.rho - rho.rho).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("eta = 0 empties both modes") {
    const FockDensityMatrix out = gqfi::loss_channel(rho, 0.0, 0.0);
    CHECK(std::abs(out.rho(0, 0) - rho.rho.trace()) < 1e-12);
    CHECK(std::abs(out.rho.trace() - rho.rho.trace()) < 1e-12);
    CHECK(out.rho.cwiseAbs().maxCoeff() ==
          doctest::Approx(std::abs(out.rho(0, 0))).epsilon(1e-12));
  }

  SUBCASE("the operator sum is trace preserving") {
    const FockDensityMatrix out = gqfi::loss_channel(rho, 0.63, 0.31);
    CHECK(std::abs(out.rho.trace() - rho.rho.trace()) < 1e-10);
  }

  SUBCASE("half loss on a squeezed mode halves the mean photon number") {
    ProductStateParams squeezed;
    squeezed.r_a = 1.0;
    const int c = gqfi::auto_cutoff(squeezed, 1e-9, 120);
    const Eigen::VectorXcd psi = gqfi::build_fock_input(squeezed, c);
    FockDensityMatrix pure;
    pure.cutoff = c;
    pure.rho = psi * psi.adjoint();
    pure.leakage = std::max(0.0, 1.0 - psi.squaredNorm());
    const FockDensityMatrix out = gqfi::loss_channel(pure, 0.5, 1.0);
    CHECK(std::real(gqfi::moment(out, MomentOp::adag_a)) ==
          doctest::Approx(0.5 * std::sinh(1.0) * std::sinh(1.0)).epsilon(1e-8));
  }

  SUBCASE("transmissivities outside [0, 1] are rejected") {
    CHECK_THROWS_AS(gqfi::loss_channel(rho, -0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(gqfi::loss_channel(rho, 0.5, 1.2), std::invalid_argument);
  }
}

TEST_CASE("pipeline output is a physical state") {
  ProductStateParams params;
  params.r_a = 0.45;
  params.theta_a = 0.9;
  params.alpha_abs_b = 0.8;
  params.beta_b = 2.1;
  params.omega_a = 0.3;
  ChannelConfig cfg;
  cfg.eta_a = 0.7;
  cfg.eta_b = 0.55;
  cfg.phi = 0.83;
  const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
  const FockDensityMatrix out = gqfi::output_density_matrix(params, cfg, cutoff);

  CHECK(out.leakage < 1e-8);
  CHECK(std::abs(out.rho.trace() - (1.0 - out.leakage)) < 1e-10);
  CHECK(std::real(out.rho.trace()) > 1.0 - 1e-6);
  CHECK(std::real(out.rho.trace()) < 1.0 + 1e-12);
  CHECK((out.rho - out.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.rho);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);

  SUBCASE("vacuum in, vacuum out") {
    const FockDensityMatrix vac = gqfi::output_density_matrix({}, cfg, 6);
    CHECK(std::abs(vac.rho(0, 0) - 1.0) < 1e-12);
    CHECK(vac.rho.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("phase imprint commutes with loss") {
  ProductStateParams params;
  params.r_a = 0.5;
  params.alpha_abs_b = 0.9;
  params.beta_b = 0.4;
  const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
  const double phi = 1.3;

  ChannelConfig lossless;
  const FockDensityMatrix bs = gqfi::output_density_matrix(params, lossless, cutoff);

  FockDensityMatrix phased = bs;
  phased.rho = phase_sandwich(bs.rho, cutoff, phi);

  const Eigen::MatrixXcd loss_then_phase =
      phase_sandwich(gqfi::loss_channel(bs, 0.62, 0.84).rho, cutoff, phi);
  const Eigen::MatrixXcd phase_then_loss =
      gqfi::loss_channel(phased, 0.62, 0.84).rho;

  CHECK((loss_then_phase - phase_then_loss).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("branch form and dense channel agree") {
  ProductStateParams params;
  params.r_a = 0.35;
  params.theta_a = 2.2;
  params.alpha_abs_a = 0.4;
  params.beta_a = 5.1;
  params.alpha_abs_b = 0.75;
  params.beta_b = 0.9;
  ChannelConfig cfg;
  cfg.eta_a = 0.66;
  cfg.eta_b = 0.48;
  cfg.phi = 0.77;
  const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);

  const FockDensityMatrix direct = gqfi::output_density_matrix(params, cfg, cutoff);

  ChannelConfig lossless;
  lossless.phi = 0.0;
  const FockDensityMatrix bs = gqfi::output_density_matrix(params, lossless, cutoff);
  Eigen::MatrixXcd reference =
      phase_sandwich(gqfi::loss_channel(bs, cfg.eta_a, cfg.eta_b).rho, cutoff,
                     cfg.phi);

  CHECK((direct.rho - reference).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("output moments match the analytic forms") {
  SUBCASE("squeezed pair with symmetric loss") {
    const ProductStateParams params = gqfi::testing::dsv_params(0.5);
    ChannelConfig cfg;
    cfg.eta_a = 0.7;
    cfg.eta_b = 0.7;
    cfg.phi = 0.3;
    const int cutoff = gqfi::auto_cutoff(params, 1e-12, 140);
    const FockMoments got = gqfi::oracle_moments(params, cfg, cutoff);
    CHECK(max_moment_gap(got, gqfi::testing::expected_moments(params, cfg)) < 1e-9);
  }

  SUBCASE("general state with asymmetric loss") {
    std::mt19937 rng(9101);
    const ProductStateParams params = gqfi::testing::random_params(rng, 0.9, 0.45);
    ChannelConfig cfg;
    cfg.eta_a = 0.82;
    cfg.eta_b = 0.57;
    cfg.phi = 1.9;
    const int cutoff = gqfi::auto_cutoff(params, 1e-12, 140);
    const FockMoments got = gqfi::oracle_moments(params, cfg, cutoff);
    CHECK(max_moment_gap(got, gqfi::testing::expected_moments(params, cfg)) < 1e-9);
  }

  SUBCASE("dense and streaming moments are the same numbers") {
    ProductStateParams params;
    params.alpha_abs_a = 0.6;
    params.beta_a = 0.2;
    params.r_b = 0.3;
    params.theta_b = 4.0;
    ChannelConfig cfg;
    cfg.eta_a = 0.8;
    cfg.eta_b = 0.71;
    cfg.phi = 0.5;
    const int cutoff = 14;
    const FockDensityMatrix dense = gqfi::output_density_matrix(params, cfg, cutoff);
    const FockMoments streamed = gqfi::oracle_moments(params, cfg, cutoff);
    CHECK(max_moment_gap(streamed, [&] {
            gqfi::testing::Moments m;
            const FockMoments d = dense_moments(dense);
            m.a = d.a, m.a2 = d.a2, m.adag_a = d.adag_a;
            m.b = d.b, m.b2 = d.b2, m.bdag_b = d.bdag_b;
            m.ab = d.ab, m.ab_dag = d.ab_dag;
            return m;
          }()) < 1e-12);
  }

  SUBCASE("unknown moment id is rejected") {
    const FockDensityMatrix vac = gqfi::output_density_matrix({}, {}, 4);
    CHECK_THROWS_AS(gqfi::moment(vac, static_cast<MomentOp>(99)),
                    std::invalid_argument);
  }
}

TEST_CASE("spectral fisher information reference values") {
  SUBCASE("vacuum carries no information") {
    const FockDensityMatrix vac = gqfi::output_density_matrix({}, {}, 6);
    CHECK(gqfi::qfi_spectral(vac, gqfi::phase_generator(6)) == 0.0);
  }

  SUBCASE("lossless squeezed pair at two photons") {
    const ProductStateParams params = gqfi::testing::dsv_params(std::asinh(1.0));
    const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
    const FockBranchState out = gqfi::output_branches(params, {}, cutoff);
    CHECK(out.branches.cols() == 1);
    CHECK(std::abs(gqfi::qfi_spectral(out, gqfi::phase_generator(cutoff)) - 8.0) <
          1e-4);
  }

  SUBCASE("half transmission drops the same state to 4/3") {
    const ProductStateParams params = gqfi::testing::dsv_params(std::asinh(1.0));
    ChannelConfig cfg;
    cfg.eta_a = 0.5;
    cfg.eta_b = 0.5;
    const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);
    const FockBranchState out = gqfi::output_branches(params, cfg, cutoff, 1e-13);
    CHECK(std::abs(gqfi::qfi_spectral(out, gqfi::phase_generator(cutoff)) -
                   4.0 / 3.0) < 1e-4);
  }

  SUBCASE("branch route equals the dense route") {
    ProductStateParams params;
    params.r_a = 0.3;
    params.theta_a = 1.0;
    params.alpha_abs_b = 0.5;
    params.beta_b = 2.6;
    ChannelConfig cfg;
    cfg.eta_a = 0.6;
    cfg.eta_b = 0.75;
    cfg.phi = 0.8;
    const int cutoff = 14;
    const PhaseGenerator gen = gqfi::phase_generator(cutoff);
    const double dense = gqfi::qfi_spectral(
        gqfi::output_density_matrix(params, cfg, cutoff), gen);
    const double branch =
        gqfi::qfi_spectral(gqfi::output_branches(params, cfg, cutoff), gen);
    CHECK(std::abs(dense - branch) < 1e-8 * std::max(1.0, dense));
  }
}

TEST_CASE("output eigenvalues do not depend on the phase") {
  ProductStateParams params;
  params.r_a = 0.4;
  params.alpha_abs_b = 0.7;
  params.beta_b = 1.3;
  ChannelConfig cfg_1, cfg_2;
  cfg_1.eta_a = cfg_2.eta_a = 0.7;
  cfg_1.eta_b = cfg_2.eta_b = 0.6;
  cfg_1.phi = 0.4;
  cfg_2.phi = 1.1;
  const int cutoff = gqfi::auto_cutoff(params, 1e-9, 120);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_1(
      gqfi::output_density_matrix(params, cfg_1, cutoff).rho);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_2(
      gqfi::output_density_matrix(params, cfg_2, cutoff).rho);
  CHECK((es_1.eigenvalues() - es_2.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("uhlmann fidelity") {
  ProductStateParams params_1;
  params_1.alpha_abs_a = 0.6;
  params_1.beta_a = 0.1;
  params_1.r_b = 0.25;
  ProductStateParams params_2 = params_1;
  params_2.alpha_abs_a = 0.9;
  params_2.beta_a = 0.7;
  const int cutoff = std::max(gqfi::auto_cutoff(params_1, 1e-9, 120),
                              gqfi::auto_cutoff(params_2, 1e-9, 120));

  SUBCASE("a state against itself") {
    ChannelConfig cfg;
    cfg.eta_a = 0.8;
    cfg.eta_b = 0.66;
    const FockDensityMatrix rho = gqfi::output_density_matrix(params_1, cfg, cutoff);
    CHECK(std::abs(gqfi::uhlmann_fidelity(rho, rho) - 1.0) < 1e-10);
  }

  SUBCASE("pure states reduce to the squared overlap") {
    ChannelConfig lossless;
    const FockBranchState b_1 = gqfi::output_branches(params_1, lossless, cutoff);
    const FockBranchState b_2 = gqfi::output_branches(params_2, lossless, cutoff);
    REQUIRE(b_1.branches.cols() == 1);
    REQUIRE(b_2.branches.cols() == 1);
    const double overlap =
        std::norm((b_1.branches.col(0).adjoint() * b_2.branches.col(0))(0));
    const double fid = gqfi::uhlmann_fidelity(gqfi::materialize(b_1),
                                              gqfi::materialize(b_2));
    CHECK(std::abs(fid - overlap) < 1e-10);
  }

  SUBCASE("branch route equals the dense route and is symmetric") {
    ChannelConfig cfg;
    cfg.eta_a = 0.72;
    cfg.eta_b = 0.58;
    cfg.phi = 0.35;
    const FockBranchState b_1 = gqfi::output_branches(params_1, cfg, cutoff);
    const FockBranchState b_2 = gqfi::output_branches(params_2, cfg, cutoff);
    const double via_branches = gqfi::uhlmann_fidelity(b_1, b_2);
    const double via_dense = gqfi::uhlmann_fidelity(gqfi::materialize(b_1),
                                                    gqfi::materialize(b_2));
    CHECK(std::abs(via_branches - via_dense) < 1e-9);
    CHECK(std::abs(gqfi::uhlmann_fidelity(b_2, b_1) - via_branches) < 1e-9);
  }

  SUBCASE("cutoff mismatch is rejected") {
    const FockDensityMatrix r_1 = gqfi::output_density_matrix({}, {}, 8);
    const FockDensityMatrix r_2 = gqfi::output_density_matrix({}, {}, 9);
    CHECK_THROWS_AS(gqfi::uhlmann_fidelity(r_1, r_2), std::invalid_argument);
  }
}
