#include "gqfi/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

namespace gqfi {

namespace {

constexpr complexd kI{0.0, 1.0};

int dim_of(int cutoff) { return (cutoff + 1) * (cutoff + 1); }

void require_cutoff(int cutoff) {
  if (cutoff < 1) {
    std::ostringstream msg;
    msg << "cutoff must be >= 1, got " << cutoff;
    throw std::invalid_argument(msg.str());
  }
}

// Truncated annihilation operator, a[k-1, k] = sqrt(k).
Eigen::MatrixXcd ladder(int cutoff) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(cutoff + 1, cutoff + 1);
  for (int k = 1; k <= cutoff; ++k) {
    a(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  return a;
}

// Truncating an anti-Hermitian generator keeps its exponential exactly
// unitary, so truncation error can never show up as lost norm at the build
// cutoff itself.  Modes are therefore built with this much headroom and
// projected down; the projected-away mass measures the leakage.
constexpr int kCutoffMargin = 24;

// Single-mode preparation squeeze -> displace -> rotate applied to vacuum,
// each factor a truncated matrix exponential of its generator.
Eigen::VectorXcd prepare_mode(double alpha_abs, double beta, double r,
                              double theta, double omega, int cutoff) {
  const int n = cutoff + 1;
  Eigen::VectorXcd vec = Eigen::VectorXcd::Zero(n);
  vec(0) = 1.0;

  const Eigen::MatrixXcd a = ladder(cutoff);
  if (r > 0.0) {
    const complexd xi = r * std::exp(kI * theta);
    const Eigen::MatrixXcd gen =
        0.5 * (std::conj(xi) * (a * a) - xi * (a.adjoint() * a.adjoint()));
    vec = gen.exp() * vec;
  }
  if (alpha_abs > 0.0) {
    const complexd alpha = alpha_abs * std::exp(kI * beta);
    const Eigen::MatrixXcd gen = alpha * a.adjoint() - std::conj(alpha) * a;
    vec = gen.exp() * vec;
  }
  if (omega != 0.0) {
    for (int k = 0; k < n; ++k) {
      vec(k) *= std::exp(kI * (omega * k));
    }
  }
  return vec;
}

// 50:50 beam splitter exp(-i pi/4 (a+b + ab+)) applied block-by-block on
// the total-photon-number sectors it conserves.  Amplitudes on sectors
// N > cutoff (which the truncated basis holds only partially) are zeroed
// first and their mass reported.
Eigen::VectorXcd apply_beam_splitter_fock(const Eigen::VectorXcd& psi,
                                          int cutoff, double* zeroed_mass) {
  const int n = cutoff + 1;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n * n);

  double zeroed = 0.0;
  for (int na = 0; na <= cutoff; ++na) {
    for (int nb = 0; nb <= cutoff; ++nb) {
      if (na + nb > cutoff) {
        zeroed += std::norm(psi(na * n + nb));
      }
    }
  }

  for (int total = 0; total <= cutoff; ++total) {
    const int m = total + 1;
    Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k + 1 <= total; ++k) {
      gen(k, k + 1) = gen(k + 1, k) =
          std::sqrt(static_cast<double>((k + 1) * (total - k)));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gen);

    const Eigen::MatrixXcd basis = es.eigenvectors().cast<complexd>();
    Eigen::VectorXcd amp(m);
    for (int k = 0; k <= total; ++k) {
      amp(k) = psi(k * n + (total - k));
    }
    Eigen::VectorXcd rotated = basis.transpose() * amp;
    for (int j = 0; j < m; ++j) {
      rotated(j) *= std::exp(-kI * (M_PI / 4.0 * es.eigenvalues()(j)));
    }
    Eigen::VectorXcd mixed = basis * rotated;
    for (int k = 0; k <= total; ++k) {
      out(k * n + (total - k)) = mixed(k);
    }
  }

  if (zeroed_mass != nullptr) {
    *zeroed_mass = zeroed;
  }
  return out;
}

// w(k, p) = P[Binomial(k, 1 - eta) = p], the probability that p of k
// photons are lost.  The Kraus amplitude |k> -> |k-p> is sqrt(w(k, p)).
// The thinning recurrence keeps every entry in [0, 1].
Eigen::MatrixXd binomial_weights(int cutoff, double eta) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(cutoff + 1, cutoff + 1);
  w(0, 0) = 1.0;
  for (int k = 1; k <= cutoff; ++k) {
    w(k, 0) = eta * w(k - 1, 0);
    for (int p = 1; p <= k; ++p) {
      w(k, p) = eta * w(k - 1, p) + (1.0 - eta) * w(k - 1, p - 1);
    }
  }
  return w;
}

// Shared branch bookkeeping for the operator-sum pipeline.
struct BranchPlan {
  int cutoff = 1;
  Eigen::VectorXcd psi_bs;           // state after the beam splitter
  Eigen::MatrixXd wa, wb;            // per-mode loss weights
  Eigen::VectorXcd phase;            // diagonal e^{i phi (n_a - n_b) / 2}
  std::vector<std::pair<int, int>> kept;  // retained (p, q) loss counts
  double leakage = 0.0;              // input truncation + zeroing + drop
};

BranchPlan make_branch_plan(const ProductStateParams& params,
                            const ChannelConfig& cfg, int cutoff,
                            double drop_tol) {
  validate(params);
  validate(cfg);
  require_cutoff(cutoff);

  BranchPlan plan;
  plan.cutoff = cutoff;
  const int n = cutoff + 1;

  const Eigen::VectorXcd psi_in = build_fock_input(params, cutoff);
  const double leak_in = std::max(0.0, 1.0 - psi_in.squaredNorm());

  double zeroed = 0.0;
  plan.psi_bs = apply_beam_splitter_fock(psi_in, cutoff, &zeroed);

  plan.wa = binomial_weights(cutoff, cfg.eta_a);
  plan.wb = binomial_weights(cutoff, cfg.eta_b);

  plan.phase.resize(n * n);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      plan.phase(k * n + l) = std::exp(kI * (cfg.phi * 0.5 * (k - l)));
    }
  }

  // Branch weights |K_{a,p} K_{b,q} psi|^2, factored through the partial
  // sums over mode a so the full table costs O(cutoff^3).
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(n, n);  // (p, l)
  for (int p = 0; p <= cutoff; ++p) {
    for (int k = p; k <= cutoff; ++k) {
      const double weight = plan.wa(k, p);
      if (weight == 0.0) continue;
      for (int l = 0; l <= cutoff; ++l) {
        partial(p, l) += weight * std::norm(plan.psi_bs(k * n + l));
      }
    }
  }
  struct Weighted {
    double mass;
    int p, q;
  };
  std::vector<Weighted> order;
  order.reserve(n * n);
  double total = 0.0;
  for (int p = 0; p <= cutoff; ++p) {
    for (int q = 0; q <= cutoff; ++q) {
      double mass = 0.0;
      for (int l = q; l <= cutoff; ++l) {
        mass += plan.wb(l, q) * partial(p, l);
      }
      if (mass > 0.0) {
        order.push_back({mass, p, q});
      }
      total += mass;
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Weighted& x, const Weighted& y) { return x.mass > y.mass; });

  double kept_mass = 0.0;
  double dropped = total;
  for (const Weighted& w : order) {
    if (dropped <= drop_tol) break;
    plan.kept.emplace_back(w.p, w.q);
    kept_mass += w.mass;
    dropped = total - kept_mass;
  }
  plan.leakage = leak_in + zeroed + std::max(0.0, dropped);
  return plan;
}

// Branch vector U_phase K_{a,p} K_{b,q} |psi_bs> for one loss count pair.
void materialize_branch(const BranchPlan& plan, int p, int q,
                        Eigen::VectorXcd& out) {
  const int n = plan.cutoff + 1;
  out.setZero(n * n);
  for (int k = p; k <= plan.cutoff; ++k) {
    const double wa = plan.wa(k, p);
    if (wa == 0.0) continue;
    for (int l = q; l <= plan.cutoff; ++l) {
      const double w = wa * plan.wb(l, q);
      if (w == 0.0) continue;
      const int target = (k - p) * n + (l - q);
      out(target) += std::sqrt(w) * plan.phase(target) * plan.psi_bs(k * n + l);
    }
  }
}

// O|n_a, n_b> = gamma |target> for the monomial moment operators; returns
// false when the target falls outside the truncated basis.
bool moment_action(MomentOp which, int na, int nb, int cutoff, int* ta,
                   int* tb, double* gamma) {
  switch (which) {
    case MomentOp::a:
      if (na < 1) return false;
      *ta = na - 1, *tb = nb, *gamma = std::sqrt(static_cast<double>(na));
      return true;
    case MomentOp::a2:
      if (na < 2) return false;
      *ta = na - 2, *tb = nb;
      *gamma = std::sqrt(static_cast<double>(na) * (na - 1));
      return true;
    case MomentOp::adag_a:
      *ta = na, *tb = nb, *gamma = static_cast<double>(na);
      return true;
    case MomentOp::b:
      if (nb < 1) return false;
      *ta = na, *tb = nb - 1, *gamma = std::sqrt(static_cast<double>(nb));
      return true;
    case MomentOp::b2:
      if (nb < 2) return false;
      *ta = na, *tb = nb - 2;
      *gamma = std::sqrt(static_cast<double>(nb) * (nb - 1));
      return true;
    case MomentOp::bdag_b:
      *ta = na, *tb = nb, *gamma = static_cast<double>(nb);
      return true;
    case MomentOp::ab:
      if (na < 1 || nb < 1) return false;
      *ta = na - 1, *tb = nb - 1;
      *gamma = std::sqrt(static_cast<double>(na) * nb);
      return true;
    case MomentOp::ab_dag:
      if (na < 1 || nb >= cutoff) return false;
      *ta = na - 1, *tb = nb + 1;
      *gamma = std::sqrt(static_cast<double>(na) * (nb + 1));
      return true;
  }
  throw std::invalid_argument("unknown moment operator id");
}

complexd branch_moment(const Eigen::VectorXcd& v, MomentOp which, int cutoff) {
  const int n = cutoff + 1;
  complexd acc = 0.0;
  for (int na = 0; na <= cutoff; ++na) {
    for (int nb = 0; nb <= cutoff; ++nb) {
      const complexd amp = v(na * n + nb);
      if (amp == 0.0) continue;
      int ta = 0, tb = 0;
      double gamma = 0.0;
      if (!moment_action(which, na, nb, cutoff, &ta, &tb, &gamma)) continue;
      acc += std::conj(v(ta * n + tb)) * gamma * amp;
    }
  }
  return acc;
}

// Fisher information from an orthonormal significant eigenbasis:
//   I = 2 sum_{j,k in sig} (p_j - p_k)^2 / (p_j + p_k) |T_jk|^2
//     + 4 sum_{j in sig} p_j (<j|H^2|j> - sum_{k in sig} |T_jk|^2),
// the second line being the exact contribution of pairs with one index in
// the kernel (there the quotient degenerates to p_j).
double spectral_qfi_from_basis(const Eigen::MatrixXcd& modes,
                               const Eigen::VectorXd& p,
                               const Eigen::VectorXd& h) {
  const Eigen::Index n_sig = modes.cols();
  if (n_sig == 0) return 0.0;

  Eigen::MatrixXcd hw = modes;
  for (Eigen::Index j = 0; j < n_sig; ++j) {
    hw.col(j).array() *= h.array().cast<complexd>();
  }
  Eigen::MatrixXcd t = modes.adjoint() * hw;

  double pair_sum = 0.0;
  double kernel_sum = 0.0;
  for (Eigen::Index j = 0; j < n_sig; ++j) {
    for (Eigen::Index k = 0; k < n_sig; ++k) {
      const double denom = p(j) + p(k);
      if (denom <= 1e-12) continue;
      const double diff = p(j) - p(k);
      pair_sum += diff * diff / denom * std::norm(t(j, k));
    }
    const double outside = hw.col(j).squaredNorm() - t.col(j).squaredNorm();
    kernel_sum += p(j) * std::max(0.0, outside);
  }
  return 2.0 * pair_sum + 4.0 * kernel_sum;
}

void require_density_matrix(const FockDensityMatrix& state) {
  require_cutoff(state.cutoff);
  const int d = dim_of(state.cutoff);
  if (state.rho.rows() != d || state.rho.cols() != d) {
    std::ostringstream msg;
    msg << "density matrix is " << state.rho.rows() << "x" << state.rho.cols()
        << " but cutoff " << state.cutoff << " needs " << d << "x" << d;
    throw std::invalid_argument(msg.str());
  }
}

// For any factorizations rho_i = F_i F_i^+ the nonzero spectrum of
// sqrt(rho_1) rho_2 sqrt(rho_1) equals the squared singular values of
// F_2^+ F_1, so the fidelity is the squared nuclear norm of that small
// matrix.  Working with singular values keeps the tiny end of the spectrum
// at full relative accuracy (no squaring and re-rooting).
double fidelity_from_factors(const Eigen::MatrixXcd& factor_1,
                             const Eigen::MatrixXcd& factor_2) {
  const Eigen::MatrixXcd overlap = factor_2.adjoint() * factor_1;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(overlap);
  const double sum = svd.singularValues().sum();
  return sum * sum;
}

// Significant eigenpairs of branches * branches^+ through the Gram matrix:
// eigenvectors are branches * g / sqrt(lambda), eigenvalues carry over.
void branch_eigensystem(const FockBranchState& st, double support_cut,
                        Eigen::MatrixXcd* modes, Eigen::VectorXd* p) {
  const Eigen::MatrixXcd gram = st.branches.adjoint() * st.branches;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);

  std::vector<Eigen::Index> sig;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    if (es.eigenvalues()(j) > support_cut) sig.push_back(j);
  }
  modes->resize(st.branches.rows(), static_cast<Eigen::Index>(sig.size()));
  p->resize(static_cast<Eigen::Index>(sig.size()));
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const double lambda = es.eigenvalues()(sig[i]);
    (*p)(static_cast<Eigen::Index>(i)) = lambda;
    modes->col(static_cast<Eigen::Index>(i)) =
        st.branches * es.eigenvectors().col(sig[i]) / std::sqrt(lambda);
  }
}

// ln E[z^(a+a)] for one input mode, from the exact Gaussian generating
// function; +inf once z passes the convergence limit.
struct ModeGeneratingFn {
  double mu2 = 0.0;      // |<a>|^2
  double nc = 0.0;       // central <a+a>, sinh^2 r
  double mc_abs = 0.0;   // |central <aa>|, cosh r sinh r
  double mc_re = 0.0;    // Re(central <aa> conj(<a>)^2)

  double z_limit() const {
    const double s = nc + mc_abs;
    return s > 0.0 ? 1.0 + 1.0 / s : std::numeric_limits<double>::infinity();
  }

  double ln_g(double z) const {
    const double s = 1.0 - z;
    const double d = (1.0 + s * nc) * (1.0 + s * nc) - s * s * mc_abs * mc_abs;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    const double expo = -(s / d) * ((1.0 + s * nc) * mu2 - s * mc_re);
    return expo - 0.5 * std::log(d);
  }
};

ModeGeneratingFn mode_generating_fn(double alpha_abs, double beta, double r,
                                    double theta) {
  ModeGeneratingFn fn;
  fn.mu2 = alpha_abs * alpha_abs;
  fn.nc = std::sinh(r) * std::sinh(r);
  fn.mc_abs = std::cosh(r) * std::sinh(r);
  // central <aa> = -e^{i(theta + 2 omega)} cosh r sinh r and <a>^2 carries
  // e^{2i(beta + omega)}; the rotation angle cancels in the product.
  fn.mc_re = -fn.mc_abs * fn.mu2 * std::cos(theta - 2.0 * beta);
  return fn;
}

}  // namespace

PhaseGenerator phase_generator(int cutoff) {
  require_cutoff(cutoff);
  const int n = cutoff + 1;
  PhaseGenerator gen;
  gen.cutoff = cutoff;
  gen.h.resize(n * n);
  for (int na = 0; na <= cutoff; ++na) {
    for (int nb = 0; nb <= cutoff; ++nb) {
      gen.h(na * n + nb) = 0.5 * (na - nb);
    }
  }
  return gen;
}

int auto_cutoff(const ProductStateParams& params, double tail_target,
                int cap) {
  validate(params);
  if (!(tail_target > 0.0) || cap < 1) {
    throw std::invalid_argument("auto_cutoff needs tail_target > 0, cap >= 1");
  }

  const ModeGeneratingFn ga = mode_generating_fn(
      params.alpha_abs_a, params.beta_a, params.r_a, params.theta_a);
  const ModeGeneratingFn gb = mode_generating_fn(
      params.alpha_abs_b, params.beta_b, params.r_b, params.theta_b);

  const double z_hi = std::max(
      std::min({ga.z_limit(), gb.z_limit(), 1.0 + 1e6}) * (1.0 - 1e-9),
      1.0 + 1e-12);
  constexpr int kGrid = 240;
  std::vector<double> ln_z(kGrid), ln_ga(kGrid), ln_gb(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    const double frac = static_cast<double>(i) / (kGrid - 1);
    const double z =
        1.0 + std::exp(std::log(1e-4) +
                       frac * (std::log(z_hi - 1.0) - std::log(1e-4)));
    ln_z[i] = std::log(z);
    ln_ga[i] = ga.ln_g(z);
    ln_gb[i] = gb.ln_g(z);
  }
  const auto tail_bound = [&](int c, bool mode_a_only, bool mode_b_only) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
      double ln_num = 0.0;
      if (!mode_b_only) ln_num += ln_ga[i];
      if (!mode_a_only) ln_num += ln_gb[i];
      best = std::min(best, ln_num - (c + 1) * ln_z[i]);
    }
    return std::exp(best);
  };

  const double nbar_mode =
      std::max(params.alpha_abs_a * params.alpha_abs_a +
                   std::sinh(params.r_a) * std::sinh(params.r_a),
               params.alpha_abs_b * params.alpha_abs_b +
                   std::sinh(params.r_b) * std::sinh(params.r_b));
  const int floor_rule = std::max(
      16, static_cast<int>(std::ceil(nbar_mode + 6.0 * std::sqrt(nbar_mode + 1.0))));

  for (int c = floor_rule; c <= cap; ++c) {
    if (tail_bound(c, true, false) <= 0.25 * tail_target &&
        tail_bound(c, false, true) <= 0.25 * tail_target &&
        tail_bound(c, false, false) <= 0.5 * tail_target) {
      return c;
    }
  }
  std::ostringstream msg;
  msg << "no cutoff <= " << cap << " reaches tail target " << tail_target
      << "; the state is too large for this verification route";
  throw std::invalid_argument(msg.str());
}

Eigen::VectorXcd build_fock_input(const ProductStateParams& params,
                                  int cutoff) {
  validate(params);
  require_cutoff(cutoff);
  const int n = cutoff + 1;
  const int work = cutoff + kCutoffMargin;

  const Eigen::VectorXcd full_a =
      prepare_mode(params.alpha_abs_a, params.beta_a, params.r_a,
                   params.theta_a, params.omega_a, work);
  const Eigen::VectorXcd full_b =
      prepare_mode(params.alpha_abs_b, params.beta_b, params.r_b,
                   params.theta_b, params.omega_b, work);

  for (const auto* mode : {&full_a, &full_b}) {
    const double leak = mode->tail(work - cutoff).squaredNorm();
    if (leak >= 1e-8) {
      std::ostringstream msg;
      msg << "single-mode truncation leakage " << leak << " at cutoff "
          << cutoff << "; increase the cutoff for this state";
      throw std::invalid_argument(msg.str());
    }
  }

  const Eigen::VectorXcd mode_a = full_a.head(n);
  const Eigen::VectorXcd mode_b = full_b.head(n);
  Eigen::VectorXcd psi(n * n);
  for (int k = 0; k <= cutoff; ++k) {
    for (int l = 0; l <= cutoff; ++l) {
      psi(k * n + l) = mode_a(k) * mode_b(l);
    }
  }
  return psi;
}

FockDensityMatrix loss_channel(const FockDensityMatrix& state, double eta_a,
                               double eta_b) {
  require_density_matrix(state);
  for (double eta : {eta_a, eta_b}) {
    if (!std::isfinite(eta) || eta < 0.0 || eta > 1.0) {
      std::ostringstream msg;
      msg << "transmissivity must lie in [0, 1], got " << eta;
      throw std::invalid_argument(msg.str());
    }
  }

  const int cutoff = state.cutoff;
  const int n = cutoff + 1;
  const int d = dim_of(cutoff);
  const Eigen::MatrixXd wa = binomial_weights(cutoff, eta_a);
  const Eigen::MatrixXd wb = binomial_weights(cutoff, eta_b);

  // Each Kraus operator is a single sub-diagonal band, so the operator sum
  // is a weighted shift: for loss count p on mode a,
  //   rho'[(k-p, l), (k'-p, l')] += sqrt(w(k,p) w(k',p)) rho[(k, l), (k', l')].
  const auto apply_mode_a = [&](const Eigen::MatrixXcd& rho,
                                const Eigen::MatrixXd& w) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
    for (int p = 0; p <= cutoff; ++p) {
      for (int k = p; k <= cutoff; ++k) {
        for (int kk = p; kk <= cutoff; ++kk) {
          const double amp = std::sqrt(w(k, p) * w(kk, p));
          if (amp == 0.0) continue;
          out.block((k - p) * n, (kk - p) * n, n, n) +=
              amp * rho.block(k * n, kk * n, n, n);
        }
      }
    }
    return out;
  };
  const auto apply_mode_b = [&](const Eigen::MatrixXcd& rho,
                                const Eigen::MatrixXd& w) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
    for (int p = 0; p <= cutoff; ++p) {
      for (int l = p; l <= cutoff; ++l) {
        for (int ll = p; ll <= cutoff; ++ll) {
          const double amp = std::sqrt(w(l, p) * w(ll, p));
          if (amp == 0.0) continue;
          for (int k = 0; k < n; ++k) {
            for (int kk = 0; kk < n; ++kk) {
              out(k * n + l - p, kk * n + ll - p) +=
                  amp * rho(k * n + l, kk * n + ll);
            }
          }
        }
      }
    }
    return out;
  };

  FockDensityMatrix out;
  out.cutoff = cutoff;
  out.leakage = state.leakage;
  out.rho = apply_mode_b(apply_mode_a(state.rho, wa), wb);
  return out;
}

FockBranchState output_branches(const ProductStateParams& params,
                                const ChannelConfig& cfg, int cutoff,
                                double drop_tol) {
  const BranchPlan plan = make_branch_plan(params, cfg, cutoff, drop_tol);
  const int d = dim_of(cutoff);

  FockBranchState st;
  st.cutoff = cutoff;
  st.leakage = plan.leakage;
  st.branches.resize(d, static_cast<Eigen::Index>(plan.kept.size()));
  Eigen::VectorXcd branch(d);
  for (std::size_t i = 0; i < plan.kept.size(); ++i) {
    materialize_branch(plan, plan.kept[i].first, plan.kept[i].second, branch);
    st.branches.col(static_cast<Eigen::Index>(i)) = branch;
  }
  return st;
}

FockDensityMatrix materialize(const FockBranchState& st) {
  require_cutoff(st.cutoff);
  FockDensityMatrix out;
  out.cutoff = st.cutoff;
  out.leakage = st.leakage;
  out.rho.noalias() = st.branches * st.branches.adjoint();
  return out;
}

FockDensityMatrix output_density_matrix(const ProductStateParams& params,
                                        const ChannelConfig& cfg,
                                        int cutoff) {
  return materialize(output_branches(params, cfg, cutoff));
}

double qfi_spectral(const FockDensityMatrix& state,
                    const PhaseGenerator& gen) {
  require_density_matrix(state);
  if (gen.cutoff != state.cutoff) {
    throw std::invalid_argument("phase generator cutoff does not match state");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(state.rho);
  std::vector<Eigen::Index> sig;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    if (es.eigenvalues()(j) > 1e-12) sig.push_back(j);
  }
  Eigen::MatrixXcd modes(state.rho.rows(),
                         static_cast<Eigen::Index>(sig.size()));
  Eigen::VectorXd p(static_cast<Eigen::Index>(sig.size()));
  for (std::size_t i = 0; i < sig.size(); ++i) {
    modes.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(sig[i]);
    p(static_cast<Eigen::Index>(i)) = es.eigenvalues()(sig[i]);
  }
  return spectral_qfi_from_basis(modes, p, gen.h);
}

double qfi_spectral(const FockBranchState& st, const PhaseGenerator& gen) {
  require_cutoff(st.cutoff);
  if (gen.cutoff != st.cutoff) {
    throw std::invalid_argument("phase generator cutoff does not match state");
  }
  Eigen::MatrixXcd modes;
  Eigen::VectorXd p;
  branch_eigensystem(st, 1e-12, &modes, &p);
  return spectral_qfi_from_basis(modes, p, gen.h);
}

double uhlmann_fidelity(const FockDensityMatrix& rho_1,
                        const FockDensityMatrix& rho_2) {
  require_density_matrix(rho_1);
  require_density_matrix(rho_2);
  if (rho_1.cutoff != rho_2.cutoff) {
    std::ostringstream msg;
    msg << "fidelity needs matching cutoffs, got " << rho_1.cutoff << " and "
        << rho_2.cutoff;
    throw std::invalid_argument(msg.str());
  }

  // Factor each state over its support, eigenvalues below 1e-14 clamped to
  // zero (dropped from the factor).
  const auto support_factor = [](const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    std::vector<Eigen::Index> sig;
    for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
      if (es.eigenvalues()(j) > 1e-14) sig.push_back(j);
    }
    Eigen::MatrixXcd factor(rho.rows(), static_cast<Eigen::Index>(sig.size()));
    for (std::size_t i = 0; i < sig.size(); ++i) {
      factor.col(static_cast<Eigen::Index>(i)) =
          es.eigenvectors().col(sig[i]) * std::sqrt(es.eigenvalues()(sig[i]));
    }
    return factor;
  };
  return fidelity_from_factors(support_factor(rho_1.rho),
                               support_factor(rho_2.rho));
}

double uhlmann_fidelity(const FockBranchState& st_1,
                        const FockBranchState& st_2) {
  require_cutoff(st_1.cutoff);
  require_cutoff(st_2.cutoff);
  if (st_1.cutoff != st_2.cutoff) {
    std::ostringstream msg;
    msg << "fidelity needs matching cutoffs, got " << st_1.cutoff << " and "
        << st_2.cutoff;
    throw std::invalid_argument(msg.str());
  }
  return fidelity_from_factors(st_1.branches, st_2.branches);
}

complexd moment(const FockDensityMatrix& state, MomentOp which) {
  require_density_matrix(state);
  const int n = state.cutoff + 1;
  complexd acc = 0.0;
  // trace(rho O) = sum_x gamma_x rho(x, target(x)) for single-target O.
  for (int na = 0; na <= state.cutoff; ++na) {
    for (int nb = 0; nb <= state.cutoff; ++nb) {
      int ta = 0, tb = 0;
      double gamma = 0.0;
      if (!moment_action(which, na, nb, state.cutoff, &ta, &tb, &gamma)) {
        continue;
      }
      acc += gamma * state.rho(na * n + nb, ta * n + tb);
    }
  }
  return acc;
}

complexd moment(const FockBranchState& st, MomentOp which) {
  require_cutoff(st.cutoff);
  complexd acc = 0.0;
  for (Eigen::Index j = 0; j < st.branches.cols(); ++j) {
    acc += branch_moment(st.branches.col(j), which, st.cutoff);
  }
  return acc;
}

FockMoments oracle_moments(const ProductStateParams& params,
                           const ChannelConfig& cfg, int cutoff,
                           double drop_tol) {
  const BranchPlan plan = make_branch_plan(params, cfg, cutoff, drop_tol);
  const int d = dim_of(cutoff);

  FockMoments out;
  out.leakage = plan.leakage;
  constexpr MomentOp kOps[] = {MomentOp::a,  MomentOp::a2, MomentOp::adag_a,
                               MomentOp::b,  MomentOp::b2, MomentOp::bdag_b,
                               MomentOp::ab, MomentOp::ab_dag};
  complexd sums[8] = {};
  Eigen::VectorXcd branch(d);
  for (const auto& pq : plan.kept) {
    materialize_branch(plan, pq.first, pq.second, branch);
    for (int i = 0; i < 8; ++i) {
      sums[i] += branch_moment(branch, kOps[i], cutoff);
    }
  }
  out.a = sums[0], out.a2 = sums[1], out.adag_a = sums[2];
  out.b = sums[3], out.b2 = sums[4], out.bdag_b = sums[5];
  out.ab = sums[6], out.ab_dag = sums[7];
  return out;
}

}  // namespace gqfi
