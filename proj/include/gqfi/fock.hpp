#pragma once

// Brute-force verification engine: simulates the interferometer pipeline on
// truncated two-mode Fock spaces and computes QFI, fidelity and moments
// with no input from the Gaussian formalism.  Basis index of |n_a, n_b> is
// n_a * (cutoff + 1) + n_b.

#include <complex>

#include <Eigen/Dense>

#include "gqfi/state.hpp"

namespace gqfi {

struct FockDensityMatrix {
  int cutoff = 1;        // per-mode photon-number cutoff
  Eigen::MatrixXcd rho;  // (cutoff+1)^2 x (cutoff+1)^2
  double leakage = 0.0;  // probability mass lost to truncation
};

// Diagonal generator H = (a+a - b+b)/2 that imprints the phase.
struct PhaseGenerator {
  int cutoff = 1;
  Eigen::VectorXd h;  // entries (n_a - n_b)/2 in basis order
};

// The interferometer output kept in operator-sum form: rho = branches *
// branches^+, one column per retained loss branch (one Kraus operator per
// arm).  Algebraically identical to the dense form but cheap to
// eigendecompose through the branch Gram matrix.
struct FockBranchState {
  int cutoff = 1;
  Eigen::MatrixXcd branches;  // (cutoff+1)^2 x M
  double leakage = 0.0;       // truncation + zeroed blocks + dropped branches
};

// The eight pipeline output moments evaluated by streaming over loss
// branches (no stored decomposition; memory-friendly at large cutoffs).
struct FockMoments {
  complexd a, a2, adag_a, b, b2, bdag_b, ab, ab_dag;
  double leakage = 0.0;
};

enum class MomentOp { a, a2, adag_a, b, b2, bdag_b, ab, ab_dag };

PhaseGenerator phase_generator(int cutoff);

// Smallest per-mode cutoff whose certified photon-number tail bound
// (Chernoff bound on the exact per-mode generating functions, optimised
// over the bound parameter) is below tail_target, never below
// max(16, ceil(nbar_mode + 6 sqrt(nbar_mode + 1))).  Throws
// std::invalid_argument if no cutoff <= cap suffices.
int auto_cutoff(const ProductStateParams& params, double tail_target, int cap);

// Tensor product of the per-mode preparations, built by truncated matrix
// exponentials of the squeeze / displace / rotate generators in that
// order.  Throws if either single-mode truncation leakage reaches 1e-8.
Eigen::VectorXcd build_fock_input(const ProductStateParams& params,
                                  int cutoff);

// Photon loss as an explicit Kraus operator sum on each mode.
FockDensityMatrix loss_channel(const FockDensityMatrix& rho, double eta_a,
                               double eta_b);

// Full pipeline (input, beam splitter, loss, phase) in operator-sum form.
// Branches are retained in decreasing weight until the dropped probability
// mass is below drop_tol; the drop is added to `leakage`.
FockBranchState output_branches(const ProductStateParams& params,
                                const ChannelConfig& cfg, int cutoff,
                                double drop_tol = 1e-15);

// rho = branches * branches^+ as a dense matrix.
FockDensityMatrix materialize(const FockBranchState& st);

// Dense pipeline output.
FockDensityMatrix output_density_matrix(const ProductStateParams& params,
                                        const ChannelConfig& cfg, int cutoff);

// Fisher information from the spectral decomposition of rho: pair terms
// (p_j - p_k)^2 / (p_j + p_k) |<j|H|k>|^2 over the significant spectrum
// plus the exact correction for pairs straddling the kernel.  Eigenvalue
// pairs with p_j + p_k <= 1e-12 are excluded (SLD support convention).
double qfi_spectral(const FockDensityMatrix& rho, const PhaseGenerator& gen);
double qfi_spectral(const FockBranchState& st, const PhaseGenerator& gen);

// Uhlmann fidelity [tr sqrt(sqrt(rho_1) rho_2 sqrt(rho_1))]^2; eigenvalues
// below 1e-14 are clamped to zero.  Throws on cutoff mismatch.
double uhlmann_fidelity(const FockDensityMatrix& rho_1,
                        const FockDensityMatrix& rho_2);
double uhlmann_fidelity(const FockBranchState& st_1,
                        const FockBranchState& st_2);

// trace(rho * op) with truncated ladder matrices.
complexd moment(const FockDensityMatrix& rho, MomentOp which);
complexd moment(const FockBranchState& st, MomentOp which);

FockMoments oracle_moments(const ProductStateParams& params,
                           const ChannelConfig& cfg, int cutoff,
                           double drop_tol = 1e-14);

}  // namespace gqfi
