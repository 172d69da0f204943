#include "gqfi/variance.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gqfi {

namespace {

constexpr double kNormTolerance = 1e-12;

}  // namespace

void validate(const TotalPhotonDistribution& dist) {
  double total = 0.0;
  for (const auto& [level, weight] : dist.p) {
    if (level < 0) {
      std::ostringstream msg;
      msg << "photon distribution: negative level " << level;
      throw std::invalid_argument(msg.str());
    }
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      std::ostringstream msg;
      msg << "photon distribution: weight " << weight << " at level "
          << level << " is not a probability";
      throw std::invalid_argument(msg.str());
    }
    total += weight;
  }
  if (std::abs(total - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << "photon distribution: weights sum to " << total;
    throw std::invalid_argument(msg.str());
  }
}

void validate(const TwoModeCoefficients& coeffs) {
  double total = 0.0;
  for (const auto& [key, amplitude] : coeffs.c) {
    const int level = key.first;
    const int diff = key.second;
    if (level < 0 || std::abs(diff) > level || (level - diff) % 2 != 0) {
      std::ostringstream msg;
      msg << "two-mode coefficients: impossible occupancy (N = " << level
          << ", n = " << diff << ")";
      throw std::invalid_argument(msg.str());
    }
    if (!std::isfinite(std::abs(amplitude))) {
      throw std::invalid_argument("two-mode coefficients: non-finite amplitude");
    }
    total += std::norm(amplitude);
  }
  if (std::abs(total - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << "two-mode coefficients: squared amplitudes sum to " << total;
    throw std::invalid_argument(msg.str());
  }
}

double mean_photon(const TotalPhotonDistribution& dist) {
  validate(dist);
  double mean = 0.0;
  for (const auto& [level, weight] : dist.p) {
    mean += weight * level;
  }
  return mean;
}

TwoModeCoefficients max_variance_coeffs(const TotalPhotonDistribution& dist) {
  validate(dist);
  TwoModeCoefficients coeffs;
  for (const auto& [level, weight] : dist.p) {
    if (weight == 0.0) {
      continue;
    }
    if (level == 0) {
      coeffs.c[{0, 0}] = std::sqrt(weight);
    } else {
      const complexd edge = std::sqrt(0.5 * weight);
      coeffs.c[{level, -level}] = edge;
      coeffs.c[{level, level}] = edge;
    }
  }
  return coeffs;
}

double variance_h(const TwoModeCoefficients& coeffs) {
  validate(coeffs);
  double mean = 0.0;
  double second = 0.0;
  for (const auto& [key, amplitude] : coeffs.c) {
    const double diff = key.second;
    const double weight = std::norm(amplitude);
    mean += 0.5 * weight * diff;
    second += 0.25 * weight * diff * diff;
  }
  return second - mean * mean;
}

VarianceDemo unbounded_demo(double n_bar, double kappa) {
  if (!(n_bar > 0.0) || !std::isfinite(n_bar)) {
    throw std::invalid_argument(
        "variance demo: mean photon number must be positive");
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::invalid_argument(
        "variance demo: spread target must be positive");
  }
  // The occupied level: large enough that sqrt(nbar N) / 2 >= kappa, and
  // never below nbar so the level weight nbar / N stays a probability.
  const double raw_level = std::max(
      {std::ceil(4.0 * kappa * kappa / n_bar), std::ceil(n_bar), 1.0});
  if (raw_level > 1e9) {
    std::ostringstream msg;
    msg << "variance demo: occupied level " << raw_level << " exceeds 1e9";
    throw std::invalid_argument(msg.str());
  }
  const int level = static_cast<int>(raw_level);
  VarianceDemo demo;
  demo.n_level = level;
  const double weight = n_bar / level;
  if (weight < 1.0) {
    demo.dist.p[0] = 1.0 - weight;
  }
  demo.dist.p[level] = weight;
  demo.delta_h = 0.5 * std::sqrt(n_bar * level);
  return demo;
}

}  // namespace gqfi
