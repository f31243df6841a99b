#include "hierfed/privacy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hierfed {

namespace {

constexpr double kAlphaLo = 1.25;
constexpr double kAlphaHi = 512.0;
constexpr int kAlphaGridPoints = 200;

double conversion_objective(double alpha, double rounds_over_2z2,
                            double log_inv_delta) {
  return rounds_over_2z2 * alpha + log_inv_delta / (alpha - 1.0);
}

}  // namespace

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void clip_in_place(std::span<double> v, double c) {
  if (!(c > 0.0)) throw std::domain_error("clip: bound must be positive");
  const double norm = l2_norm(v);
  if (norm > c) {
    const double scale = c / norm;
    for (double& x : v) x *= scale;
  }
}

std::vector<double> clip(std::span<const double> v, double c) {
  std::vector<double> out(v.begin(), v.end());
  clip_in_place(out, c);
  return out;
}

void gaussianize(std::span<double> delta_v, double z, double c,
                 RngStream& rng) {
  if (z < 0.0) throw std::domain_error("gaussianize: z must be >= 0");
  if (z == 0.0) return;
  const double sd = z * c;
  for (double& x : delta_v) x += rng.normal(0.0, sd);
}

double rdp_epsilon(double z, int rounds, double q, double delta) {
  if (q != 1.0) {
    throw std::domain_error("rdp_epsilon: only q = 1.0 is supported");
  }
  if (rounds < 1) throw std::domain_error("rdp_epsilon: rounds >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("rdp_epsilon: delta in (0, 1)");
  }
  if (z == 0.0) return std::numeric_limits<double>::infinity();
  if (z < 0.0) throw std::domain_error("rdp_epsilon: z must be >= 0");

  const double a = static_cast<double>(rounds) / (2.0 * z * z);
  const double l = std::log(1.0 / delta);

  // Locate the basin on the geometric grid.
  const double ratio = std::pow(kAlphaHi / kAlphaLo,
                                1.0 / static_cast<double>(kAlphaGridPoints - 1));
  double best_alpha = kAlphaLo;
  double best = conversion_objective(kAlphaLo, a, l);
  double alpha = kAlphaLo;
  for (int i = 1; i < kAlphaGridPoints; ++i) {
    alpha *= ratio;
    const double val = conversion_objective(alpha, a, l);
    if (val < best) {
      best = val;
      best_alpha = alpha;
    }
  }

  // Refine within the bracketing grid cells; the objective is convex.
  double lo = std::max(kAlphaLo, best_alpha / ratio);
  double hi = std::min(kAlphaHi, best_alpha * ratio);
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-12 * hi; ++iter) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (conversion_objective(m1, a, l) < conversion_objective(m2, a, l)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return conversion_objective(0.5 * (lo + hi), a, l);
}

double rdp_epsilon_analytic(double z, int rounds, double delta) {
  if (z == 0.0) return std::numeric_limits<double>::infinity();
  const double a = static_cast<double>(rounds) / (2.0 * z * z);
  const double l = std::log(1.0 / delta);
  // d/dalpha [a*alpha + l/(alpha-1)] = 0  =>  alpha* = 1 + sqrt(l / a).
  const double alpha_star = 1.0 + std::sqrt(l / a);
  const double clamped = std::min(std::max(alpha_star, kAlphaLo), kAlphaHi);
  return conversion_objective(clamped, a, l);
}

double solve_noise_multiplier(double target_eps, int rounds, double delta) {
  if (std::isinf(target_eps)) return 0.0;
  if (!(target_eps > 0.0)) {
    throw std::domain_error("solve_noise_multiplier: target must be > 0");
  }
  double lo = 1e-4, hi = 1.0;
  while (rdp_epsilon(hi, rounds, 1.0, delta) > target_eps && hi < 1e7) hi *= 2.0;
  if (rdp_epsilon(hi, rounds, 1.0, delta) > target_eps) {
    throw std::runtime_error("solve_noise_multiplier: target unreachable");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (rdp_epsilon(mid, rounds, 1.0, delta) > target_eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double excess_risk_bound(double d, double delta, double n, double eps) {
  if (!(d > 0.0 && n > 0.0 && eps > 0.0 && delta > 0.0)) {
    throw std::domain_error("excess_risk_bound: all arguments must be positive");
  }
  return d * std::log(1.0 / delta) / (n * eps * eps);
}

void PrivacyLedger::record_release(const DpConfig& dp) {
  rounds_g += 1;
  rounds_c += 1;
  eps_g = rdp_epsilon(dp.z_g, rounds_g, 1.0, dp.delta);
  eps_c = rdp_epsilon(dp.z_c, rounds_c, 1.0, dp.delta);
}

}  // namespace hierfed
