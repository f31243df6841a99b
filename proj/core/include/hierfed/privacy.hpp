#pragma once

#include <span>
#include <vector>

#include "hierfed/rng.hpp"

namespace hierfed {

struct DpConfig {
  double clip_c = 1.0;   // L2 clipping bound
  double z_g = 0.8;      // Tier-1 noise multiplier
  double z_c = 1.0;      // Tier-2 noise multiplier
  double delta = 1e-5;   // failure probability
};

// Per-tier privacy spend over the run. Epsilon values come from the RDP
// accountant; infinity is the explicit sentinel for z = 0.
struct PrivacyLedger {
  int rounds_g = 0;
  int rounds_c = 0;
  double eps_g = 0.0;
  double eps_c = 0.0;

  void record_release(const DpConfig& dp);
};

double l2_norm(std::span<const double> v);

// v * min(1, c / ||v||2); output norm never exceeds c.
std::vector<double> clip(std::span<const double> v, double c);
void clip_in_place(std::span<double> v, double c);

// Adds independent N(0, (z*c)^2) per coordinate. z = 0 is an exact identity
// and leaves the rng stream untouched.
void gaussianize(std::span<double> delta_v, double z, double c, RngStream& rng);

// (eps, delta) from Renyi-DP composition of `rounds` Gaussian releases with
// sensitivity-to-sigma ratio 1/z: eps(alpha) = rounds * alpha / (2 z^2),
// converted via min over alpha of eps(alpha) + log(1/delta)/(alpha - 1).
// The minimizer is located on a geometric alpha grid in [1.25, 512] and
// refined by ternary search (the objective is convex in alpha).
// Returns +infinity when z == 0. Requires q == 1 (full participation).
double rdp_epsilon(double z, int rounds, double q, double delta);

// Closed-form minimization of rounds*alpha/(2 z^2) + log(1/delta)/(alpha-1).
// Independent of the grid path; ignores the alpha > 1 grid bounds.
double rdp_epsilon_analytic(double z, int rounds, double delta);

// Smallest noise multiplier achieving at most target_eps over `rounds`
// releases, found by bisection on z. Returns 0 for target_eps = infinity.
double solve_noise_multiplier(double target_eps, int rounds, double delta);

// Excess empirical risk bound d * ln(1/delta) / (n * eps^2) with the
// O-constant taken as 1.
double excess_risk_bound(double d, double delta, double n, double eps);

}  // namespace hierfed
