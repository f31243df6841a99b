#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hierfed/rng.hpp"

namespace hierfed {

// Sensor feature vector feeding the gain model. Values are physical units;
// normalize() maps them to [0,1] before the network sees them.
struct FeatureVector {
  double t_air = 0.0;      // air temperature, degC
  double rh = 0.0;         // relative humidity, 0..1
  double t_leaf = 0.0;     // leaf temperature, degC
  double co2 = 0.0;        // CO2, ppm
  double ppfd = 0.0;       // photon flux, umol/m^2/s
  double e_vpd = 0.0;      // VPD error, kPa
  double e_vpd_int = 0.0;  // integrated VPD error, kPa*s

  std::array<double, 7> to_array() const {
    return {t_air, rh, t_leaf, co2, ppfd, e_vpd, e_vpd_int};
  }
  bool finite() const;
};

struct GainTriple {
  double kp = 0.0;  // proportional, dimensionless (per kPa of error)
  double ki = 0.0;  // integral, 1/s
  double kd = 0.0;  // derivative, s

  std::array<double, 3> to_array() const { return {kp, ki, kd}; }
  static GainTriple from_array(const std::array<double, 3>& a) {
    return {a[0], a[1], a[2]};
  }
  bool finite() const;
};

// Fixed per-feature affine ranges mapping raw features onto [0,1] (clamped).
// Shared across all facilities so the input semantics of the global tier
// are identical fleet-wide.
struct FeatureScaler {
  std::array<double, 7> lo = {10.0, 0.0, 8.0, 300.0, 0.0, -1.5, -500.0};
  std::array<double, 7> hi = {40.0, 1.0, 38.0, 2000.0, 1500.0, 1.5, 500.0};

  std::array<double, 7> normalize(const FeatureVector& x) const;
};

// The 36 parameters of the 7-3-3 network, stored flat in declaration order:
// w1 row-major (3x7 = 21), b1 (3), w2 row-major (3x3 = 9), b2 (3).
// This flat order is also the serialization order.
struct ParamVector {
  static constexpr int kW1Rows = 3;
  static constexpr int kW1Cols = 7;
  static constexpr int kSize = 36;

  std::array<double, kSize> v{};

  double& w1(int row, int col) { return v[row * 7 + col]; }
  double w1(int row, int col) const { return v[row * 7 + col]; }
  double& b1(int i) { return v[21 + i]; }
  double b1(int i) const { return v[21 + i]; }
  double& w2(int row, int col) { return v[24 + row * 3 + col]; }
  double w2(int row, int col) const { return v[24 + row * 3 + col]; }
  double& b2(int i) { return v[33 + i]; }
  double b2(int i) const { return v[33 + i]; }

  bool finite() const;
  bool operator==(const ParamVector&) const = default;
};

// Physics-informed tier decomposition of the 36 parameters.
//   global  (18): w1 columns 0..4 for all rows, plus b1 — the weights fed by
//                 the five environmental inputs.
//   cluster (17): w1 columns 5..6 (the VPD error inputs), all of w2, b2[0..1].
//   local    (1): b2[2], the derivative-gain bias; never shared.
struct TierSplit {
  static constexpr int kGlobalSize = 18;
  static constexpr int kClusterSize = 17;

  std::array<double, kGlobalSize> global{};
  std::array<double, kClusterSize> cluster{};
  double local = 0.0;
};

// Flat-index maps of each tier into ParamVector::v.
const std::array<int, TierSplit::kGlobalSize>& tier_global_indices();
const std::array<int, TierSplit::kClusterSize>& tier_cluster_indices();
int tier_local_index();

TierSplit split_tiers(const ParamVector& params);
ParamVector merge_tiers(const TierSplit& split);

struct TrainingSample {
  FeatureVector x;  // normalized features (scaler already applied)
  GainTriple y;     // target gains in model units
};

// h = sigmoid(w1*x + b1); (kp, ki, kd) = w2*h + b2.
// Expects normalized features; throws std::domain_error on non-finite input.
GainTriple forward(const ParamVector& params, const FeatureVector& x);
GainTriple forward(const ParamVector& params, const std::array<double, 7>& x);

// Mean over the batch of the squared Euclidean error across the 3 outputs.
// Throws std::domain_error on an empty batch.
double loss(const ParamVector& params, std::span<const TrainingSample> batch);

// Exact gradient of loss() w.r.t. all 36 parameters.
ParamVector gradient(const ParamVector& params,
                     std::span<const TrainingSample> batch);

// Uniform init in [-0.5, 0.5]; keeps sigmoid pre-activations responsive for
// normalized inputs.
ParamVector random_init(RngStream& rng);

// --- Wire formats ----------------------------------------------------------
// A full parameter vector is 36 little-endian float32 values (144 bytes).
// A federation update frames facility id (u32), round (u32), then the
// 18-value global delta and 17-value cluster delta: 8 + 140 = 148 bytes.
// The local tier is structurally absent from the update format.

constexpr int kParamWireBytes = 144;
constexpr int kUpdatePayloadBytes = 140;  // 35 float32
constexpr int kUpdateFrameBytes = 148;

std::vector<std::uint8_t> serialize_params(const ParamVector& params);
ParamVector parse_params(std::span<const std::uint8_t> bytes);

struct UpdateFrame {
  std::uint32_t facility_id = 0;
  std::uint32_t round = 0;
  std::array<double, TierSplit::kGlobalSize> delta_global{};
  std::array<double, TierSplit::kClusterSize> delta_cluster{};
};

std::vector<std::uint8_t> serialize_update(const UpdateFrame& frame);
UpdateFrame parse_update(std::span<const std::uint8_t> bytes);

}  // namespace hierfed
