#include "hierfed/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hierfed {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

void put_f32_le(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

float get_f32_le(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t u = static_cast<std::uint32_t>(b[at]) |
                    (static_cast<std::uint32_t>(b[at + 1]) << 8) |
                    (static_cast<std::uint32_t>(b[at + 2]) << 16) |
                    (static_cast<std::uint32_t>(b[at + 3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t u) {
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

struct ForwardPass {
  std::array<double, 3> h;
  std::array<double, 3> out;
};

ForwardPass run_forward(const ParamVector& p, const std::array<double, 7>& x) {
  ForwardPass fp;
  for (int i = 0; i < 3; ++i) {
    double z = p.b1(i);
    for (int j = 0; j < 7; ++j) z += p.w1(i, j) * x[j];
    fp.h[i] = sigmoid(z);
  }
  for (int i = 0; i < 3; ++i) {
    double z = p.b2(i);
    for (int j = 0; j < 3; ++j) z += p.w2(i, j) * fp.h[j];
    fp.out[i] = z;
  }
  return fp;
}

}  // namespace

bool FeatureVector::finite() const { return all_finite(to_array()); }
bool GainTriple::finite() const { return all_finite(to_array()); }
bool ParamVector::finite() const { return all_finite(v); }

std::array<double, 7> FeatureScaler::normalize(const FeatureVector& x) const {
  const auto raw = x.to_array();
  std::array<double, 7> out{};
  for (int i = 0; i < 7; ++i) {
    const double span = hi[i] - lo[i];
    out[i] = std::clamp((raw[i] - lo[i]) / span, 0.0, 1.0);
  }
  return out;
}

const std::array<int, TierSplit::kGlobalSize>& tier_global_indices() {
  // w1 columns 0..4 row-major, then b1.
  static const std::array<int, 18> idx = {0,  1,  2,  3,  4,  7,  8,  9,  10,
                                          11, 14, 15, 16, 17, 18, 21, 22, 23};
  return idx;
}

const std::array<int, TierSplit::kClusterSize>& tier_cluster_indices() {
  // w1 columns 5..6 row-major, then w2 row-major, then b2[0..1].
  static const std::array<int, 17> idx = {5,  6,  12, 13, 19, 20, 24, 25, 26,
                                          27, 28, 29, 30, 31, 32, 33, 34};
  return idx;
}

int tier_local_index() { return 35; }

TierSplit split_tiers(const ParamVector& params) {
  TierSplit s;
  const auto& gi = tier_global_indices();
  const auto& ci = tier_cluster_indices();
  for (std::size_t i = 0; i < gi.size(); ++i) s.global[i] = params.v[gi[i]];
  for (std::size_t i = 0; i < ci.size(); ++i) s.cluster[i] = params.v[ci[i]];
  s.local = params.v[tier_local_index()];
  return s;
}

ParamVector merge_tiers(const TierSplit& split) {
  ParamVector p;
  const auto& gi = tier_global_indices();
  const auto& ci = tier_cluster_indices();
  for (std::size_t i = 0; i < gi.size(); ++i) p.v[gi[i]] = split.global[i];
  for (std::size_t i = 0; i < ci.size(); ++i) p.v[ci[i]] = split.cluster[i];
  p.v[tier_local_index()] = split.local;
  return p;
}

GainTriple forward(const ParamVector& params, const std::array<double, 7>& x) {
  if (!params.finite() || !all_finite(x)) {
    throw std::domain_error("forward: non-finite input");
  }
  const auto fp = run_forward(params, x);
  return {fp.out[0], fp.out[1], fp.out[2]};
}

GainTriple forward(const ParamVector& params, const FeatureVector& x) {
  return forward(params, x.to_array());
}

double loss(const ParamVector& params, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::domain_error("loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) {
    const auto fp = run_forward(params, s.x.to_array());
    const auto y = s.y.to_array();
    for (int i = 0; i < 3; ++i) {
      const double e = fp.out[i] - y[i];
      acc += e * e;
    }
  }
  return acc / static_cast<double>(batch.size());
}

ParamVector gradient(const ParamVector& params,
                     std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::domain_error("gradient: empty batch");
  ParamVector g;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const auto x = s.x.to_array();
    const auto fp = run_forward(params, x);
    const auto y = s.y.to_array();

    // d(loss)/d(out_i) for this sample.
    std::array<double, 3> dout;
    for (int i = 0; i < 3; ++i) dout[i] = 2.0 * (fp.out[i] - y[i]) * inv_n;

    for (int i = 0; i < 3; ++i) {
      g.b2(i) += dout[i];
      for (int j = 0; j < 3; ++j) g.w2(i, j) += dout[i] * fp.h[j];
    }
    for (int j = 0; j < 3; ++j) {
      double dh = 0.0;
      for (int i = 0; i < 3; ++i) dh += dout[i] * params.w2(i, j);
      const double dz = dh * fp.h[j] * (1.0 - fp.h[j]);
      g.b1(j) += dz;
      for (int k = 0; k < 7; ++k) g.w1(j, k) += dz * x[k];
    }
  }
  return g;
}

ParamVector random_init(RngStream& rng) {
  ParamVector p;
  for (auto& w : p.v) w = rng.uniform(-0.5, 0.5);
  return p;
}

std::vector<std::uint8_t> serialize_params(const ParamVector& params) {
  std::vector<std::uint8_t> out;
  out.reserve(kParamWireBytes);
  for (double w : params.v) put_f32_le(out, static_cast<float>(w));
  return out;
}

ParamVector parse_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kParamWireBytes) {
    throw std::invalid_argument("parse_params: expected 144 bytes");
  }
  ParamVector p;
  for (int i = 0; i < ParamVector::kSize; ++i) {
    p.v[i] = static_cast<double>(get_f32_le(bytes, static_cast<std::size_t>(i) * 4));
  }
  return p;
}

std::vector<std::uint8_t> serialize_update(const UpdateFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kUpdateFrameBytes);
  put_u32_le(out, frame.facility_id);
  put_u32_le(out, frame.round);
  for (double d : frame.delta_global) put_f32_le(out, static_cast<float>(d));
  for (double d : frame.delta_cluster) put_f32_le(out, static_cast<float>(d));
  return out;
}

UpdateFrame parse_update(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kUpdateFrameBytes) {
    throw std::invalid_argument("parse_update: expected 148 bytes");
  }
  UpdateFrame f;
  f.facility_id = get_u32_le(bytes, 0);
  f.round = get_u32_le(bytes, 4);
  std::size_t at = 8;
  for (auto& d : f.delta_global) {
    d = static_cast<double>(get_f32_le(bytes, at));
    at += 4;
  }
  for (auto& d : f.delta_cluster) {
    d = static_cast<double>(get_f32_le(bytes, at));
    at += 4;
  }
  return f;
}

}  // namespace hierfed
