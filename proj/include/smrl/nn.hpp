#pragma once

// Minimal dense feed-forward networks with exact reverse-mode gradients and
// Adam. Parameters and math are 64-bit; the on-disk format stores 32-bit.
// There is no minibatch abstraction here: callers loop over samples and sum
// gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smrl/binio.hpp"
#include "smrl/rng.hpp"

namespace smrl {

enum class Act : std::uint8_t { kIdentity = 0, kTanh = 1, kRelu = 2 };

// Fully connected network. weights[k] is row-major (sizes[k+1] x sizes[k]),
// biases[k] has length sizes[k+1]; acts[k] is applied after layer k.
struct DenseNet {
  std::vector<int> sizes;
  std::vector<Act> acts;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }
};

// Gradient of a scalar with respect to every DenseNet parameter.
// Shape-congruent with its net.
struct GradientSet {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }
  void scale(double s) {
    for (auto& w : weights)
      for (double& x : w) x *= s;
    for (auto& b : biases)
      for (double& x : b) x *= s;
  }
};

// Per-layer post-activations from a forward pass; a[0] is the input.
struct ForwardCache {
  std::vector<std::vector<double>> a;
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double activate(double z, Act act) {
  switch (act) {
    case Act::kIdentity: return z;
    case Act::kTanh: return std::tanh(z);
    case Act::kRelu: return z > 0.0 ? z : 0.0;
  }
  throw std::invalid_argument("unknown activation code");
}

// Activation derivative expressed through the post-activation value.
inline double activate_grad(double a, Act act) {
  switch (act) {
    case Act::kIdentity: return 1.0;
    case Act::kTanh: return 1.0 - a * a;
    case Act::kRelu: return a > 0.0 ? 1.0 : 0.0;
  }
  throw std::invalid_argument("unknown activation code");
}

}  // namespace detail

// Xavier-uniform weights (zero biases): w ~ U(-s, s), s = sqrt(6/(fi+fo)).
inline DenseNet make_net(std::vector<int> sizes, std::vector<Act> acts,
                         Rng& rng) {
  if (sizes.size() < 2)
    throw std::invalid_argument("make_net: need at least input and output");
  if (acts.size() != sizes.size() - 1)
    throw std::invalid_argument("make_net: one activation per layer");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("make_net: sizes must be > 0");

  DenseNet net;
  net.sizes = std::move(sizes);
  net.acts = std::move(acts);
  for (std::size_t k = 0; k + 1 < net.sizes.size(); ++k) {
    int fan_in = net.sizes[k];
    int fan_out = net.sizes[k + 1];
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& x : w) x = rng.uniform(-s, s);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

// Hidden layers share one activation; the output layer is identity.
inline DenseNet make_mlp(int input, std::vector<int> hidden, int output,
                         Act hidden_act, Rng& rng) {
  std::vector<int> sizes;
  sizes.push_back(input);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(output);
  std::vector<Act> acts(sizes.size() - 1, hidden_act);
  acts.back() = Act::kIdentity;
  return make_net(std::move(sizes), std::move(acts), rng);
}

inline GradientSet make_zero_grads(const DenseNet& net) {
  GradientSet g;
  for (const auto& w : net.weights) g.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

// Forward pass. The cache holds every post-activation and is sufficient for
// an exact backward pass. Returns a reference to the output activations.
inline const std::vector<double>& net_forward(const DenseNet& net,
                                              std::span<const double> input,
                                              ForwardCache& cache) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument("net_forward: input length " +
                                std::to_string(input.size()) + " != " +
                                std::to_string(net.input_size()));
  if (!detail::all_finite(input))
    throw std::invalid_argument("net_forward: non-finite input");

  cache.a.resize(net.num_layers() + 1);
  cache.a[0].assign(input.begin(), input.end());
  for (int k = 0; k < net.num_layers(); ++k) {
    const int in = net.sizes[k];
    const int out = net.sizes[k + 1];
    const double* w = net.weights[k].data();
    const double* x = cache.a[k].data();
    auto& y = cache.a[k + 1];
    y.resize(out);
    for (int i = 0; i < out; ++i) {
      double acc = net.biases[k][i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * x[j];
      y[i] = detail::activate(acc, net.acts[k]);
    }
  }
  return cache.a.back();
}

inline std::vector<double> net_forward(const DenseNet& net,
                                       std::span<const double> input) {
  ForwardCache cache;
  return net_forward(net, input, cache);
}

// Accumulates scale * d<output_grad, output>/dparams into grads. The cache
// must come from net_forward on this same net.
inline void net_backward_into(const DenseNet& net, const ForwardCache& cache,
                              std::span<const double> output_grad,
                              GradientSet& grads, double scale = 1.0) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.a.size()) != layers + 1)
    throw std::invalid_argument("net_backward: stale cache (layer count)");
  for (int k = 0; k <= layers; ++k)
    if (static_cast<int>(cache.a[k].size()) != net.sizes[k])
      throw std::invalid_argument("net_backward: stale cache (shape)");
  if (static_cast<int>(output_grad.size()) != net.output_size())
    throw std::invalid_argument("net_backward: output_grad length mismatch");
  if (!detail::all_finite(output_grad))
    throw std::invalid_argument("net_backward: non-finite output_grad");

  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (int i = 0; i < net.output_size(); ++i)
    delta[i] *= detail::activate_grad(cache.a[layers][i],
                                      net.acts[layers - 1]);

  std::vector<double> prev;
  for (int k = layers - 1; k >= 0; --k) {
    const int in = net.sizes[k];
    const int out = net.sizes[k + 1];
    const double* x = cache.a[k].data();
    double* gw = grads.weights[k].data();
    for (int i = 0; i < out; ++i) {
      const double d = scale * delta[i];
      grads.biases[k][i] += d;
      double* row = gw + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) row[j] += d * x[j];
    }
    if (k > 0) {
      prev.assign(in, 0.0);
      const double* w = net.weights[k].data();
      for (int i = 0; i < out; ++i) {
        const double d = delta[i];
        const double* row = w + static_cast<std::size_t>(i) * in;
        for (int j = 0; j < in; ++j) prev[j] += row[j] * d;
      }
      for (int j = 0; j < in; ++j)
        prev[j] *= detail::activate_grad(cache.a[k][j], net.acts[k - 1]);
      delta.swap(prev);
    }
  }
}

// Exact reverse-mode gradient of the scalar <output_grad, output>.
inline GradientSet net_backward(const DenseNet& net, const ForwardCache& cache,
                                std::span<const double> output_grad) {
  GradientSet grads = make_zero_grads(net);
  net_backward_into(net, cache, output_grad, grads);
  return grads;
}

// Adam optimizer state; moment accumulators are shape-congruent with the net.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam(const DenseNet& net, double lr) {
  AdamState st;
  st.lr = lr;
  for (const auto& w : net.weights) st.m.emplace_back(w.size(), 0.0);
  for (const auto& b : net.biases) st.m.emplace_back(b.size(), 0.0);
  st.v = st.m;
  return st;
}

namespace detail {

inline void adam_apply(std::span<double> p, std::span<const double> g,
                       std::span<double> m, std::span<double> v,
                       const AdamState& st, double c1, double c2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i]))
      throw std::runtime_error("adam_update: non-finite gradient");
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
    double mhat = m[i] / c1;
    double vhat = v[i] / c2;
    p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
    if (!std::isfinite(p[i]))
      throw std::runtime_error("adam_update: non-finite parameter");
  }
}

}  // namespace detail

// Standard Adam with bias correction. Throws on non-finite gradients or on
// an update that produces a non-finite parameter.
inline void adam_update(DenseNet& net, const GradientSet& grads,
                        AdamState& st) {
  const std::size_t layers = net.weights.size();
  if (grads.weights.size() != layers || grads.biases.size() != layers ||
      st.m.size() != 2 * layers)
    throw std::invalid_argument("adam_update: shape mismatch");
  st.step_count += 1;
  const double c1 = 1.0 - std::pow(st.beta1, double(st.step_count));
  const double c2 = 1.0 - std::pow(st.beta2, double(st.step_count));
  for (std::size_t k = 0; k < layers; ++k) {
    detail::adam_apply(net.weights[k], grads.weights[k], st.m[k], st.v[k], st,
                       c1, c2);
    detail::adam_apply(net.biases[k], grads.biases[k], st.m[layers + k],
                       st.v[layers + k], st, c1, c2);
  }
}

// Adam over a flat parameter vector (used for the policy's log_std).
struct AdamVector {
  std::vector<double> m, v;
  long long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamVector() = default;
  AdamVector(std::size_t n, double lr_in) : m(n, 0.0), v(n, 0.0), lr(lr_in) {}

  void update(std::vector<double>& p, std::span<const double> g) {
    if (p.size() != m.size() || g.size() != m.size())
      throw std::invalid_argument("AdamVector: shape mismatch");
    step_count += 1;
    const double c1 = 1.0 - std::pow(beta1, double(step_count));
    const double c2 = 1.0 - std::pow(beta2, double(step_count));
    AdamState proxy;
    proxy.lr = lr;
    proxy.beta1 = beta1;
    proxy.beta2 = beta2;
    proxy.epsilon = epsilon;
    detail::adam_apply(p, g, m, v, proxy, c1, c2);
  }
};

// Scalar loss on the network output, with its exact gradient. Used by
// gradient_check and by tests.
struct LossSpec {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> grad;
};

// Central-difference check (step 1e-5): returns
// max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double gradient_check(const DenseNet& net,
                             std::span<const double> input,
                             const LossSpec& loss) {
  if (net.parameter_count() > 10000)
    throw std::invalid_argument("gradient_check: net too large (> 10k params)");

  ForwardCache cache;
  const auto& out = net_forward(net, input, cache);
  GradientSet analytic = net_backward(net, cache, loss.grad(out));

  const double h = 1e-5;
  DenseNet work = net;
  double max_err = 0.0;
  auto probe = [&](double& p, double ga) {
    const double saved = p;
    p = saved + h;
    double lp = loss.value(net_forward(work, input));
    p = saved - h;
    double lm = loss.value(net_forward(work, input));
    p = saved;
    double gn = (lp - lm) / (2.0 * h);
    double err = std::abs(ga - gn) /
                 std::max({std::abs(ga), std::abs(gn), 1e-8});
    max_err = std::max(max_err, err);
  };
  for (int k = 0; k < net.num_layers(); ++k) {
    for (std::size_t i = 0; i < work.weights[k].size(); ++i)
      probe(work.weights[k][i], analytic.weights[k][i]);
    for (std::size_t i = 0; i < work.biases[k].size(); ++i)
      probe(work.biases[k][i], analytic.biases[k][i]);
  }
  return max_err;
}

// ---------------------------------------------------------------------------
// SDNN on-disk format (little-endian):
//   "SDNN" | u32 version=1 | u32 n = len(sizes) | n x u32 sizes
//   | (n-1) x u8 activation codes | per layer: f32 weights row-major,
//   then f32 biases.
// Round-trips bit-exactly: load(save(x)) then save again gives identical
// bytes (values are stored as f32; f32 -> f64 -> f32 is lossless).
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kSdnnVersion = 1;

inline void save_dense_net(const DenseNet& net, ByteWriter& w) {
  w.magic("SDNN");
  w.u32(kSdnnVersion);
  w.u32(static_cast<std::uint32_t>(net.sizes.size()));
  for (int s : net.sizes) w.u32(static_cast<std::uint32_t>(s));
  for (Act a : net.acts) w.u8(static_cast<std::uint8_t>(a));
  for (int k = 0; k < net.num_layers(); ++k) {
    w.f32_vector(net.weights[k]);
    w.f32_vector(net.biases[k]);
  }
}

inline std::vector<std::uint8_t> save_dense_net(const DenseNet& net) {
  ByteWriter w;
  save_dense_net(net, w);
  return w.take();
}

inline DenseNet load_dense_net(ByteReader& r) {
  r.magic("SDNN");
  if (r.u32() != kSdnnVersion)
    throw std::runtime_error("SDNN: unsupported version");
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw std::runtime_error("SDNN: bad layer count");
  DenseNet net;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t s = r.u32();
    if (s == 0 || s > 1u << 20) throw std::runtime_error("SDNN: bad size");
    net.sizes.push_back(static_cast<int>(s));
  }
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    std::uint8_t code = r.u8();
    if (code > 2) throw std::runtime_error("SDNN: bad activation code");
    net.acts.push_back(static_cast<Act>(code));
  }
  for (std::uint32_t k = 0; k + 1 < n; ++k) {
    std::size_t rows = net.sizes[k + 1], cols = net.sizes[k];
    net.weights.push_back(r.f32_vector(rows * cols));
    net.biases.push_back(r.f32_vector(rows));
  }
  return net;
}

inline DenseNet load_dense_net(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  DenseNet net = load_dense_net(r);
  r.expect_end();
  return net;
}

}  // namespace smrl
