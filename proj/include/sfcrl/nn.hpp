#pragma once

// Dense actor-critic network with hand-written reverse-mode gradients,
// a categorical policy head, and the Adam / RMSProp optimizers.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sfcrl/errors.hpp"
#include "sfcrl/random.hpp"

namespace sfcrl::nn {

struct MlpShape {
  std::size_t input = 0;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t actions = 0;

  std::size_t param_count() const {
    std::size_t n = 0;
    std::size_t prev = input;
    for (auto h : hidden) {
      n += h * prev + h;
      prev = h;
    }
    return n + actions * prev + actions + prev + 1;
  }
  bool operator==(const MlpShape&) const = default;
};

// Activations recorded by a forward pass, consumed by backward().
struct ForwardPass {
  std::vector<double> input;
  std::vector<std::vector<double>> hidden;  // post-tanh, one per layer
  std::vector<double> logits;
  double value = 0.0;
  bool valid = false;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpShape shape)
      : shape_(std::move(shape)), params_(shape_.param_count(), 0.0) {
    if (shape_.input == 0 || shape_.actions == 0) {
      throw UsageError("Mlp needs non-empty input and action sizes");
    }
  }

  // Orthogonal hidden layers (gain sqrt 2), policy head gain 0.01, value
  // head gain 1, zero biases.
  static Mlp initialized(MlpShape shape, RngStream& rng) {
    Mlp net(std::move(shape));
    std::size_t off = 0;
    std::size_t prev = net.shape_.input;
    for (auto h : net.shape_.hidden) {
      orthogonal(net.params_.data() + off, h, prev, std::sqrt(2.0), rng);
      off += h * prev + h;
      prev = h;
    }
    orthogonal(net.params_.data() + off, net.shape_.actions, prev, 0.01, rng);
    off += net.shape_.actions * prev + net.shape_.actions;
    orthogonal(net.params_.data() + off, 1, prev, 1.0, rng);
    return net;
  }

  const MlpShape& shape() const { return shape_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  struct Output {
    std::vector<double> logits;
    double value = 0.0;
  };

  Output forward(std::span<const double> x) const {
    ForwardPass p = forward_pass(x);
    return {std::move(p.logits), p.value};
  }

  ForwardPass forward_pass(std::span<const double> x) const {
    if (x.size() != shape_.input) {
      throw UsageError("forward: input has " + std::to_string(x.size()) +
                       " entries, expected " + std::to_string(shape_.input));
    }
    ForwardPass p;
    p.input.assign(x.begin(), x.end());
    const double* w = params_.data();
    const std::vector<double>* in = &p.input;
    for (auto h : shape_.hidden) {
      std::vector<double> out(h);
      const std::size_t n_in = in->size();
      const double* b = w + h * n_in;
      for (std::size_t i = 0; i < h; ++i) {
        double z = b[i];
        const double* row = w + i * n_in;
        for (std::size_t j = 0; j < n_in; ++j) z += row[j] * (*in)[j];
        out[i] = std::tanh(z);
      }
      w = b + h;
      p.hidden.push_back(std::move(out));
      in = &p.hidden.back();
    }
    const std::size_t n_in = in->size();
    p.logits.resize(shape_.actions);
    const double* pb = w + shape_.actions * n_in;
    for (std::size_t i = 0; i < shape_.actions; ++i) {
      double z = pb[i];
      const double* row = w + i * n_in;
      for (std::size_t j = 0; j < n_in; ++j) z += row[j] * (*in)[j];
      p.logits[i] = z;
    }
    const double* vw = pb + shape_.actions;
    double v = vw[n_in];
    for (std::size_t j = 0; j < n_in; ++j) v += vw[j] * (*in)[j];
    p.value = v;
    p.valid = true;
    return p;
  }

  // Accumulates d(loss)/d(params) into `grad` given the loss gradient with
  // respect to the logits and the value output of `pass`.
  void backward(const ForwardPass& pass, std::span<const double> dlogits,
                double dvalue, std::span<double> grad) const {
    if (!pass.valid || pass.input.size() != shape_.input ||
        pass.hidden.size() != shape_.hidden.size()) {
      throw UsageError("backward called without a matching forward pass");
    }
    if (dlogits.size() != shape_.actions || grad.size() != params_.size()) {
      throw UsageError("backward: gradient buffer size mismatch");
    }
    // Offsets of each trunk layer.
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    std::size_t prev = shape_.input;
    for (auto h : shape_.hidden) {
      offsets.push_back(off);
      off += h * prev + h;
      prev = h;
    }
    const std::vector<double>& last =
        pass.hidden.empty() ? pass.input : pass.hidden.back();
    const std::size_t n_last = last.size();
    const std::size_t pw = off;
    const std::size_t pb = pw + shape_.actions * n_last;
    const std::size_t vw = pb + shape_.actions;
    const std::size_t vb = vw + n_last;

    std::vector<double> dh(n_last, 0.0);
    for (std::size_t i = 0; i < shape_.actions; ++i) {
      const double g = dlogits[i];
      if (g == 0.0) continue;
      for (std::size_t j = 0; j < n_last; ++j) {
        grad[pw + i * n_last + j] += g * last[j];
        dh[j] += params_[pw + i * n_last + j] * g;
      }
      grad[pb + i] += g;
    }
    for (std::size_t j = 0; j < n_last; ++j) {
      grad[vw + j] += dvalue * last[j];
      dh[j] += params_[vw + j] * dvalue;
    }
    grad[vb] += dvalue;

    for (std::size_t l = shape_.hidden.size(); l-- > 0;) {
      const std::vector<double>& out = pass.hidden[l];
      const std::vector<double>& in = l == 0 ? pass.input : pass.hidden[l - 1];
      const std::size_t h = out.size();
      const std::size_t n_in = in.size();
      const std::size_t w = offsets[l];
      const std::size_t b = w + h * n_in;
      std::vector<double> dz(h);
      for (std::size_t i = 0; i < h; ++i) {
        dz[i] = dh[i] * (1.0 - out[i] * out[i]);
      }
      std::vector<double> dprev(l == 0 ? 0 : n_in, 0.0);
      for (std::size_t i = 0; i < h; ++i) {
        const double g = dz[i];
        grad[b + i] += g;
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < n_in; ++j) {
          grad[w + i * n_in + j] += g * in[j];
          if (l > 0) dprev[j] += params_[w + i * n_in + j] * g;
        }
      }
      dh = std::move(dprev);
    }
  }

  bool operator==(const Mlp&) const = default;

 private:
  static void orthogonal(double* w, std::size_t rows, std::size_t cols,
                         double gain, RngStream& rng) {
    // Orthonormalise the columns of a tall Gaussian matrix (modified
    // Gram-Schmidt), transposing when the layer is wide.
    const bool tall = rows >= cols;
    const std::size_t m = tall ? rows : cols;
    const std::size_t n = tall ? cols : rows;
    std::vector<double> a(m * n);
    for (auto& v : a) v = rng.normal();
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t p = 0; p < k; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += a[i * n + k] * a[i * n + p];
        for (std::size_t i = 0; i < m; ++i) a[i * n + k] -= dot * a[i * n + p];
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < m; ++i) norm += a[i * n + k] * a[i * n + k];
      norm = std::sqrt(norm);
      if (norm < 1e-12) norm = 1.0;
      for (std::size_t i = 0; i < m; ++i) a[i * n + k] /= norm;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        w[r * cols + c] = gain * (tall ? a[r * n + c] : a[c * n + r]);
      }
    }
  }

  MlpShape shape_;
  std::vector<double> params_;
};

class CategoricalDistribution {
 public:
  explicit CategoricalDistribution(std::span<const double> logits)
      : log_probs_(logits.begin(), logits.end()) {
    if (log_probs_.empty()) throw UsageError("empty categorical");
    const double mx = *std::max_element(log_probs_.begin(), log_probs_.end());
    double sum = 0.0;
    for (double l : log_probs_) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    probs_.resize(log_probs_.size());
    for (std::size_t i = 0; i < log_probs_.size(); ++i) {
      log_probs_[i] -= lse;
      probs_[i] = std::exp(log_probs_[i]);
    }
  }

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& log_probs() const { return log_probs_; }

  double log_prob(std::size_t a) const {
    if (a >= probs_.size()) throw UsageError("action out of range");
    return log_probs_[a];
  }

  double entropy() const {
    double h = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (probs_[i] > 0.0) h -= probs_[i] * log_probs_[i];
    }
    return h;
  }

  std::size_t argmax() const {
    return static_cast<std::size_t>(
        std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }

  std::size_t sample(RngStream& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      acc += probs_[i];
      if (u < acc) return i;
    }
    return probs_.size() - 1;
  }

 private:
  std::vector<double> log_probs_;
  std::vector<double> probs_;
};

struct LogProbEntropy {
  double log_prob = 0.0;
  double entropy = 0.0;
};

inline LogProbEntropy log_prob_entropy(const CategoricalDistribution& dist,
                                       std::size_t action) {
  return {dist.log_prob(action), dist.entropy()};
}

// d(log p_a)/d(logits) = onehot(a) - p.
inline void add_log_prob_grad(const CategoricalDistribution& dist,
                              std::size_t action, double scale,
                              std::span<double> dlogits) {
  const auto& p = dist.probs();
  for (std::size_t k = 0; k < p.size(); ++k) {
    dlogits[k] += scale * ((k == action ? 1.0 : 0.0) - p[k]);
  }
}

// dH/d(logit_k) = -p_k (log p_k + H).
inline void add_entropy_grad(const CategoricalDistribution& dist, double scale,
                             std::span<double> dlogits) {
  const auto& p = dist.probs();
  const auto& lp = dist.log_probs();
  const double h = dist.entropy();
  for (std::size_t k = 0; k < p.size(); ++k) {
    dlogits[k] += scale * (-p[k] * (lp[k] + h));
  }
}

// Rescales `grad` so its L2 norm is at most `max_norm`; returns the
// original norm. A non-positive limit disables clipping.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (double& g : grad) g *= s;
  }
  return norm;
}

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

struct RmsProp {
  double decay = 0.99;
  double epsilon = 1e-5;
  std::vector<double> mean_square;
};

class Optimizer {
 public:
  static Optimizer adam(std::size_t n) {
    Adam a;
    a.m.assign(n, 0.0);
    a.v.assign(n, 0.0);
    return Optimizer(std::move(a));
  }
  static Optimizer rmsprop(std::size_t n) {
    RmsProp r;
    r.mean_square.assign(n, 0.0);
    return Optimizer(std::move(r));
  }

  const std::variant<Adam, RmsProp>& state() const { return state_; }

  void step(std::span<double> params, std::span<const double> grads,
            double lr) {
    if (params.size() != grads.size()) {
      throw UsageError("optimizer: params/grads size mismatch");
    }
    if (auto* a = std::get_if<Adam>(&state_)) {
      if (a->m.size() != params.size()) throw UsageError("Adam: bad shape");
      ++a->t;
      const double c1 = 1.0 - std::pow(a->beta1, static_cast<double>(a->t));
      const double c2 = 1.0 - std::pow(a->beta2, static_cast<double>(a->t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        a->m[i] = a->beta1 * a->m[i] + (1.0 - a->beta1) * grads[i];
        a->v[i] = a->beta2 * a->v[i] + (1.0 - a->beta2) * grads[i] * grads[i];
        const double mhat = a->m[i] / c1;
        const double vhat = a->v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + a->epsilon);
      }
    } else {
      auto& r = std::get<RmsProp>(state_);
      if (r.mean_square.size() != params.size()) {
        throw UsageError("RMSProp: bad shape");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        r.mean_square[i] =
            r.decay * r.mean_square[i] + (1.0 - r.decay) * grads[i] * grads[i];
        params[i] -= lr * grads[i] / std::sqrt(r.mean_square[i] + r.epsilon);
      }
    }
  }

 private:
  explicit Optimizer(std::variant<Adam, RmsProp> s) : state_(std::move(s)) {}
  std::variant<Adam, RmsProp> state_;
};

// Checkpoint: "SFCRLNN\0", u32 version, u32 hidden count, u64 input,
// u64 hidden sizes..., u64 actions, u64 param count, f64 params. All
// little-endian.
inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'C', 'R',
                                             'L', 'N', 'N', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf, buf + sizeof(T));
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}
template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw UsageError("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf, buf + sizeof(T));
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void save_checkpoint(const Mlp& net, std::ostream& os) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  const auto& s = net.shape();
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.hidden.size()));
  detail::write_le<std::uint64_t>(os, s.input);
  for (auto h : s.hidden) detail::write_le<std::uint64_t>(os, h);
  detail::write_le<std::uint64_t>(os, s.actions);
  detail::write_le<std::uint64_t>(os, net.param_count());
  for (double p : net.params()) detail::write_le<double>(os, p);
}

inline Mlp load_checkpoint(std::istream& is) {
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw UsageError("not a checkpoint file");
  }
  if (detail::read_le<std::uint32_t>(is) != kCheckpointVersion) {
    throw UsageError("unsupported checkpoint version");
  }
  MlpShape shape;
  const auto layers = detail::read_le<std::uint32_t>(is);
  shape.input = detail::read_le<std::uint64_t>(is);
  shape.hidden.clear();
  for (std::uint32_t i = 0; i < layers; ++i) {
    shape.hidden.push_back(detail::read_le<std::uint64_t>(is));
  }
  shape.actions = detail::read_le<std::uint64_t>(is);
  const auto count = detail::read_le<std::uint64_t>(is);
  Mlp net(shape);
  if (count != net.param_count()) {
    throw UsageError("checkpoint parameter count does not match its shape");
  }
  for (double& p : net.params()) p = detail::read_le<double>(is);
  return net;
}

inline void save_checkpoint(const Mlp& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write checkpoint " + path);
  save_checkpoint(net, os);
  if (!os) throw UsageError("failed writing checkpoint " + path);
}

inline Mlp load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open checkpoint " + path);
  return load_checkpoint(is);
}

}  // namespace sfcrl::nn
