#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pietl/special.hpp"

namespace pietl {

// Random source for all samplers.
//
// Variates are derived from the raw 64-bit engine output by the routines
// below rather than by <random> distribution objects: those are
// implementation-defined and some cache state between calls, which would
// break exact checkpoint resumption and byte-identical outputs across
// toolchains. The only state is the engine, which round-trips through
// `state()` / `set_state()`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // log of a Gamma(shape, 1) variate. Working in log space keeps draws with
  // tiny shapes (which underflow as plain doubles) usable for Dirichlet and
  // Beta normalization. Shape 0 is the degenerate point mass at 0.
  double log_gamma_variate(double shape) {
    if (shape <= 0.0) return kNegInf;
    if (shape < 1.0) {
      return log_gamma_variate(shape + 1.0) + std::log(uniform()) / shape;
    }
    // Marsaglia & Tsang.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return std::log(d) + std::log(v);
      }
    }
  }

  double gamma(double shape, double rate = 1.0) {
    return std::exp(log_gamma_variate(shape)) / rate;
  }

  double beta(double a, double b) {
    const double la = log_gamma_variate(a);
    const double lb = log_gamma_variate(b);
    if (la == kNegInf && lb == kNegInf) return a >= b ? 1.0 : 0.0;
    return std::exp(la - log_sum_exp(la, lb));
  }

  // Dirichlet draw; zero parameters give exactly-zero components.
  std::vector<double> dirichlet(std::span<const double> params) {
    std::vector<double> out(params.size());
    double hi = kNegInf;
    for (std::size_t k = 0; k < params.size(); ++k) {
      out[k] = log_gamma_variate(params[k]);
      hi = std::max(hi, out[k]);
    }
    if (hi == kNegInf) {
      // All parameters zero: no mass anywhere, fall back to uniform.
      for (double& v : out) v = 1.0 / static_cast<double>(out.size());
      return out;
    }
    double total = 0.0;
    for (double& v : out) {
      v = std::exp(v - hi);
      total += v;
    }
    for (double& v : out) v /= total;
    return out;
  }

  // Index drawn with probability proportional to exp(log_weights[k]).
  std::size_t categorical_log(std::span<const double> log_weights) {
    double hi = kNegInf;
    for (double v : log_weights) hi = std::max(hi, v);
    if (hi == kNegInf) return below(log_weights.size());
    double total = 0.0;
    for (double v : log_weights) total += std::exp(v - hi);
    double u = uniform() * total;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
      const double w = std::exp(log_weights[k] - hi);
      if (u < w) return k;
      u -= w;
    }
    // Rounding left a sliver; return the last index with positive mass.
    for (std::size_t k = log_weights.size(); k-- > 0;) {
      if (log_weights[k] != kNegInf) return k;
    }
    return log_weights.size() - 1;
  }

  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    for (std::size_t k = weights.size(); k-- > 0;) {
      if (weights[k] > 0.0) return k;
    }
    return weights.size() - 1;
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (!is) throw std::invalid_argument("Rng: malformed engine state");
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pietl
