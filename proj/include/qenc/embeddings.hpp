#pragma once

// Simulated embedding backends. Qubit embeddings run on a dense statevector,
// continuous-variable embeddings on Gaussian first/second moments (hbar = 2,
// vacuum covariance = identity).
//
// Bit order is big-endian: qubit 0 is the most significant bit of the basis
// index, and the first feature drives qubit 0.

#include "qenc/core.hpp"

#include <chrono>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <thread>
#include <variant>

namespace qenc {

using Complex = std::complex<double>;
using Amplitudes = Eigen::VectorXcd;

inline constexpr int kMaxQubits = 20;

struct PureState {
  Amplitudes amplitudes;
  int qubit_count = 0;

  double norm() const { return amplitudes.norm(); }
};

struct GaussianState {
  Vector mean;           // (x_0, p_0, x_1, p_1, ...)
  Eigen::MatrixXd covariance;
  int mode_count = 0;
};

using QuantumState = std::variant<PureState, GaussianState>;
using StateHandle = std::shared_ptr<const QuantumState>;

namespace detail {

inline void check_finite(std::span<const double> x, std::string_view what) {
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!std::isfinite(x[j]))
      throw ValidationError(std::string(what) + ": non-finite input " + format_double(x[j]) +
                            " at position " + std::to_string(j));
}

inline void check_qubits(std::size_t q) {
  if (q > static_cast<std::size_t>(kMaxQubits))
    throw ConfigError("statevector needs " + std::to_string(q) + " qubits; the simulator is capped at " +
                      std::to_string(kMaxQubits) +
                      " (use cell granularity or fewer components)");
}

inline PureState zero_state(int q) {
  PureState s;
  s.qubit_count = q;
  s.amplitudes = Amplitudes::Zero(Eigen::Index{1} << q);
  s.amplitudes(0) = 1.0;
  return s;
}

inline std::size_t bit_mask(int qubit, int q) { return std::size_t{1} << (q - 1 - qubit); }

/// Applies the 2x2 matrix [[a, b], [c, d]] to one qubit.
inline void apply_1q(PureState& s, int qubit, Complex a, Complex b, Complex c, Complex d) {
  const std::size_t mask = bit_mask(qubit, s.qubit_count);
  const auto dim = static_cast<std::size_t>(s.amplitudes.size());
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & mask)
      continue;
    const Complex lo = s.amplitudes(static_cast<Eigen::Index>(i));
    const Complex hi = s.amplitudes(static_cast<Eigen::Index>(i | mask));
    s.amplitudes(static_cast<Eigen::Index>(i)) = a * lo + b * hi;
    s.amplitudes(static_cast<Eigen::Index>(i | mask)) = c * lo + d * hi;
  }
}

inline void hadamard(PureState& s, int qubit) {
  const double h = std::numbers::sqrt2 / 2.0;
  apply_1q(s, qubit, h, h, h, -h);
}

inline void ry(PureState& s, int qubit, double theta) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  apply_1q(s, qubit, c, -sn, sn, c);
}

inline void rx(PureState& s, int qubit, double theta) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  apply_1q(s, qubit, c, Complex(0, -sn), Complex(0, -sn), c);
}

/// Z eigenvalue (+1 for bit 0, -1 for bit 1) of `qubit` in basis index `i`.
inline double z_sign(std::size_t i, int qubit, int q) { return (i & bit_mask(qubit, q)) ? -1.0 : 1.0; }

/// exp(-i theta/2 Z_j Z_k)
inline void zz(PureState& s, int j, int k, double theta) {
  const Complex same = std::polar(1.0, -theta / 2), diff = std::polar(1.0, theta / 2);
  for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    s.amplitudes(i) *= z_sign(u, j, s.qubit_count) * z_sign(u, k, s.qubit_count) > 0 ? same : diff;
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Qubit embeddings

inline PureState basis_embed(std::span<const double> bits) {
  detail::check_qubits(bits.size());
  std::size_t index = 0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != 0.0 && bits[j] != 1.0)
      throw ValidationError("basis embedding needs binary input; got " + detail::format_double(bits[j]) +
                            " at position " + std::to_string(j) + " (binarize first)");
    index = (index << 1) | (bits[j] == 1.0 ? 1u : 0u);
  }
  PureState s;
  s.qubit_count = static_cast<int>(bits.size());
  s.amplitudes = Amplitudes::Zero(Eigen::Index{1} << s.qubit_count);
  s.amplitudes(static_cast<Eigen::Index>(index)) = 1.0;
  return s;
}

/// Product of RY(x_j)|0>, written directly as per-qubit (cos, sin) factors.
inline PureState angle_embed(std::span<const double> x) {
  detail::check_finite(x, "angle embedding");
  detail::check_qubits(x.size());
  const int q = static_cast<int>(x.size());
  PureState s;
  s.qubit_count = q;
  s.amplitudes = Amplitudes::Ones(Eigen::Index{1} << q);
  for (int j = 0; j < q; ++j) {
    const double c = std::cos(x[static_cast<std::size_t>(j)] / 2);
    const double sn = std::sin(x[static_cast<std::size_t>(j)] / 2);
    const std::size_t mask = detail::bit_mask(j, q);
    for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i)
      s.amplitudes(i) *= (static_cast<std::size_t>(i) & mask) ? sn : c;
  }
  return s;
}

/// L layers of: Hadamards, then exp(i x_j Z_j) and exp(i x_j x_k Z_j Z_k) for all j < k.
inline PureState iqp_embed(std::span<const double> x, int layers = 1) {
  if (x.empty())
    throw ValidationError("iqp embedding needs at least one feature");
  if (layers < 1)
    throw ConfigError("iqp embedding needs layers >= 1");
  detail::check_finite(x, "iqp embedding");
  detail::check_qubits(x.size());
  const int q = static_cast<int>(x.size());
  PureState s = detail::zero_state(q);

  // the diagonal is identical in every layer
  Amplitudes phase(s.amplitudes.size());
  for (Eigen::Index i = 0; i < phase.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    double angle = 0;
    for (int j = 0; j < q; ++j) {
      const double zj = detail::z_sign(u, j, q);
      angle += x[static_cast<std::size_t>(j)] * zj;
      for (int k = j + 1; k < q; ++k)
        angle += x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(k)] * zj * detail::z_sign(u, k, q);
    }
    phase(i) = std::polar(1.0, angle);
  }

  for (int l = 0; l < layers; ++l) {
    for (int j = 0; j < q; ++j)
      detail::hadamard(s, j);
    s.amplitudes.array() *= phase.array();
  }
  return s;
}

/// Wires used by the QAOA feature map for d features.
inline int qaoa_wires(std::size_t d) { return std::max<int>(static_cast<int>(d), 2); }

/// Number of fixed parameters the QAOA feature map expects.
inline std::size_t qaoa_param_count(std::size_t d, int layers) {
  return 2 * static_cast<std::size_t>(layers) * static_cast<std::size_t>(qaoa_wires(d));
}

/// Uniform angles in [0, 2pi) from a seeded generator.
inline std::vector<double> qaoa_seeded_params(std::size_t d, int layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> p(qaoa_param_count(d, layers));
  for (auto& v : p)
    v = dist(rng);
  return p;
}

/// Per layer l, with w = max(d, 2) wires and zero-padded features:
///   RX(x_j) on every wire,
///   ZZ(params[l*2w + j]) on the ring edge (j, (j+1) mod w),
///   RY(params[l*2w + w + j]) on every wire.
/// With two wires the ring has the edges (0,1) and (1,0).
inline PureState qaoa_embed(std::span<const double> x, std::span<const double> params, int layers = 1) {
  if (layers < 1)
    throw ConfigError("qaoa embedding needs layers >= 1");
  const int w = qaoa_wires(x.size());
  if (params.size() != qaoa_param_count(x.size(), layers))
    throw ConfigError("qaoa embedding expects " + std::to_string(qaoa_param_count(x.size(), layers)) +
                      " parameters for " + std::to_string(x.size()) + " features and " +
                      std::to_string(layers) + " layers, got " + std::to_string(params.size()));
  detail::check_finite(x, "qaoa embedding");
  detail::check_finite(params, "qaoa parameters");
  detail::check_qubits(static_cast<std::size_t>(w));

  PureState s = detail::zero_state(w);
  for (int l = 0; l < layers; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * 2 * static_cast<std::size_t>(w);
    for (int j = 0; j < w; ++j)
      detail::rx(s, j, static_cast<std::size_t>(j) < x.size() ? x[static_cast<std::size_t>(j)] : 0.0);
    for (int j = 0; j < w; ++j)
      detail::zz(s, j, (j + 1) % w, params[base + static_cast<std::size_t>(j)]);
    for (int j = 0; j < w; ++j)
      detail::ry(s, j, params[base + static_cast<std::size_t>(w + j)]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Continuous-variable embeddings

/// Coherent states D(x_j)|0>, one mode per entry, alpha real.
inline GaussianState displacement_embed(std::span<const double> x) {
  detail::check_finite(x, "displacement embedding");
  GaussianState g;
  g.mode_count = static_cast<int>(x.size());
  g.mean = Vector::Zero(2 * g.mode_count);
  for (std::size_t j = 0; j < x.size(); ++j)
    g.mean(static_cast<Eigen::Index>(2 * j)) = 2.0 * x[j];
  g.covariance = Eigen::MatrixXd::Identity(2 * g.mode_count, 2 * g.mode_count);
  return g;
}

/// Squeezed vacua S(r_j)|0>: covariance diag(e^{-2r}, e^{2r}) per mode.
inline GaussianState squeezing_embed(std::span<const double> r) {
  detail::check_finite(r, "squeezing embedding");
  GaussianState g;
  g.mode_count = static_cast<int>(r.size());
  g.mean = Vector::Zero(2 * g.mode_count);
  g.covariance = Eigen::MatrixXd::Zero(2 * g.mode_count, 2 * g.mode_count);
  for (std::size_t j = 0; j < r.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(2 * j);
    g.covariance(k, k) = std::exp(-2.0 * r[j]);
    g.covariance(k + 1, k + 1) = std::exp(2.0 * r[j]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Composition

inline PureState tensor_join(std::span<const PureState> states) {
  if (states.empty())
    throw ValidationError("tensor_join needs at least one state");
  std::size_t q = 0;
  for (const auto& s : states)
    q += static_cast<std::size_t>(s.qubit_count);
  detail::check_qubits(q);
  Amplitudes acc = states[0].amplitudes;
  for (std::size_t k = 1; k < states.size(); ++k) {
    const Amplitudes& rhs = states[k].amplitudes;
    Amplitudes next(acc.size() * rhs.size());
    for (Eigen::Index a = 0; a < acc.size(); ++a)
      next.segment(a * rhs.size(), rhs.size()) = acc(a) * rhs;
    acc = std::move(next);
  }
  return PureState{std::move(acc), static_cast<int>(q)};
}

inline GaussianState gaussian_join(std::span<const GaussianState> states) {
  if (states.empty())
    throw ValidationError("gaussian_join needs at least one state");
  int m = 0;
  for (const auto& s : states)
    m += s.mode_count;
  GaussianState g;
  g.mode_count = m;
  g.mean = Vector::Zero(2 * m);
  g.covariance = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  Eigen::Index off = 0;
  for (const auto& s : states) {
    const Eigen::Index n = 2 * s.mode_count;
    g.mean.segment(off, n) = s.mean;
    g.covariance.block(off, off, n, n) = s.covariance;
    off += n;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Embedder: an EmbeddingSpec bound to a fixed input width.

class Embedder {
public:
  /// `width` is the number of values per call: 1 for cell granularity, d for rows.
  Embedder(EmbeddingSpec spec, std::size_t width) : spec_(std::move(spec)), width_(width) {
    if (spec_.layers < 1)
      throw ConfigError("embedding layers must be >= 1");
    switch (spec_.kind) {
    case EmbeddingKind::basis:
    case EmbeddingKind::angle:
    case EmbeddingKind::iqp: detail::check_qubits(width_); break;
    case EmbeddingKind::qaoa:
      detail::check_qubits(static_cast<std::size_t>(qaoa_wires(width_)));
      params_ = spec_.qaoa_params.empty() ? qaoa_seeded_params(width_, spec_.layers, spec_.rng_seed)
                                          : spec_.qaoa_params;
      if (params_.size() != qaoa_param_count(width_, spec_.layers))
        throw ConfigError("qaoa_params has " + std::to_string(params_.size()) + " entries; " +
                          std::to_string(qaoa_param_count(width_, spec_.layers)) + " needed for width " +
                          std::to_string(width_) + " and " + std::to_string(spec_.layers) + " layers");
      break;
    case EmbeddingKind::displacement:
    case EmbeddingKind::squeezing: break;
    }
  }

  const EmbeddingSpec& spec() const { return spec_; }
  std::size_t width() const { return width_; }
  std::span<const double> qaoa_params() const { return params_; }

  /// Artificial per-call latency, for demonstrations on tiny datasets.
  void set_call_delay(std::chrono::microseconds d) { delay_ = d; }

  QuantumState operator()(std::span<const double> x) const {
    if (x.size() != width_)
      throw ValidationError("embedder expects " + std::to_string(width_) + " values, got " +
                            std::to_string(x.size()));
    if (delay_.count() > 0)
      std::this_thread::sleep_for(delay_);
    switch (spec_.kind) {
    case EmbeddingKind::basis: return basis_embed(x);
    case EmbeddingKind::angle: return angle_embed(x);
    case EmbeddingKind::iqp: return iqp_embed(x, spec_.layers);
    case EmbeddingKind::qaoa: return qaoa_embed(x, params_, spec_.layers);
    case EmbeddingKind::displacement: return displacement_embed(x);
    case EmbeddingKind::squeezing: return squeezing_embed(x);
    }
    throw ConfigError("unhandled embedding kind");
  }

private:
  EmbeddingSpec spec_;
  std::size_t width_;
  std::vector<double> params_;
  std::chrono::microseconds delay_{0};
};

} // namespace qenc
