#pragma once
/*
 * spectral.hpp: truncated spectral phase space and its rotation group.
 *
 * A state is N pairs (x_k, y_k), one per retained eigenvalue λ_k > 0 of a
 * strongly positive self-adjoint operator. Identifying each pair with
 * z_k = x_k + i y_k, the homogeneous evolution is a per-mode rotation
 *
 *     U(t):  z_k ↦ e^{-i ω_k t} z_k,        ω_k = √λ_k,
 *
 * i.e. the flow of (x_k, y_k)' = (ω_k y_k, -ω_k x_k). Everything downstream
 * (monodromy, resonance detection, Green operators) reduces to arithmetic on
 * the corresponding 2×2 rotation blocks.
 *
 * The period averages (1/(n+1)) Σ_{j=0}^{n} U(jw) converge to the orthogonal
 * projector onto the fixed subspace of the monodromy U(w): per mode the limit
 * is the identity when θ_k = ω_k w lands on 2πZ (a resonant mode) and zero
 * otherwise, since a plane rotation by a non-multiple of 2π fixes only the
 * origin. Both the limit projector and the finite average (evaluated in
 * closed Dirichlet-kernel form, stable arbitrarily close to resonance) are
 * provided.
 */

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pbvp {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// ── States ─────────────────────────────────────────────────────────────────

// One mode's coordinates in the two copies of the base space.
struct Pair {
  double x = 0.0;
  double y = 0.0;
};

inline Pair operator+(Pair a, Pair b) { return {a.x + b.x, a.y + b.y}; }
inline Pair operator-(Pair a, Pair b) { return {a.x - b.x, a.y - b.y}; }
inline Pair operator*(double s, Pair a) { return {s * a.x, s * a.y}; }
inline Pair operator-(Pair a) { return {-a.x, -a.y}; }

inline std::complex<double> to_complex(Pair p) { return {p.x, p.y}; }
inline Pair to_pair(std::complex<double> z) { return {z.real(), z.imag()}; }

// Element of the truncated phase space: one (x, y)-pair per mode.
struct PhaseVector {
  std::vector<Pair> pairs;

  PhaseVector() = default;
  explicit PhaseVector(std::size_t n) : pairs(n) {}
  explicit PhaseVector(std::vector<Pair> p) : pairs(std::move(p)) {}

  std::size_t size() const { return pairs.size(); }
  Pair& operator[](std::size_t k) { return pairs[k]; }
  const Pair& operator[](std::size_t k) const { return pairs[k]; }

  static PhaseVector zero(std::size_t n) { return PhaseVector(n); }
};

namespace detail {
inline void require_same_size(std::size_t a, std::size_t b, const char* where) {
  if (a != b)
    throw std::invalid_argument(std::string(where) + ": size mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
}
}  // namespace detail

inline PhaseVector operator+(const PhaseVector& a, const PhaseVector& b) {
  detail::require_same_size(a.size(), b.size(), "PhaseVector +");
  PhaseVector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
  return out;
}

inline PhaseVector operator-(const PhaseVector& a, const PhaseVector& b) {
  detail::require_same_size(a.size(), b.size(), "PhaseVector -");
  PhaseVector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

inline PhaseVector operator*(double s, const PhaseVector& a) {
  PhaseVector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = s * a[k];
  return out;
}

// Euclidean inner product and norm (unit weight on every mode).
inline double inner(const PhaseVector& a, const PhaseVector& b) {
  detail::require_same_size(a.size(), b.size(), "inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].x * b[k].x + a[k].y * b[k].y;
  return s;
}

inline double norm(const PhaseVector& a) { return std::sqrt(inner(a, a)); }

// Largest per-mode modulus max_k |x_k + i y_k|; the sup-norm used for
// iteration increments.
inline double max_mode_abs(const PhaseVector& a) {
  double m = 0.0;
  for (const Pair& p : a.pairs) m = std::max(m, std::hypot(p.x, p.y));
  return m;
}

inline bool all_finite(const PhaseVector& a) {
  for (const Pair& p : a.pairs)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  return true;
}

// ── Operator ───────────────────────────────────────────────────────────────

// Truncated representation of the operator by its retained eigenvalues
// λ_1 ≤ … ≤ λ_N, all strictly positive. Mode indices are 0-based.
class SpectralOperator {
 public:
  explicit SpectralOperator(std::vector<double> eigenvalues)
      : eig_(std::move(eigenvalues)) {
    if (eig_.empty())
      throw std::invalid_argument("SpectralOperator: at least one eigenvalue required");
    double prev = 0.0;
    for (std::size_t k = 0; k < eig_.size(); ++k) {
      if (!std::isfinite(eig_[k]) || eig_[k] <= 0.0)
        throw std::invalid_argument("SpectralOperator: eigenvalue " +
                                    std::to_string(k + 1) + " must be positive and finite");
      if (eig_[k] < prev)
        throw std::invalid_argument("SpectralOperator: eigenvalues must be nondecreasing");
      prev = eig_[k];
    }
    freq_.reserve(eig_.size());
    for (double lam : eig_) freq_.push_back(std::sqrt(lam));
  }

  std::size_t n_modes() const { return eig_.size(); }
  const std::vector<double>& eigenvalues() const { return eig_; }

  double eigenvalue(std::size_t k) const {
    check_mode(k);
    return eig_[k];
  }

  // ω_k = √λ_k, the rotation frequency of mode k.
  double frequency(std::size_t k) const {
    check_mode(k);
    return freq_[k];
  }

 private:
  void check_mode(std::size_t k) const {
    if (k >= eig_.size())
      throw std::out_of_range("SpectralOperator: mode index " + std::to_string(k) +
                              " out of range [0, " + std::to_string(eig_.size()) + ")");
  }

  std::vector<double> eig_;
  std::vector<double> freq_;
};

// Rotation angle θ_k = √λ_k · t accumulated by mode k over time t.
inline double mode_angle(const SpectralOperator& op, std::size_t k, double t) {
  return op.frequency(k) * t;
}

// ── 2×2 blocks ─────────────────────────────────────────────────────────────

struct Block {
  // row-major entries
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Block identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Block zero() { return {}; }

  // Action of multiplication by the complex scalar z on x + iy.
  static Block complex_scalar(std::complex<double> z) {
    return {z.real(), -z.imag(), z.imag(), z.real()};
  }

  // Action of e^{-iθ}: the evolution block for angle θ.
  static Block rotation(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c, s, -s, c};
  }

  Pair apply(Pair p) const { return {a11 * p.x + a12 * p.y, a21 * p.x + a22 * p.y}; }

  Block transpose() const { return {a11, a21, a12, a22}; }
};

inline Block operator+(Block a, Block b) {
  return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}
inline Block operator-(Block a, Block b) {
  return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}
inline Block operator*(Block a, Block b) {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
          a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}
inline Block operator*(double s, Block a) {
  return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
}

inline double max_abs(Block b) {
  return std::max(std::max(std::abs(b.a11), std::abs(b.a12)),
                  std::max(std::abs(b.a21), std::abs(b.a22)));
}

// Mode-diagonal operator on the phase space: one 2×2 block per mode.
struct BlockDiagonalMap {
  std::vector<Block> blocks;

  BlockDiagonalMap() = default;
  explicit BlockDiagonalMap(std::vector<Block> b) : blocks(std::move(b)) {}

  static BlockDiagonalMap identity(std::size_t n) {
    return BlockDiagonalMap(std::vector<Block>(n, Block::identity()));
  }

  std::size_t size() const { return blocks.size(); }

  PhaseVector apply(const PhaseVector& phi) const {
    detail::require_same_size(blocks.size(), phi.size(), "BlockDiagonalMap::apply");
    PhaseVector out(phi.size());
    for (std::size_t k = 0; k < phi.size(); ++k) out[k] = blocks[k].apply(phi[k]);
    return out;
  }

  // this ∘ other
  BlockDiagonalMap compose(const BlockDiagonalMap& other) const {
    detail::require_same_size(blocks.size(), other.size(), "BlockDiagonalMap::compose");
    std::vector<Block> out(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) out[k] = blocks[k] * other.blocks[k];
    return BlockDiagonalMap(std::move(out));
  }
};

inline double max_abs_diff(const BlockDiagonalMap& a, const BlockDiagonalMap& b) {
  detail::require_same_size(a.size(), b.size(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, max_abs(a.blocks[k] - b.blocks[k]));
  return m;
}

// ── Evolution ──────────────────────────────────────────────────────────────

// U(t) applied to a state: per mode a rotation by θ_k = ω_k t.
inline PhaseVector evolve(const SpectralOperator& op, double t, const PhaseVector& phi) {
  detail::require_same_size(op.n_modes(), phi.size(), "evolve");
  PhaseVector out(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k)
    out[k] = Block::rotation(op.frequency(k) * t).apply(phi[k]);
  return out;
}

inline BlockDiagonalMap evolution_map(const SpectralOperator& op, double t) {
  std::vector<Block> blocks;
  blocks.reserve(op.n_modes());
  for (std::size_t k = 0; k < op.n_modes(); ++k)
    blocks.push_back(Block::rotation(op.frequency(k) * t));
  return BlockDiagonalMap(std::move(blocks));
}

// Period map U(w).
inline BlockDiagonalMap monodromy(const SpectralOperator& op, double w) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::invalid_argument("monodromy: period must be positive and finite");
  return evolution_map(op, w);
}

// ── Resonance and the averaged projector ───────────────────────────────────

// Signed representative of θ modulo 2π in (-π, π].
inline double angle_residue(double theta) { return std::remainder(theta, two_pi); }

// Distance from θ to the nearest multiple of 2π.
inline double angle_distance(double theta) { return std::abs(angle_residue(theta)); }

inline bool is_resonant(const SpectralOperator& op, double w, std::size_t k, double tol) {
  return angle_distance(mode_angle(op, k, w)) <= tol;
}

inline std::vector<bool> resonance_flags(const SpectralOperator& op, double w, double tol) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::invalid_argument("resonance_flags: period must be positive and finite");
  if (tol < 0.0) throw std::invalid_argument("resonance_flags: tolerance must be nonnegative");
  std::vector<bool> flags(op.n_modes());
  for (std::size_t k = 0; k < op.n_modes(); ++k) flags[k] = is_resonant(op, w, k, tol);
  return flags;
}

// Limit of the averaged monodromy powers: identity block on modes with
// dist(θ_k, 2πZ) ≤ resonance_tol, zero block elsewhere.
inline BlockDiagonalMap cesaro_projector_closed(const SpectralOperator& op, double w,
                                                double resonance_tol = 1e-9) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::invalid_argument("cesaro_projector_closed: period must be positive and finite");
  if (resonance_tol < 0.0)
    throw std::invalid_argument("cesaro_projector_closed: tolerance must be nonnegative");
  std::vector<Block> blocks;
  blocks.reserve(op.n_modes());
  for (std::size_t k = 0; k < op.n_modes(); ++k)
    blocks.push_back(is_resonant(op, w, k, resonance_tol) ? Block::identity() : Block::zero());
  return BlockDiagonalMap(std::move(blocks));
}

// Finite average (1/(n+1)) Σ_{j=0}^{n} U(jw), evaluated per mode through the
// Dirichlet kernel:
//
//   (1/(n+1)) Σ_j e^{-ijr} = e^{-inr/2} · sin((n+1)r/2) / ((n+1) sin(r/2)),
//
// with r the residue of θ_k modulo 2π. The kernel form stays accurate for r
// arbitrarily close to 0, where the naive geometric-sum quotient cancels.
inline BlockDiagonalMap cesaro_projector_empirical(const SpectralOperator& op, double w,
                                                   long n) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::invalid_argument("cesaro_projector_empirical: period must be positive and finite");
  if (n < 1) throw std::invalid_argument("cesaro_projector_empirical: n must be >= 1");
  std::vector<Block> blocks;
  blocks.reserve(op.n_modes());
  const double np1 = static_cast<double>(n) + 1.0;
  for (std::size_t k = 0; k < op.n_modes(); ++k) {
    const double r = angle_residue(mode_angle(op, k, w));
    if (r == 0.0) {
      blocks.push_back(Block::identity());
      continue;
    }
    const double mag = std::sin(np1 * r / 2.0) / (np1 * std::sin(r / 2.0));
    const std::complex<double> z =
        std::polar(mag, -static_cast<double>(n) * r / 2.0);
    blocks.push_back(Block::complex_scalar(z));
  }
  return BlockDiagonalMap(std::move(blocks));
}

// ── Graph inner product ────────────────────────────────────────────────────

// Inner product weighting each mode by λ_k²; the norm in which states carry
// two powers of the operator. Rotations are isometries for it because the
// weight is constant on each block.
inline double ht_inner(const SpectralOperator& op, const PhaseVector& a, const PhaseVector& b) {
  detail::require_same_size(op.n_modes(), a.size(), "ht_inner");
  detail::require_same_size(a.size(), b.size(), "ht_inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double wgt = op.eigenvalue(k) * op.eigenvalue(k);
    s += wgt * (a[k].x * b[k].x + a[k].y * b[k].y);
  }
  return s;
}

inline double ht_norm(const SpectralOperator& op, const PhaseVector& a) {
  return std::sqrt(ht_inner(op, a, a));
}

}  // namespace pbvp
