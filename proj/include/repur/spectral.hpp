#pragma once

// Fourier-domain filtering of (sequence x feature) latents: 1D/2D DFT and
// FFT, real projection, low-pass masking and the inverse transform.

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace repur::spectral {

using Eigen::Index;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Direction { forward, inverse };

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

namespace detail {

// e^{sign * 2 pi i * num / den}, with num reduced mod den for accuracy.
template <typename Scalar>
std::complex<Scalar> twiddle(Index num, Index den, Direction dir) {
  const Scalar sign = dir == Direction::forward ? Scalar(-1) : Scalar(1);
  const Scalar angle = sign * Scalar(2) * std::numbers::pi_v<Scalar> * static_cast<Scalar>(num % den) /
                       static_cast<Scalar>(den);
  return {std::cos(angle), std::sin(angle)};
}

template <typename Scalar>
void radix2_in_place(ComplexVector<Scalar>& a, Direction dir) {
  const Index n = a.size();
  for (Index i = 1, j = 0; i < n; ++i) {
    Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len / 2;
    for (Index k = 0; k < half; ++k) {
      const std::complex<Scalar> w = twiddle<Scalar>(k, len, dir);
      for (Index start = 0; start < n; start += len) {
        const std::complex<Scalar> u = a[start + k];
        const std::complex<Scalar> v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Direct O(T^2) transform. Forward: X_k = sum_t x_t e^{-2 pi i t k / T};
/// inverse uses the conjugate kernel and divides by T.
template <typename Scalar>
ComplexVector<Scalar> dft_1d(const ComplexVector<Scalar>& x, Direction dir = Direction::forward) {
  const Index n = x.size();
  if (n == 0) throw std::invalid_argument("dft_1d: empty input");
  ComplexVector<Scalar> out(n);
  for (Index k = 0; k < n; ++k) {
    std::complex<Scalar> acc{0, 0};
    for (Index t = 0; t < n; ++t) acc += x[t] * detail::twiddle<Scalar>(t * k, n, dir);
    out[k] = acc;
  }
  if (dir == Direction::inverse) out /= static_cast<Scalar>(n);
  return out;
}

/// Radix-2 Cooley-Tukey for power-of-two lengths; other lengths use dft_1d.
template <typename Scalar>
ComplexVector<Scalar> fft_1d(const ComplexVector<Scalar>& x, Direction dir = Direction::forward) {
  if (!is_power_of_two(x.size())) return dft_1d<Scalar>(x, dir);
  ComplexVector<Scalar> a = x;
  detail::radix2_in_place(a, dir);
  if (dir == Direction::inverse) a /= static_cast<Scalar>(a.size());
  return a;
}

/// Transforms every row (the feature axis) and then every column (the
/// sequence axis) in place.
template <typename Scalar>
void transform_rows(ComplexMatrix<Scalar>& m, Direction dir) {
  ComplexVector<Scalar> buf(m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    buf = m.row(r).transpose();
    m.row(r) = fft_1d<Scalar>(buf, dir).transpose();
  }
}

template <typename Scalar>
void transform_cols(ComplexMatrix<Scalar>& m, Direction dir) {
  ComplexVector<Scalar> buf(m.rows());
  for (Index c = 0; c < m.cols(); ++c) {
    buf = m.col(c);
    m.col(c) = fft_1d<Scalar>(buf, dir);
  }
}

/// Sequence-axis transform of the feature-axis transform of h (T x d).
template <typename Derived>
auto fft_2d(const Eigen::MatrixBase<Derived>& h) {
  using Scalar = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (h.rows() == 0 || h.cols() == 0) throw std::invalid_argument("fft_2d: empty matrix");
  ComplexMatrix<Scalar> spectrum = h.template cast<std::complex<Scalar>>();
  transform_rows(spectrum, Direction::forward);
  transform_cols(spectrum, Direction::forward);
  return spectrum;
}

/// Exact inverse of fft_2d: sequence axis first, then feature axis.
template <typename Scalar>
ComplexMatrix<Scalar> ifft_2d_complex(ComplexMatrix<Scalar> spectrum) {
  if (spectrum.size() == 0) throw std::invalid_argument("ifft_2d: empty matrix");
  transform_cols(spectrum, Direction::inverse);
  transform_rows(spectrum, Direction::inverse);
  return spectrum;
}

template <typename Scalar>
RealMatrix<Scalar> real_project(const ComplexMatrix<Scalar>& spectrum) {
  return spectrum.real();
}

template <typename Scalar>
struct InverseResult {
  RealMatrix<Scalar> values;
  Scalar max_imag_residue = 0;  // largest |Im| discarded by the projection
};

/// Inverse transform of a real spectrum (zero imaginary part); returns the
/// real part and reports the discarded imaginary residue.
template <typename Derived>
auto ifft_2d(const Eigen::MatrixBase<Derived>& spectrum) {
  using Scalar = typename Derived::Scalar;
  ComplexMatrix<Scalar> full = ifft_2d_complex<Scalar>(spectrum.template cast<std::complex<Scalar>>());
  InverseResult<Scalar> result;
  result.values = full.real();
  result.max_imag_residue = full.size() ? full.imag().cwiseAbs().maxCoeff() : Scalar(0);
  return result;
}

enum class LpfMode { both_axes, seq_only };

inline std::string to_string(LpfMode mode) { return mode == LpfMode::both_axes ? "both_axes" : "seq_only"; }

inline LpfMode lpf_mode_from_string(const std::string& s) {
  if (s == "both_axes") return LpfMode::both_axes;
  if (s == "seq_only") return LpfMode::seq_only;
  throw std::invalid_argument("unknown LPF mode '" + s + "' (expected both_axes or seq_only)");
}

/// Binary keep-mask: m(t, d) = 1 iff t <= alpha (and d <= alpha in
/// both_axes mode), indices 0-based.
struct LpfMask {
  Index alpha = 0;
  LpfMode mode = LpfMode::both_axes;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> matrix;

  static LpfMask make(Index seq_len, Index feature_dim, Index alpha, LpfMode mode) {
    if (alpha < 0) throw std::invalid_argument("LPF cutoff alpha must be non-negative");
    LpfMask mask{alpha, mode, {}};
    mask.matrix.resize(seq_len, feature_dim);
    for (Index t = 0; t < seq_len; ++t) {
      for (Index d = 0; d < feature_dim; ++d) {
        const bool keep = t <= alpha && (mode == LpfMode::seq_only || d <= alpha);
        mask.matrix(t, d) = keep ? 1 : 0;
      }
    }
    return mask;
  }
};

/// H (.) M.
template <typename Derived>
auto apply_lpf(const Eigen::MatrixBase<Derived>& spectrum, const LpfMask& mask) {
  using Scalar = typename Derived::Scalar;
  if (spectrum.rows() != mask.matrix.rows() || spectrum.cols() != mask.matrix.cols()) {
    throw std::invalid_argument("apply_lpf: spectrum is " + std::to_string(spectrum.rows()) + "x" +
                                std::to_string(spectrum.cols()) + " but mask is " +
                                std::to_string(mask.matrix.rows()) + "x" + std::to_string(mask.matrix.cols()));
  }
  RealMatrix<Scalar> out = spectrum.cwiseProduct(mask.matrix.template cast<Scalar>().matrix());
  return out;
}

/// Full filter: inverse(mask(Re(fft_2d(h)))). A fixed linear map of h.
template <typename Derived>
auto low_pass_filter(const Eigen::MatrixBase<Derived>& h, Index alpha, LpfMode mode) {
  using Scalar = typename Derived::Scalar;
  const auto mask = LpfMask::make(h.rows(), h.cols(), alpha, mode);
  RealMatrix<Scalar> projected = real_project<Scalar>(fft_2d(h));
  return ifft_2d(apply_lpf(projected, mask));
}

}  // namespace repur::spectral
