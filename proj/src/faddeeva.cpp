#include "bohmsim/faddeeva.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace bohmsim {

namespace {

constexpr int kWeidemanN = 40;

struct WeidemanTable {
  std::array<double, kWeidemanN> coeff{}; // highest power first
  double L = 0.0;

  WeidemanTable()
  {
    const int M = 2 * kWeidemanN;
    const int M2 = 2 * M;
    L = std::sqrt(kWeidemanN / std::numbers::sqrt2);

    // f sampled on theta_k = k pi / M, k = -M+1 .. M-1, with f(-M) = 0,
    // laid out in fftshift order for the DFT below.
    std::array<double, 4 * kWeidemanN> f{};
    for (int k = -M + 1; k <= M - 1; ++k) {
      const double t = L * std::tan(0.5 * k * std::numbers::pi / M);
      const double v = std::exp(-t * t) * (L * L + t * t);
      f[static_cast<std::size_t>((k + M2) % M2)] = v;
    }
    // Only the real part of DFT bins 1..N is needed.
    for (int j = 1; j <= kWeidemanN; ++j) {
      double acc = 0;
      for (int n = 0; n < M2; ++n)
        acc += f[static_cast<std::size_t>(n)] * std::cos(2 * std::numbers::pi * j * n / M2);
      coeff[static_cast<std::size_t>(kWeidemanN - j)] = acc / M2;
    }
  }
};

const WeidemanTable& weideman()
{
  static const WeidemanTable table;
  return table;
}

std::complex<double> w_weideman(std::complex<double> z)
{
  const auto& tab = weideman();
  // denom = L - i z, Z = (L + i z) / denom; Horner in real arithmetic.
  const double dr = tab.L + z.imag();
  const double di = -z.real();
  const double nr = tab.L - z.imag();
  const double ni = z.real();
  const double inv = 1.0 / (dr * dr + di * di);
  const double Zr = (nr * dr + ni * di) * inv;
  const double Zi = (ni * dr - nr * di) * inv;
  // Four interleaved Horner chains in Z^4 to shorten the dependency chain.
  const double Z2r = Zr * Zr - Zi * Zi, Z2i = 2.0 * Zr * Zi;
  const double Z3r = Z2r * Zr - Z2i * Zi, Z3i = Z2r * Zi + Z2i * Zr;
  const double Z4r = Z2r * Z2r - Z2i * Z2i, Z4i = 2.0 * Z2r * Z2i;
  static_assert(kWeidemanN % 4 == 0);
  double ar[4] = {0, 0, 0, 0}, ai[4] = {0, 0, 0, 0};
  for (int i = 0; i < kWeidemanN; i += 4) {
    // coeff[i + j] multiplies Z^(N-1-i-j); chain k collects powers = k mod 4.
    for (int j = 0; j < 4; ++j) {
      const int k = 3 - j;
      const double t = ar[k] * Z4r - ai[k] * Z4i + tab.coeff[static_cast<std::size_t>(i + j)];
      ai[k] = ar[k] * Z4i + ai[k] * Z4r;
      ar[k] = t;
    }
  }
  const double pr = ar[0] + (ar[1] * Zr - ai[1] * Zi) + (ar[2] * Z2r - ai[2] * Z2i) +
                    (ar[3] * Z3r - ai[3] * Z3i);
  const double pi = ai[0] + (ar[1] * Zi + ai[1] * Zr) + (ar[2] * Z2i + ai[2] * Z2r) +
                    (ar[3] * Z3i + ai[3] * Z3r);
  // 1/denom and 1/denom^2
  const double qr = dr * inv;
  const double qi = -di * inv;
  const double q2r = qr * qr - qi * qi;
  const double q2i = 2.0 * qr * qi;
  const double rs = 1.0 / std::sqrt(std::numbers::pi);
  return {2.0 * (pr * q2r - pi * q2i) + rs * qr, 2.0 * (pr * q2i + pi * q2r) + rs * qi};
}

int continued_fraction_depth(double r)
{
  if (r >= 400)
    return 2;
  if (r >= 100)
    return 3;
  if (r >= 40)
    return 4;
  if (r >= 20)
    return 6;
  if (r >= 12)
    return 8;
  return 11;
}

std::complex<double> w_continued_fraction(std::complex<double> z, int depth)
{
  std::complex<double> r = z;
  for (int k = depth; k >= 1; --k)
    r = z - (0.5 * k) / r;
  return std::complex<double>(0, 1 / std::sqrt(std::numbers::pi)) / r;
}

} // namespace

FaddeevaResult faddeeva_w(std::complex<double> z)
{
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || z.imag() < 0)
    return {{std::numeric_limits<double>::quiet_NaN(), 0.0},
            std::numeric_limits<double>::infinity()};
  const double r = std::abs(z);
  if (r >= 8.0)
    return {w_continued_fraction(z, continued_fraction_depth(r)), 1e-15};
  return {w_weideman(z), 1e-14};
}

std::complex<double> erf_complex(std::complex<double> z)
{
  // erf(z) = 1 - exp(-z^2) w(i z) for Re z >= 0, odd extension otherwise.
  const std::complex<double> I(0, 1);
  const double sign = z.real() >= 0 ? 1.0 : -1.0;
  const std::complex<double> u = sign * z;
  return sign * (1.0 - std::exp(-u * u) * faddeeva_w(I * u).value);
}

} // namespace bohmsim
