#pragma once

#include <complex>

namespace bohmsim {

/// w(z) together with a bound on its relative error.
struct FaddeevaResult {
  std::complex<double> value;
  double rel_error = 0.0;
};

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z) for Im z >= 0.
///
/// |z| >= 8 uses the Laplace continued fraction truncated at a depth chosen
/// from |z|; smaller arguments use Weideman's rational expansion with 40
/// terms. Both branches are accurate to a few 1e-16 relative. Arguments in
/// the lower half-plane are rejected through rel_error = +inf, since callers
/// here never need the exponentially growing branch.
FaddeevaResult faddeeva_w(std::complex<double> z);

/// erf(z) for moderate complex arguments; test helper built on faddeeva_w.
std::complex<double> erf_complex(std::complex<double> z);

} // namespace bohmsim
