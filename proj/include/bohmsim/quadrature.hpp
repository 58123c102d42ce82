#pragma once

#include <span>
#include <vector>

namespace bohmsim {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes by Newton iteration on P_n; cached per n (thread-safe).
const GaussLegendreRule& gauss_legendre(int n);

/// Gauss-Hermite rule for the weight exp(-x^2) with weights normalized to
/// sum to one, so that E[f(X)] for X ~ N(0, 1/2) is sum w_i f(x_i).
GaussLegendreRule gauss_hermite(int n);

/// Composite n-point Gauss-Legendre on [a, b] split into `panels` equal panels.
template <class F>
auto integrate_composite(F&& f, double a, double b, int panels, int n = 20)
{
  const auto& rule = gauss_legendre(n);
  const double h = (b - a) / panels;
  decltype(f(a)) acc{};
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    decltype(f(a)) panel{};
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      panel += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    acc += panel * (0.5 * h);
  }
  return acc;
}

} // namespace bohmsim
