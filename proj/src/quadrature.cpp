#include "bohmsim/quadrature.hpp"

#include "bohmsim/core.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace bohmsim {

namespace {

GaussLegendreRule build_legendre(int n)
{
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * k - 1) * x * p1 - (k - 1) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    const double w = 2 / ((1 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  return rule;
}

} // namespace

const GaussLegendreRule& gauss_legendre(int n)
{
  if (n < 1)
    throw ConfigError("Gauss-Legendre order must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot)
    slot = std::make_unique<GaussLegendreRule>(build_legendre(n));
  return *slot;
}

GaussLegendreRule gauss_hermite(int n)
{
  if (n < 1)
    throw ConfigError("Gauss-Hermite order must be >= 1");
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  double z = 0;
  // Orthonormal Hermite recurrence with the usual root-by-root starting guesses.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -1.0 / 6);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * rule.nodes[1];
    else
      z = 2.0 * z - rule.nodes[static_cast<std::size_t>(i - 2)];
    double pp = 0;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = pim4, p2 = 0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z)))
        break;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = z;
    rule.nodes[hi] = -z;
    rule.weights[lo] = rule.weights[hi] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1)
    rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  // the analytic sum is sqrt(pi); dividing by the computed sum instead makes
  // the one-node rule exactly {0, 1}
  double total = 0;
  for (double w : rule.weights)
    total += w;
  for (auto& w : rule.weights)
    w /= total;
  return rule;
}

} // namespace bohmsim
