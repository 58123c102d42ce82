#include "bohmsim/histogram.hpp"

#include "bohmsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bohmsim {

double DensityGrid::integrate(double a, double b) const
{
  if (x.size() < 2 || !(b > a))
    return 0.0;
  a = std::max(a, x.front());
  b = std::min(b, x.back());
  if (!(b > a))
    return 0.0;
  const auto value_at = [&](std::size_t i, double xv) {
    const double f = (xv - x[i]) / (x[i + 1] - x[i]);
    return rho[i] + f * (rho[i + 1] - rho[i]);
  };
  // first cell containing a
  std::size_t i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), a) - x.begin());
  i = std::min(std::max<std::size_t>(i, 1), x.size() - 1) - 1;
  double sum = 0.0;
  double left = a;
  double f_left = value_at(i, a);
  for (; i + 1 < x.size() && left < b; ++i) {
    const double right = std::min(b, x[i + 1]);
    const double f_right = value_at(i, right);
    sum += 0.5 * (f_left + f_right) * (right - left);
    left = right;
    f_left = right == x[i + 1] && i + 2 < x.size() ? rho[i + 1] : f_right;
  }
  return sum;
}

double DensityGrid::total() const
{
  return x.empty() ? 0.0 : integrate(x.front(), x.back());
}

std::string to_string(Normalization n)
{
  return n == Normalization::Probability ? "probability" : "transmitted-flux";
}

DensityGrid DensityHistogram::as_grid() const
{
  DensityGrid g;
  g.x.reserve(bins());
  for (std::size_t i = 0; i < bins(); ++i)
    g.x.push_back(center(i));
  g.rho = density;
  return g;
}

DensityHistogram histogram(std::span<const Arrival> arrivals, double lo, double hi,
                           std::size_t n_bins, Normalization normalization, double draws)
{
  if (n_bins == 0 || !(hi > lo))
    throw ConfigError("histogram needs n_bins >= 1 and hi > lo");
  if (normalization == Normalization::TransmittedFlux && !(draws > 0))
    throw ConfigError("transmitted-flux normalization needs the number of draws");
  DensityHistogram h;
  h.lo = lo;
  h.hi = hi;
  h.normalization = normalization;
  h.counts.assign(n_bins, 0.0);
  h.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i)
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  double w_sum = 0, w2_sum = 0;
  for (const Arrival& a : arrivals) {
    if (!(a.weight >= 0) || !std::isfinite(a.x))
      throw ConfigError("histogram arrivals need finite x and weight >= 0");
    h.total_weight += a.weight;
    if (!(a.x >= lo && a.x < hi)) {
      h.out_of_range_weight += a.weight;
      continue;
    }
    auto bin = static_cast<std::size_t>((a.x - lo) / width);
    bin = std::min(bin, n_bins - 1);
    h.counts[bin] += a.weight;
    w_sum += a.weight;
    w2_sum += a.weight * a.weight;
  }
  if (!(h.total_weight > 0))
    throw ConfigError("histogram of an empty arrival set");
  h.n_effective = w2_sum > 0 ? w_sum * w_sum / w2_sum : 0.0;
  const double norm = normalization == Normalization::Probability ? w_sum * width : draws * width;
  h.density.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    h.density[i] = norm > 0 ? h.counts[i] / norm : 0.0;
  return h;
}

std::vector<double> binned_probabilities(const DensityGrid& density, std::span<const double> edges)
{
  std::vector<double> q(edges.size() - 1);
  double total = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    q[i] = std::max(0.0, density.integrate(edges[i], edges[i + 1]));
    total += q[i];
  }
  if (!(total > 0))
    throw ConfigError("density has no mass on the histogram range");
  for (double& v : q)
    v /= total;
  return q;
}

double total_variation(std::span<const double> p, std::span<const double> q)
{
  if (p.size() != q.size())
    throw ConfigError("total variation needs equal-length vectors");
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

ComparisonReport compare_histogram_to_density(const DensityHistogram& hist,
                                              const DensityGrid& density)
{
  if (density.size() < 2)
    throw ConfigError("density grid needs at least two points");
  const double tol = 1e-9 * (hist.hi - hist.lo);
  if (density.x.front() > hist.lo + tol || density.x.back() < hist.hi - tol)
    throw ConfigError("density grid does not cover the histogram range");
  const std::vector<double> q = binned_probabilities(density, hist.edges);
  std::vector<double> p(hist.bins());
  double w = 0;
  for (double c : hist.counts)
    w += c;
  if (!(w > 0))
    throw ConfigError("histogram has no weight inside its range");
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = hist.counts[i] / w;

  ComparisonReport r;
  r.n_bins = hist.bins();
  r.tv_distance = total_variation(p, q);
  // Bins expecting fewer than 5 counts are pooled into one cell.
  constexpr double min_expected = 5.0;
  double chi2 = 0;
  std::size_t cells = 0;
  std::size_t pooled_bins = 0;
  double pooled_observed = 0, pooled_expected = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double expected = hist.n_effective * q[i];
    const double observed = hist.n_effective * p[i];
    if (expected < min_expected) {
      pooled_expected += expected;
      pooled_observed += observed;
      ++pooled_bins;
      continue;
    }
    chi2 += (observed - expected) * (observed - expected) / expected;
    ++cells;
  }
  if (pooled_expected > 0) {
    chi2 += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) /
            pooled_expected;
    ++cells;
  }
  r.chi2_per_dof = cells > 1 ? chi2 / static_cast<double>(cells - 1) : 0.0;
  std::ostringstream notes;
  notes << "n_effective=" << hist.n_effective << ", chi2 cells: " << cells;
  if (pooled_bins > 0)
    notes << " (" << pooled_bins << " bins with expected count < 5 pooled into one)";
  r.notes = notes.str();
  return r;
}

} // namespace bohmsim
