#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bohmsim {

/// Density sampled on a sorted grid; rho is treated as piecewise linear.
struct DensityGrid {
  std::vector<double> x;
  std::vector<double> rho;

  std::size_t size() const { return x.size(); }
  /// Trapezoid integral over [a, b] (clipped to the grid).
  double integrate(double a, double b) const;
  double total() const;
};

struct Arrival {
  double x = 0.0;
  double weight = 1.0;
};

enum class Normalization { Probability, TransmittedFlux };

std::string to_string(Normalization n);

struct DensityHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> edges;   // n_bins + 1
  std::vector<double> counts;  // summed weights per bin
  std::vector<double> density; // normalized per `normalization`
  Normalization normalization = Normalization::Probability;
  double total_weight = 0.0;        // all arrivals
  double out_of_range_weight = 0.0; // arrivals outside [lo, hi)
  double n_effective = 0.0;         // (sum w)^2 / sum w^2 over in-range arrivals

  std::size_t bins() const { return counts.size(); }
  double bin_width() const { return (hi - lo) / static_cast<double>(bins()); }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
  /// As a grid of bin centers (for peak detection and asymmetry).
  DensityGrid as_grid() const;
};

/// Bins weighted arrivals on [lo, hi). Probability: density integrates to 1
/// over the range. TransmittedFlux: counts / (draws * bin width), so the
/// integral estimates the transmitted probability inside the range.
/// Throws ConfigError when no arrival carries weight.
DensityHistogram histogram(std::span<const Arrival> arrivals, double lo, double hi,
                           std::size_t n_bins, Normalization normalization = Normalization::Probability,
                           double draws = 0.0);

struct ComparisonReport {
  double tv_distance = 0.0;
  double chi2_per_dof = 0.0;
  std::size_t n_bins = 0;
  std::string notes;
};

/// Bins `density` onto the histogram's edges (integrating the piecewise
/// linear grid per bin), normalizes both over the range and reports the total
/// variation distance and chi^2 per degree of freedom with expected counts
/// n_effective * q_i. Throws ConfigError if the grid does not cover the range.
ComparisonReport compare_histogram_to_density(const DensityHistogram& hist,
                                              const DensityGrid& density);

/// Probability mass per bin of `density` on the given edges, normalized to 1.
std::vector<double> binned_probabilities(const DensityGrid& density, std::span<const double> edges);

/// Total variation distance between two probability vectors of equal length.
double total_variation(std::span<const double> p, std::span<const double> q);

} // namespace bohmsim
