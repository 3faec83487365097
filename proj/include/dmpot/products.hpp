#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dmpot/likelihood.hpp"
#include "dmpot/mcmc.hpp"

namespace dmpot {

/// Type-7 sample quantile (linear interpolation between order statistics).
[[nodiscard]] double sample_quantile(std::vector<double> x, double p);

struct Band {
  double mean{0.0};
  double q05{0.0};
  double q95{0.0};
};

[[nodiscard]] Band summarize_band(std::span<const double> draws);

struct ReturnLevelCurve {
  std::size_t site{0};
  std::vector<double> periods{};  // years
  std::vector<Band> levels{};
};

struct AngularGrid {
  std::size_t i{0}, j{0};
  std::vector<double> w{};  // first coordinate on the pair simplex
  std::vector<Band> density{};
};

struct ChiPosterior {
  std::size_t i{0}, j{0};
  std::vector<double> draws{};
  Band band{};
};

struct ConditionalTailCurve {
  std::size_t i{0}, j{0};  // P(Y_i > y | Y_j > v_j)
  std::vector<double> levels{};
  std::vector<Band> probability{};
};

struct PosteriorProducts {
  std::vector<ReturnLevelCurve> return_levels{};
  std::vector<AngularGrid> angular{};
  std::vector<ChiPosterior> chi{};
  std::vector<ConditionalTailCurve> conditional{};
};

struct ProductOptions {
  std::vector<double> periods{1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0};
  std::size_t angular_points{512};
  std::size_t tail_points{64};
  double tail_max_period{1000.0};
  double days_per_year{kDaysPerYear};
};

/// Pointwise posterior mean and 0.05 / 0.95 quantiles over the pooled draws.
[[nodiscard]] PosteriorProducts posterior_products(const std::vector<PosteriorSample>& chains,
                                                   const CensoredModel& model, const ProductOptions& opt = {});

}  // namespace dmpot
