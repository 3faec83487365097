#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmpot/angular.hpp"
#include "dmpot/data_model.hpp"
#include "dmpot/margins.hpp"

namespace dmpot {

/// How the emitted panel is degraded from the latent daily values.
struct CensoringScenario {
  /// Days [0, historical_days) form the historical era. There a site-day above the
  /// perception threshold is a recorded flood, an interval [lo_factor * y, hi_factor * y]
  /// (or, with probability right_censored_prob, right-censored at the perception threshold);
  /// every other day is interval-censored [0, perception].
  std::size_t historical_days{0};
  std::vector<double> perception{};
  double lo_factor{0.85};
  double hi_factor{1.15};
  double right_censored_prob{0.0};
  /// Per site, inclusive day ranges with no record at all.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> missing_eras{};
  /// Probability that a recent-era day is missing at a site.
  double recent_missing_prob{0.0};
};

struct SimConfig {
  std::vector<std::string> site_names{};
  Date start{};
  std::size_t n_days{0};
  std::vector<double> thresholds{};
  MarginalParams margins{};
  DMParams mixture{};
  std::vector<double> zetas{};
  CensoringScenario censoring{};
  std::uint64_t seed{1};

  void validate() const;
};

struct SyntheticTruth {
  SimConfig config{};
  std::vector<double> latent{};  // n_days x d daily values before censoring
  std::size_t extreme_days{0};   // days with at least one point in A_u
  std::size_t points{0};         // accepted Poisson points
  std::vector<KindCounts> emitted{};  // per site counts of each censoring kind
};

[[nodiscard]] std::pair<SeriesPanel, SyntheticTruth> simulate_panel(const SimConfig& cfg);

/// Documented truth of the bundled four-site synthetic dataset spanning 1604-09-10 .. 2010-12-31,
/// with the historical era ending on 1892-01-01.
[[nodiscard]] SimConfig gardons_lookalike_config(std::uint64_t seed);
[[nodiscard]] SeriesPanel make_gardons_lookalike(std::uint64_t seed);

/// Run length used when declustering the lookalike dataset.
inline constexpr int kLookalikeRunLength = 3;

}  // namespace dmpot
