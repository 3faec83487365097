#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dmpot/mcmc.hpp"

namespace dmpot {

/// Potential scale reduction factor from m >= 2 chains of equal length n >= 10.
[[nodiscard]] double gelman_rubin(const std::vector<std::vector<double>>& chains);

/// Spectral density at frequency zero from an autoregressive fit (Yule-Walker, order by AIC).
[[nodiscard]] double spectrum0_ar(std::span<const double> x);

/// P(W <= q) for the Cramer-von Mises statistic of a Brownian bridge.
[[nodiscard]] double pcramer(double q);

struct StationarityResult {
  bool passed{false};
  std::size_t start{0};  // first usable index when passed
  double statistic{0.0};
  double p_value{1.0};
};

/// Cramer-von Mises stationarity test discarding 0%, 10%, ..., 50% of the draws in turn.
[[nodiscard]] StationarityResult heidelberger_welch(std::span<const double> draws, double alpha = 0.05);

/// n * var(x) / S0.
[[nodiscard]] double effective_sample_size(std::span<const double> x);

struct ScalarDiagnostics {
  std::string name{};
  double rhat{0.0};  // NaN when undefined (e.g. zero within-chain variance)
  std::string rhat_note{};
  std::vector<bool> stationary{};   // per chain
  std::vector<std::size_t> start{};  // per chain
  double ess{0.0};                   // summed over chains
};

struct DiagnosticsReport {
  std::vector<ScalarDiagnostics> scalars{};
  std::vector<std::size_t> chains_passing{};  // chains stationary in every scalar

  [[nodiscard]] const ScalarDiagnostics& at(const std::string& name) const;
};

[[nodiscard]] DiagnosticsReport diagnose(const std::vector<PosteriorSample>& chains);

/// p-value of 2 * (loglik_local - loglik_regional) against chi-square with d - 1 degrees of freedom.
[[nodiscard]] double lrt_regional_shape(double loglik_regional, double loglik_local, std::size_t n_sites);

}  // namespace dmpot
