#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dmpot/angular.hpp"
#include "dmpot/decluster.hpp"
#include "dmpot/margins.hpp"

namespace dmpot {

/// One coordinate of a (censored) cluster maximum as the likelihood sees it.
/// Exact coordinates lie strictly above threshold; everything else is latent with
/// discharge bounds [lower, upper] (upper may be +inf, lower may sit below threshold).
struct CoordinateData {
  bool exact{false};
  double value{0.0};
  double lower{0.0};
  double upper{kInf};
};

/// Imputed value of a latent coordinate. Above threshold the latent lives on the discharge
/// scale (so it follows margin updates); below threshold it is a unit-Frechet value in (0, u_j].
struct Latent {
  bool above{false};
  double value{0.0};

  friend bool operator==(const Latent&, const Latent&) = default;
};

/// Per cluster, per site imputed values (entries for exact coordinates are unused).
struct AugmentedState {
  std::size_t n_sites{0};
  std::vector<Latent> values{};

  [[nodiscard]] const Latent& at(std::size_t i, std::size_t j) const { return values[i * n_sites + j]; }
  Latent& at(std::size_t i, std::size_t j) { return values[i * n_sites + j]; }
  friend bool operator==(const AugmentedState&, const AugmentedState&) = default;
};

struct BlockData {
  std::size_t length{0};
  std::vector<double> upper_bounds{};
};

/// Data of the censored point-process likelihood: cluster coordinates, undetermined blocks,
/// below-threshold day count and the fixed Frechet thresholds.
class CensoredModel {
 public:
  CensoredModel(const DeclusterSummary& summary, ExceedanceRates rates);

  [[nodiscard]] std::size_t n_sites() const noexcept { return thresholds_.size(); }
  [[nodiscard]] std::size_t n_clusters() const noexcept { return n_clusters_; }
  [[nodiscard]] const CoordinateData& coord(std::size_t i, std::size_t j) const { return coords_[i * n_sites() + j]; }
  [[nodiscard]] std::span<const double> thresholds() const noexcept { return thresholds_; }
  [[nodiscard]] const ExceedanceRates& rates() const noexcept { return rates_; }
  [[nodiscard]] std::span<const double> frechet_thresholds() const noexcept { return rates_.frechet_thresholds; }
  [[nodiscard]] double mean_cluster_size() const noexcept { return tau_; }
  [[nodiscard]] std::size_t below_days() const noexcept { return below_days_; }
  [[nodiscard]] const std::vector<BlockData>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] std::size_t n_latent() const noexcept { return n_latent_; }

  [[nodiscard]] std::vector<SiteMargin> margins(const MarginalParams& m) const;

  /// Unit-Frechet censoring interval of latent coordinate (i, j) under the given margin.
  [[nodiscard]] std::pair<double, double> frechet_interval(std::size_t i, std::size_t j, const SiteMargin& m) const;

  /// Latent values at interval midpoints (Frechet scale), stored per the Latent convention.
  [[nodiscard]] AugmentedState initial_augmentation(std::span<const SiteMargin> m) const;

  /// Unit-Frechet coordinate (i, j) and its log-Jacobian contribution (0 when none).
  [[nodiscard]] std::pair<double, double> frechet_coordinate(std::size_t i, std::size_t j, const SiteMargin& m,
                                                             const AugmentedState& aug) const;

  /// Stores a Frechet-scale draw x for latent (i, j) under margin m.
  [[nodiscard]] Latent latent_from_frechet(std::size_t i, std::size_t j, double x, const SiteMargin& m) const;

 private:
  std::vector<double> thresholds_;
  ExceedanceRates rates_;
  double tau_;
  std::size_t below_days_;
  std::size_t n_clusters_;
  std::size_t n_latent_{0};
  std::vector<CoordinateData> coords_;
  std::vector<BlockData> blocks_;
};

struct LikelihoodTerms {
  std::vector<double> cluster_terms{};
  double void_below{0.0};
  std::vector<double> void_blocks{};
  double total{0.0};
};

/// log dlambda/dx(x) + sum of log-Jacobians for coordinates carried on the discharge scale.
[[nodiscard]] double cluster_log_term(const CensoredModel& model, std::size_t i, std::span<const SiteMargin> m,
                                      const MixtureDensity& h, const AugmentedState& aug);

/// -(below_days / tau) * lambda(A_u).
[[nodiscard]] double void_below_log_term(std::size_t below_days, double mean_cluster_size, double region_measure);

/// Effective Frechet thresholds of a block: max(u_j, T_j(R_j)), +inf where R_j is infinite.
[[nodiscard]] std::vector<double> block_frechet_bounds(const BlockData& b, std::span<const SiteMargin> m);

/// -(n'_i / tau) * lambda(A_u~).
[[nodiscard]] double block_log_term(const BlockData& b, std::span<const SiteMargin> m, const DMParams& psi,
                                    double mean_cluster_size, const RegionOptions& opt = {});

[[nodiscard]] LikelihoodTerms total_log_likelihood(const CensoredModel& model, const AugmentedState& aug,
                                                   const MarginalParams& margins, const DMParams& psi,
                                                   const RegionOptions& opt = {});

namespace detail {
/// q-quantile of the regularized incomplete Beta (of its complement when `upper`), known to lie
/// in [lo, hi]. Falls back to bisection where Boost's iteration gives up in the deep tail.
[[nodiscard]] double beta_quantile(double a, double b, double q, bool upper, double lo, double hi);
}  // namespace detail

/// Full conditional of one Frechet coordinate x_j given the others, on [lo, hi]: under the
/// substitution t = x_j / (x_j + s), s = sum of the other coordinates, each mixture component
/// contributes a Beta(alpha_j, nu - alpha_j + 1) kernel, so the conditional is a finite
/// mixture of truncated Beta laws.
class CoordinateConditional {
 public:
  CoordinateConditional(const MixtureDensity& h, std::span<const double> x, std::size_t j, double lo, double hi);

  /// log of the integral of dlambda/dx over x_j in [lo, hi].
  [[nodiscard]] double log_mass() const noexcept { return log_mass_; }
  /// Exact inverse-cdf draw of x_j.
  [[nodiscard]] double sample(std::mt19937_64& rng) const;

 private:
  struct Piece {
    double a, b;
    double p_lo, p_hi;  // regularized incomplete Beta at the bounds
    bool upper_tail;    // p_* hold complements when true
  };
  double lo_, hi_, s_;
  double log_mass_{0.0};
  std::vector<Piece> pieces_;
  std::vector<double> cum_;  // cumulative selection probabilities
};

}  // namespace dmpot
