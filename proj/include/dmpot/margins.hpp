#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dmpot/data_model.hpp"

namespace dmpot {

/// Below this |xi| the GPD uses its exponential limit.
inline constexpr double kShapeEpsilon = 1e-6;
inline constexpr double kDaysPerYear = 365.25;

/// Per-site GPD parameters above threshold. Scales are stored on the log scale.
struct MarginalParams {
  std::vector<double> log_scales{};
  std::vector<double> shapes{};
  bool regional{false};

  [[nodiscard]] std::size_t n_sites() const noexcept { return log_scales.size(); }
  /// Throws when sizes disagree or a regional fit has unequal shapes.
  void validate() const;
};

/// Empirical exceedance probabilities and the matching unit-Frechet thresholds.
struct ExceedanceRates {
  std::vector<double> zetas{};
  std::vector<double> frechet_thresholds{};

  [[nodiscard]] static ExceedanceRates from_zetas(std::vector<double> zetas);
};

/// u = -1 / log(1 - zeta).
[[nodiscard]] double frechet_threshold(double zeta);

/// One site's marginal model: GPD(sigma, xi) above v with exceedance rate zeta.
class SiteMargin {
 public:
  SiteMargin(double threshold, double log_scale, double shape, double zeta);

  [[nodiscard]] double threshold() const noexcept { return v_; }
  [[nodiscard]] double scale() const noexcept { return sigma_; }
  [[nodiscard]] double shape() const noexcept { return xi_; }
  [[nodiscard]] double zeta() const noexcept { return zeta_; }
  [[nodiscard]] double frechet_threshold() const noexcept { return u_; }

  /// Finite upper endpoint when xi < 0, +inf otherwise.
  [[nodiscard]] double upper_endpoint() const noexcept;

  /// 1 - F(y) for y >= v.
  [[nodiscard]] double survival(double y) const;
  [[nodiscard]] double cdf(double y) const;
  /// -1/log F(y); +inf at or beyond a finite upper endpoint.
  [[nodiscard]] double to_frechet(double y) const;
  /// Inverse of to_frechet for x >= u.
  [[nodiscard]] double from_frechet(double x) const;
  /// log dT/dy; -inf outside the support.
  [[nodiscard]] double log_jacobian(double y) const;
  /// Level with survival probability s (s <= zeta).
  [[nodiscard]] double quantile_for_survival(double s) const;

 private:
  [[nodiscard]] double log_tail(double z) const noexcept;  // log((1 + xi z)^(-1/xi))

  double v_;
  double sigma_;
  double xi_;
  double zeta_;
  double u_;
};

[[nodiscard]] SiteMargin site_margin(std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                                     std::span<const double> thresholds);

/// zeta_j = intra-cluster days (univariate declustering) / non-missing days at site j.
[[nodiscard]] ExceedanceRates estimate_zeta(const SeriesPanel& p, const ThresholdConfig& c);

[[nodiscard]] double gpd_cdf(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                             std::span<const double> thresholds);
[[nodiscard]] double frechet_transform(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                                       std::span<const double> thresholds);
[[nodiscard]] double frechet_inverse(double x, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                                     std::span<const double> thresholds);
[[nodiscard]] double frechet_jacobian(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                                      std::span<const double> thresholds);
[[nodiscard]] double return_level(double years, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                                  std::span<const double> thresholds, double days_per_year = kDaysPerYear);

struct EmpiricalPoint {
  double value;
  double period_years;
};

/// Weibull plotting positions for the exact univariate cluster maxima above `v` at site j:
/// with m maxima over a record of Y years, the i-th largest gets Y (m + 1) / (m i).
/// Ties share the rank of their first member.
[[nodiscard]] std::vector<EmpiricalPoint> empirical_return_period(const SeriesPanel& p, std::size_t j, double v,
                                                                  int tau, double days_per_year = kDaysPerYear);

/// Method-of-moments GPD start (log sigma, xi) from threshold excesses; xi clipped to [-0.4, 0.4].
[[nodiscard]] std::pair<double, double> gpd_moment_start(std::span<const double> excesses);

}  // namespace dmpot
