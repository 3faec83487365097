#include "dmpot/margins.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dmpot/decluster.hpp"
#include "dmpot/error.hpp"

namespace dmpot {

void MarginalParams::validate() const {
  if (shapes.size() != log_scales.size()) throw ConfigError("marginal parameter sizes differ");
  for (std::size_t j = 0; j < shapes.size(); ++j)
    if (!std::isfinite(shapes[j]) || !std::isfinite(log_scales[j]))
      throw NumericalError("non-finite marginal parameter");
  if (regional)
    for (double xi : shapes)
      if (xi != shapes.front()) throw NumericalError("regional fit with unequal shapes");
}

double frechet_threshold(double zeta) { return -1.0 / std::log1p(-zeta); }

ExceedanceRates ExceedanceRates::from_zetas(std::vector<double> zetas) {
  ExceedanceRates r;
  for (double z : zetas)
    if (!(z > 0.0 && z < 1.0)) throw DataError("exceedance rate must lie in (0, 1)");
  r.frechet_thresholds.reserve(zetas.size());
  for (double z : zetas) r.frechet_thresholds.push_back(frechet_threshold(z));
  r.zetas = std::move(zetas);
  return r;
}

SiteMargin::SiteMargin(double threshold, double log_scale, double shape, double zeta)
    : v_(threshold), sigma_(std::exp(log_scale)), xi_(shape), zeta_(zeta), u_(dmpot::frechet_threshold(zeta)) {}

double SiteMargin::upper_endpoint() const noexcept { return xi_ < 0.0 ? v_ - sigma_ / xi_ : kInf; }

double SiteMargin::log_tail(double z) const noexcept {
  if (std::abs(xi_) < kShapeEpsilon) return -z;
  const double a = xi_ * z;
  if (a <= -1.0) return -kInf;
  return -std::log1p(a) / xi_;
}

double SiteMargin::survival(double y) const {
  if (y < v_) throw std::domain_error("GPD margin evaluated below threshold");
  return zeta_ * std::exp(log_tail((y - v_) / sigma_));
}

double SiteMargin::cdf(double y) const { return 1.0 - survival(y); }

double SiteMargin::to_frechet(double y) const {
  const double s = survival(y);
  if (s <= 0.0) return kInf;
  return -1.0 / std::log1p(-s);
}

double SiteMargin::from_frechet(double x) const {
  if (x < u_) throw std::domain_error("Frechet value below the threshold image");
  if (x == kInf) return upper_endpoint();
  return quantile_for_survival(-std::expm1(-1.0 / x));
}

double SiteMargin::quantile_for_survival(double s) const {
  if (!(s > 0.0) || s > zeta_) throw std::domain_error("survival probability outside (0, zeta]");
  const double log_ratio = std::log(s / zeta_);
  double z;
  if (std::abs(xi_) < kShapeEpsilon)
    z = -log_ratio;
  else
    z = std::expm1(-xi_ * log_ratio) / xi_;
  return v_ + sigma_ * z;
}

double SiteMargin::log_jacobian(double y) const {
  if (y < v_) return -kInf;
  const double z = (y - v_) / sigma_;
  const double lt = log_tail(z);
  if (lt == -kInf) return -kInf;
  const double s = zeta_ * std::exp(lt);
  // f = s / (sigma (1 + xi z)),  dT/dy = f / (F log^2 F)
  const double log_f = std::log(s) - std::log(sigma_) - (std::abs(xi_) < kShapeEpsilon ? 0.0 : std::log1p(xi_ * z));
  const double log_F = std::log1p(-s);
  return log_f - log_F - 2.0 * std::log(-log_F);
}

SiteMargin site_margin(std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                       std::span<const double> thresholds) {
  return SiteMargin(thresholds[j], m.log_scales[j], m.shapes[j], r.zetas[j]);
}

ExceedanceRates estimate_zeta(const SeriesPanel& p, const ThresholdConfig& c) {
  c.validate(p.n_sites());
  std::vector<double> zetas;
  for (std::size_t j = 0; j < p.n_sites(); ++j) {
    std::size_t observed = 0;
    for (std::size_t t = 0; t < p.n_days(); ++t) observed += p.at(t, j).kind != CensorKind::Missing;
    if (observed == 0) throw DataError("site '" + p.site_names()[j] + "' has no non-missing day");
    std::size_t intra = 0;
    for (const auto& cl : extract_site_clusters(p, j, c.thresholds[j], c.run_length)) intra += cl.length();
    if (intra == 0) throw DataError("threshold too high at site '" + p.site_names()[j] + "'");
    zetas.push_back(static_cast<double>(intra) / static_cast<double>(observed));
  }
  return ExceedanceRates::from_zetas(std::move(zetas));
}

double gpd_cdf(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
               std::span<const double> thresholds) {
  return site_margin(j, m, r, thresholds).cdf(y);
}

double frechet_transform(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                         std::span<const double> thresholds) {
  return site_margin(j, m, r, thresholds).to_frechet(y);
}

double frechet_inverse(double x, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                       std::span<const double> thresholds) {
  return site_margin(j, m, r, thresholds).from_frechet(x);
}

double frechet_jacobian(double y, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                        std::span<const double> thresholds) {
  if (y <= thresholds[j]) throw std::domain_error("Jacobian requires y strictly above threshold");
  return std::exp(site_margin(j, m, r, thresholds).log_jacobian(y));
}

double return_level(double years, std::size_t j, const MarginalParams& m, const ExceedanceRates& r,
                    std::span<const double> thresholds, double days_per_year) {
  if (!(years > 0.0)) throw std::domain_error("return period must be positive");
  const auto margin = site_margin(j, m, r, thresholds);
  const double s = 1.0 / (years * days_per_year);
  // relative slack absorbs rounding when the period equals the threshold's own return period
  if (s > margin.zeta() * (1.0 + 1e-12))
    throw std::domain_error("return period shorter than the threshold exceedance return period");
  return margin.quantile_for_survival(std::min(s, margin.zeta()));
}

std::vector<EmpiricalPoint> empirical_return_period(const SeriesPanel& p, std::size_t j, double v, int tau,
                                                    double days_per_year) {
  std::vector<double> maxima;
  std::vector<Observation> column;
  for (const auto& cl : extract_site_clusters(p, j, v, tau)) {
    column.clear();
    for (std::size_t t = cl.start; t <= cl.end; ++t) column.push_back(p.at(t, j));
    const auto merged = merge_records(column);
    if (merged.kind == CensorKind::Exact) maxima.push_back(*merged.value);
  }
  std::sort(maxima.begin(), maxima.end(), std::greater<>());
  const double years = static_cast<double>(p.n_days()) / days_per_year;
  const double m = static_cast<double>(maxima.size());
  std::vector<EmpiricalPoint> out;
  out.reserve(maxima.size());
  std::size_t rank = 1;
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    if (i == 0 || maxima[i] != maxima[i - 1]) rank = i + 1;
    out.push_back({maxima[i], years * (m + 1.0) / (m * static_cast<double>(rank))});
  }
  return out;
}

std::pair<double, double> gpd_moment_start(std::span<const double> excesses) {
  if (excesses.size() < 2) throw DataError("moment start needs at least two excesses");
  double mean = 0.0;
  for (double e : excesses) mean += e;
  mean /= static_cast<double>(excesses.size());
  double var = 0.0;
  for (double e : excesses) var += (e - mean) * (e - mean);
  var /= static_cast<double>(excesses.size() - 1);
  if (!(var > 0.0)) return {std::log(std::max(mean, 1e-8)), 0.0};
  // mean = sigma/(1-xi), var = sigma^2 / ((1-xi)^2 (1-2xi))
  double xi = 0.5 * (1.0 - mean * mean / var);
  xi = std::clamp(xi, -0.4, 0.4);
  const double sigma = mean * (1.0 - xi);
  return {std::log(std::max(sigma, 1e-8)), xi};
}

}  // namespace dmpot
