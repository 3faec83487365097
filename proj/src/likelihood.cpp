#include "dmpot/likelihood.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dmpot/error.hpp"

namespace dmpot {

namespace {

using DoublePolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

double ibeta(double a, double b, double x) { return boost::math::ibeta(a, b, x, DoublePolicy{}); }
double ibetac(double a, double b, double x) { return boost::math::ibetac(a, b, x, DoublePolicy{}); }

/// Bracketed bisection for the regularized Beta on [lo, hi]; geometric while the bracket spans
/// orders of magnitude, since deep-tail quantiles can sit near the underflow limit.
double bisect_beta_quantile(double a, double b, double q, bool upper, double lo, double hi) {
  for (int it = 0; it < 2200; ++it) {
    double mid;
    if (lo <= 0.0)
      mid = hi > 1e-290 ? hi * 1e-8 : 0.5 * hi;
    else if (hi > 4.0 * lo)
      mid = std::sqrt(lo * hi);
    else
      mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const bool left = upper ? ibetac(a, b, mid) > q : ibeta(a, b, mid) < q;
    (left ? lo : hi) = mid;
  }
  return lo <= 0.0 ? hi : 0.5 * (lo + hi);
}

}  // namespace

namespace detail {

double beta_quantile(double a, double b, double q, bool upper, double lo, double hi) {
  try {
    return upper ? boost::math::ibetac_inv(a, b, q, DoublePolicy{}) : boost::math::ibeta_inv(a, b, q, DoublePolicy{});
  } catch (const boost::math::evaluation_error&) {
    return bisect_beta_quantile(a, b, q, upper, lo, hi);
  }
}

}  // namespace detail

CensoredModel::CensoredModel(const DeclusterSummary& summary, ExceedanceRates rates)
    : thresholds_(summary.config.thresholds),
      rates_(std::move(rates)),
      tau_(summary.mean_cluster_size),
      below_days_(summary.below_days),
      n_clusters_(summary.clusters.size()) {
  const auto d = thresholds_.size();
  if (rates_.zetas.size() != d) throw DataError("exceedance rates do not match site count");
  if (!(tau_ >= 1.0)) throw DataError("mean cluster size must be >= 1");
  coords_.reserve(n_clusters_ * d);
  for (const auto& cm : summary.clusters) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto& o = cm.coords[j];
      CoordinateData c;
      switch (o.kind) {
        case CensorKind::Exact:
          if (!(*o.value > thresholds_[j])) throw DataError("exact cluster coordinate not above threshold");
          c.exact = true;
          c.value = *o.value;
          break;
        case CensorKind::Missing:
          c.lower = 0.0;
          c.upper = kInf;
          break;
        case CensorKind::RightCensored:
        case CensorKind::IntervalCensored:
          c.lower = o.lower;
          c.upper = std::max(o.upper, std::min(thresholds_[j], o.upper));
          break;
      }
      if (!c.exact) ++n_latent_;
      coords_.push_back(c);
    }
  }
  // blocks sharing a bound vector contribute identical per-day terms, so they are pooled
  std::map<std::vector<double>, std::size_t> index;
  for (const auto& b : summary.blocks) {
    auto [it, fresh] = index.try_emplace(b.upper_bounds, blocks_.size());
    if (fresh)
      blocks_.push_back({b.length, b.upper_bounds});
    else
      blocks_[it->second].length += b.length;
  }
}

std::vector<SiteMargin> CensoredModel::margins(const MarginalParams& m) const {
  std::vector<SiteMargin> out;
  out.reserve(n_sites());
  for (std::size_t j = 0; j < n_sites(); ++j) out.push_back(site_margin(j, m, rates_, thresholds_));
  return out;
}

std::pair<double, double> CensoredModel::frechet_interval(std::size_t i, std::size_t j, const SiteMargin& m) const {
  const auto& c = coord(i, j);
  const double v = thresholds_[j];
  const double lo = c.lower >= v ? m.to_frechet(c.lower) : 0.0;
  const double hi = c.upper > v ? (c.upper == kInf ? kInf : m.to_frechet(c.upper)) : m.frechet_threshold();
  return {lo, hi};
}

Latent CensoredModel::latent_from_frechet(std::size_t i, std::size_t j, double x, const SiteMargin& m) const {
  const auto& c = coord(i, j);
  const double u = m.frechet_threshold();
  if (x > u || c.lower > thresholds_[j]) {
    double y = m.from_frechet(std::max(x, u));
    y = std::clamp(y, std::max(c.lower, thresholds_[j]), c.upper);
    return {true, y};
  }
  return {false, std::clamp(x, std::numeric_limits<double>::min(), u)};
}

AugmentedState CensoredModel::initial_augmentation(std::span<const SiteMargin> m) const {
  AugmentedState aug{n_sites(), std::vector<Latent>(coords_.size())};
  for (std::size_t i = 0; i < n_clusters_; ++i)
    for (std::size_t j = 0; j < n_sites(); ++j) {
      if (coord(i, j).exact) continue;
      auto [lo, hi] = frechet_interval(i, j, m[j]);
      double x;
      if (hi == kInf)
        x = lo > 0.0 ? 2.0 * lo : m[j].frechet_threshold();
      else
        x = 0.5 * (lo + hi);
      if (!(x > 0.0)) x = 0.5 * m[j].frechet_threshold();
      aug.at(i, j) = latent_from_frechet(i, j, x, m[j]);
    }
  return aug;
}

std::pair<double, double> CensoredModel::frechet_coordinate(std::size_t i, std::size_t j, const SiteMargin& m,
                                                            const AugmentedState& aug) const {
  const auto& c = coord(i, j);
  if (c.exact) return {m.to_frechet(c.value), m.log_jacobian(c.value)};
  const auto& l = aug.at(i, j);
  if (l.above) return {m.to_frechet(l.value), m.log_jacobian(l.value)};
  return {l.value, 0.0};
}

double cluster_log_term(const CensoredModel& model, std::size_t i, std::span<const SiteMargin> m,
                        const MixtureDensity& h, const AugmentedState& aug) {
  const auto d = model.n_sites();
  double x[32];
  std::vector<double> heap;
  double* xs = x;
  if (d > 32) {
    heap.resize(d);
    xs = heap.data();
  }
  double log_jac = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const auto& c = model.coord(i, j);
    if (!c.exact) {
      const auto& l = aug.at(i, j);
      const bool inside = l.above ? (l.value >= std::max(c.lower, model.thresholds()[j]) && l.value <= c.upper)
                                  : (c.lower <= model.thresholds()[j] && l.value > 0.0 &&
                                     l.value <= m[j].frechet_threshold());
      if (!inside) throw NumericalError("imputed coordinate outside its censoring interval");
    }
    auto [xj, lj] = model.frechet_coordinate(i, j, m[j], aug);
    if (!std::isfinite(xj) || lj == -kInf) return -kInf;
    xs[j] = xj;
    log_jac += lj;
  }
  return h.log_exponent_density({xs, d}) + log_jac;
}

double void_below_log_term(std::size_t below_days, double mean_cluster_size, double region_measure) {
  if (below_days == 0) return 0.0;
  return -(static_cast<double>(below_days) / mean_cluster_size) * region_measure;
}

std::vector<double> block_frechet_bounds(const BlockData& b, std::span<const SiteMargin> m) {
  std::vector<double> u(b.upper_bounds.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double r = std::max(b.upper_bounds[j], m[j].threshold());
    u[j] = r == kInf ? kInf : std::max(m[j].frechet_threshold(), m[j].to_frechet(r));
  }
  return u;
}

double block_log_term(const BlockData& b, std::span<const SiteMargin> m, const DMParams& psi,
                      double mean_cluster_size, const RegionOptions& opt) {
  const auto u = block_frechet_bounds(b, m);
  const double lambda = exponent_measure_region(u, psi, opt).value;
  return -(static_cast<double>(b.length) / mean_cluster_size) * lambda;
}

LikelihoodTerms total_log_likelihood(const CensoredModel& model, const AugmentedState& aug,
                                     const MarginalParams& margins, const DMParams& psi, const RegionOptions& opt) {
  const auto m = model.margins(margins);
  const MixtureDensity h(psi);
  LikelihoodTerms out;
  out.cluster_terms.reserve(model.n_clusters());
  for (std::size_t i = 0; i < model.n_clusters(); ++i) {
    out.cluster_terms.push_back(cluster_log_term(model, i, m, h, aug));
    out.total += out.cluster_terms.back();
  }
  if (model.below_days() > 0) {
    const double lambda = exponent_measure_region(model.frechet_thresholds(), psi, opt).value;
    out.void_below = void_below_log_term(model.below_days(), model.mean_cluster_size(), lambda);
  }
  out.total += out.void_below;
  for (const auto& b : model.blocks()) {
    out.void_blocks.push_back(block_log_term(b, m, psi, model.mean_cluster_size(), opt));
    out.total += out.void_blocks.back();
  }
  return out;
}

CoordinateConditional::CoordinateConditional(const MixtureDensity& h, std::span<const double> x, std::size_t j,
                                             double lo, double hi)
    : lo_(lo), hi_(hi), s_(0.0) {
  const auto d = h.dim();
  for (std::size_t k = 0; k < d; ++k)
    if (k != j) s_ += x[k];
  if (!(s_ > 0.0)) throw NumericalError("conditional needs positive remaining coordinates");
  const double t_lo = lo / (lo + s_);
  const double t_hi = hi == kInf ? 1.0 : hi / (hi + s_);
  const double log_s = std::log(s_);

  std::vector<double> log_w(h.k());
  pieces_.reserve(h.k());
  for (std::size_t m = 0; m < h.k(); ++m) {
    const auto alpha = h.alphas(m);
    const double a = alpha[j];
    const double b = h.shape(m) - a + 1.0;
    double lw = h.log_constants()[m] + std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    for (std::size_t k = 0; k < d; ++k)
      if (k != j) lw += (alpha[k] - 1.0) * (std::log(x[k]) - log_s);
    Piece p{a, b, 0.0, 0.0, false};
    const double mid = ibeta(a, b, t_lo);
    double mass;
    if (mid < 0.5) {
      p.p_lo = mid;
      p.p_hi = t_hi >= 1.0 ? 1.0 : ibeta(a, b, t_hi);
      mass = p.p_hi - p.p_lo;
    } else {
      p.upper_tail = true;
      p.p_lo = ibetac(a, b, t_lo);
      p.p_hi = t_hi >= 1.0 ? 0.0 : ibetac(a, b, t_hi);
      mass = p.p_lo - p.p_hi;
    }
    log_w[m] = mass > 0.0 ? lw + std::log(mass) : -kInf;
    pieces_.push_back(p);
  }
  double mx = -kInf;
  for (double v : log_w) mx = std::max(mx, v);
  if (mx == -kInf) {
    log_mass_ = -kInf;
    cum_.assign(h.k(), 1.0);
    return;
  }
  double sum = 0.0;
  cum_.resize(h.k());
  for (std::size_t m = 0; m < h.k(); ++m) {
    sum += std::exp(log_w[m] - mx);
    cum_[m] = sum;
  }
  for (auto& c : cum_) c /= sum;
  log_mass_ = std::log(static_cast<double>(d)) - static_cast<double>(d) * log_s + mx + std::log(sum);
}

double CoordinateConditional::sample(std::mt19937_64& rng) const {
  if (lo_ == hi_) return lo_;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double pick = unif(rng);
  std::size_t m = 0;
  while (m + 1 < cum_.size() && pick > cum_[m]) ++m;
  const auto& p = pieces_[m];
  const double t_lo = lo_ / (lo_ + s_);
  const double t_hi = hi_ == kInf ? 1.0 : hi_ / (hi_ + s_);
  const double mass = p.upper_tail ? p.p_lo - p.p_hi : p.p_hi - p.p_lo;
  double t = -1.0;
  if (mass > 0.25) {
    // plain Beta draws by Gamma ratio, kept when inside the window
    for (int tries = 0; tries < 64 && t < 0.0; ++tries) {
      const double ga = std::exp(detail::log_gamma_variate(p.a, rng));
      const double gb = std::exp(detail::log_gamma_variate(p.b, rng));
      const double cand = ga / (ga + gb);
      if (cand >= t_lo && cand <= t_hi) t = cand;
    }
  }
  if (t < 0.0) {
    const double v = unif(rng);
    const double q = p.upper_tail ? p.p_hi + v * (p.p_lo - p.p_hi) : p.p_lo + v * (p.p_hi - p.p_lo);
    t = detail::beta_quantile(p.a, p.b, q, p.upper_tail, t_lo, t_hi);
  }
  t = std::clamp(t, t_lo, t_hi);
  if (t >= 1.0) return hi_ == kInf ? std::numeric_limits<double>::max() : hi_;
  return std::clamp(s_ * t / (1.0 - t), lo_, hi_);
}

}  // namespace dmpot
