#include "dmpot/products.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmpot/error.hpp"

namespace dmpot {

double sample_quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

Band summarize_band(std::span<const double> draws) {
  std::vector<double> v(draws.begin(), draws.end());
  Band b;
  b.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  b.q05 = sample_quantile(v, 0.05);
  b.q95 = sample_quantile(std::move(v), 0.95);
  return b;
}

PosteriorProducts posterior_products(const std::vector<PosteriorSample>& chains, const CensoredModel& model,
                                     const ProductOptions& opt) {
  std::vector<const MarginalParams*> margins;
  std::vector<const DMParams*> mixtures;
  for (const auto& c : chains)
    for (std::size_t r = 0; r < c.n_draws(); ++r) {
      margins.push_back(&c.margins[r]);
      mixtures.push_back(&c.mixtures[r]);
    }
  if (margins.empty()) throw DataError("no retained draws");
  const auto d = model.n_sites();
  const auto n = margins.size();
  const auto& rates = model.rates();
  const auto thresholds = model.thresholds();
  PosteriorProducts out;
  std::vector<double> buf(n);

  for (std::size_t j = 0; j < d; ++j) {
    ReturnLevelCurve curve;
    curve.site = j;
    for (double T : opt.periods) {
      if (1.0 / (T * opt.days_per_year) > rates.zetas[j]) continue;
      for (std::size_t r = 0; r < n; ++r) buf[r] = return_level(T, j, *margins[r], rates, thresholds, opt.days_per_year);
      curve.periods.push_back(T);
      curve.levels.push_back(summarize_band(buf));
    }
    out.return_levels.push_back(std::move(curve));
  }

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      std::vector<DMParams> pairs;
      pairs.reserve(n);
      for (const auto* psi : mixtures) pairs.push_back(pair_margin(*psi, i, j));
      AngularGrid g{i, j, {}, {}};
      std::vector<double> w2(2);
      for (std::size_t p = 0; p < opt.angular_points; ++p) {
        const double w = (static_cast<double>(p) + 0.5) / static_cast<double>(opt.angular_points);
        w2[0] = w;
        w2[1] = 1.0 - w;
        for (std::size_t r = 0; r < n; ++r) buf[r] = dm_density(w2, pairs[r]);
        g.w.push_back(w);
        g.density.push_back(summarize_band(buf));
      }
      out.angular.push_back(std::move(g));

      ChiPosterior chi{i, j, {}, {}};
      for (const auto* psi : mixtures) chi.draws.push_back(chi_coefficient(i, j, *psi));
      chi.band = summarize_band(chi.draws);
      out.chi.push_back(std::move(chi));
    }

  for (std::size_t i = 0; i < d; ++i) {
    // level grid from the threshold to the posterior-mean level of the longest period
    for (std::size_t r = 0; r < n; ++r)
      buf[r] = return_level(opt.tail_max_period, i, *margins[r], rates, thresholds, opt.days_per_year);
    const double top = std::accumulate(buf.begin(), buf.end(), 0.0) / static_cast<double>(n);
    std::vector<double> levels;
    for (std::size_t p = 0; p < opt.tail_points; ++p)
      levels.push_back(thresholds[i] + (top - thresholds[i]) * static_cast<double>(p) /
                                           static_cast<double>(opt.tail_points - 1));
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      ConditionalTailCurve c{i, j, levels, {}};
      for (double y : levels) {
        for (std::size_t r = 0; r < n; ++r) {
          const auto m = site_margin(i, *margins[r], rates, thresholds);
          const double up = m.upper_endpoint();
          const double x_i = y >= up ? kInf : m.to_frechet(y);
          buf[r] = conditional_tail_frechet(i, j, x_i, rates.frechet_thresholds[j], *mixtures[r]);
        }
        c.probability.push_back(summarize_band(buf));
      }
      out.conditional.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace dmpot
