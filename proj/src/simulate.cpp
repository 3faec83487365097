#include "dmpot/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dmpot/error.hpp"

namespace dmpot {

void SimConfig::validate() const {
  const auto d = site_names.size();
  if (d == 0) throw ConfigError("simulation needs at least one site");
  if (thresholds.size() != d || zetas.size() != d || margins.n_sites() != d)
    throw ConfigError("simulation inputs disagree on the number of sites");
  margins.validate();
  if (mixture.dim() != d) throw ConfigError("mixture dimension differs from the site count");
  mixture.validate();
  for (double z : zetas)
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("exceedance rates must lie in (0, 1)");
  const auto& c = censoring;
  if (c.historical_days > n_days) throw ConfigError("historical era longer than the panel");
  if (c.historical_days > 0 && c.perception.size() != d) throw ConfigError("perception thresholds needed per site");
  for (std::size_t j = 0; j < c.perception.size(); ++j)
    if (!(c.perception[j] >= thresholds[j])) throw ConfigError("perception threshold below the model threshold");
  if (!(c.lo_factor > 0.0 && c.lo_factor <= 1.0 && c.hi_factor >= 1.0)) throw ConfigError("bad flood interval factors");
  if (!c.missing_eras.empty() && c.missing_eras.size() != d) throw ConfigError("missing eras needed per site");
  if (!(c.recent_missing_prob >= 0.0 && c.recent_missing_prob < 1.0)) throw ConfigError("bad missing probability");
  if (!(c.right_censored_prob >= 0.0 && c.right_censored_prob <= 1.0)) throw ConfigError("bad right-censoring probability");
}

std::pair<SeriesPanel, SyntheticTruth> simulate_panel(const SimConfig& cfg) {
  cfg.validate();
  const auto d = cfg.site_names.size();
  const auto rates = ExceedanceRates::from_zetas(cfg.zetas);
  std::vector<SiteMargin> margins;
  for (std::size_t j = 0; j < d; ++j) margins.push_back(site_margin(j, cfg.margins, rates, cfg.thresholds));
  const auto& u = rates.frechet_thresholds;
  const double r0 = *std::min_element(u.begin(), u.end());

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::poisson_distribution<int> n_points(static_cast<double>(d) / r0);

  SyntheticTruth truth;
  truth.config = cfg;
  truth.latent.assign(cfg.n_days * d, 0.0);
  std::vector<double> xmax(d), w(d);
  for (std::size_t t = 0; t < cfg.n_days; ++t) {
    std::fill(xmax.begin(), xmax.end(), 0.0);
    bool extreme = false;
    const int n = n_points(rng);
    for (int p = 0; p < n; ++p) {
      double v;
      do v = unif(rng);
      while (v <= 0.0);
      const double r = r0 / v;
      sample_dm_point(cfg.mixture, rng, w);
      bool inside = false;
      for (std::size_t j = 0; j < d; ++j) inside = inside || r * w[j] > u[j];
      if (!inside) continue;
      ++truth.points;
      extreme = true;
      for (std::size_t j = 0; j < d; ++j) xmax[j] = std::max(xmax[j], r * w[j]);
    }
    truth.extreme_days += extreme;
    for (std::size_t j = 0; j < d; ++j) {
      const double filler = cfg.thresholds[j] * unif(rng);
      truth.latent[t * d + j] = xmax[j] > u[j] ? margins[j].from_frechet(xmax[j]) : filler;
    }
  }

  const auto& c = cfg.censoring;
  std::vector<Observation> cells(cfg.n_days * d);
  for (std::size_t t = 0; t < cfg.n_days; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      const double y = truth.latent[t * d + j];
      Observation o;
      if (t < c.historical_days) {
        const double pj = c.perception[j];
        if (y > pj) {
          if (unif(rng) < c.right_censored_prob)
            o = Observation::right_censored(pj);
          else
            o = Observation::interval(c.lo_factor * y, c.hi_factor * y);
        } else {
          o = Observation::interval(0.0, pj);
        }
      } else {
        o = unif(rng) < c.recent_missing_prob ? Observation::missing() : Observation::exact(y);
      }
      if (!c.missing_eras.empty())
        for (const auto& [a, b] : c.missing_eras[j])
          if (t >= a && t <= b) o = Observation::missing();
      cells[t * d + j] = o;
    }
  SeriesPanel panel(cfg.site_names, cfg.start, cfg.n_days, std::move(cells));
  truth.emitted = panel_summary(panel);
  return {std::move(panel), std::move(truth)};
}

SimConfig gardons_lookalike_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.site_names = {"Saint-Jean", "Mialet", "Anduze", "Ales"};
  cfg.start = parse_iso_date("1604-09-10");
  const Date end = parse_iso_date("2010-12-31");
  cfg.n_days = static_cast<std::size_t>((end - cfg.start).count()) + 1;
  cfg.thresholds = {300.0, 320.0, 520.0, 380.0};
  cfg.zetas = {0.0016, 0.0016, 0.0016, 0.0016};
  cfg.margins.log_scales = {std::log(120.0), std::log(130.0), std::log(210.0), std::log(150.0)};
  cfg.margins.shapes = {0.2, 0.2, 0.2, 0.2};
  cfg.margins.regional = true;
  cfg.mixture.weights = {0.5, 0.5};
  cfg.mixture.components = {DirichletComponent{{0.4, 0.3, 0.2, 0.1}, 20.0},
                            DirichletComponent{{0.1, 0.2, 0.3, 0.4}, 10.0}};
  auto& cs = cfg.censoring;
  cs.historical_days = static_cast<std::size_t>((parse_iso_date("1892-01-01") - cfg.start).count());
  cs.perception = {600.0, 640.0, 1040.0, 760.0};
  cs.right_censored_prob = 0.1;
  cs.recent_missing_prob = 0.01;
  const auto day = [&](const char* iso) {
    return static_cast<std::size_t>((parse_iso_date(iso) - cfg.start).count());
  };
  cs.missing_eras = {
      {{day("1700-01-01"), day("1740-12-31")}},
      {{0, day("1650-12-31")}, {day("1940-01-01"), day("1950-12-31")}},
      {{day("1780-01-01"), day("1800-12-31")}},
      {{0, day("1700-12-31")}},
  };
  cfg.seed = seed;
  return cfg;
}

SeriesPanel make_gardons_lookalike(std::uint64_t seed) { return simulate_panel(gardons_lookalike_config(seed)).first; }

}  // namespace dmpot
