#pragma once

// Small simulated datasets and fits shared by the MCMC unit tests and the acceptance binary.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dmpot/decluster.hpp"
#include "dmpot/likelihood.hpp"
#include "dmpot/margins.hpp"
#include "dmpot/mcmc.hpp"
#include "dmpot/simulate.hpp"

namespace toy_fit {

struct ToyData {
  dmpot::SimConfig config;
  dmpot::SeriesPanel panel;
  dmpot::DeclusterSummary summary;
  std::optional<dmpot::CensoredModel> model;
};

/// d = 2, k = 2 truth with an optional historical era of interval-censored records.
inline dmpot::SimConfig two_site_config(std::uint64_t seed, std::size_t n_days = 15000, double zeta = 0.01,
                                        std::size_t historical_days = 3000) {
  using namespace dmpot;
  SimConfig cfg;
  cfg.site_names = {"north", "south"};
  cfg.start = parse_iso_date("1950-01-01");
  cfg.n_days = n_days;
  cfg.thresholds = {200.0, 300.0};
  cfg.zetas = {zeta, zeta};
  cfg.margins.log_scales = {std::log(80.0), std::log(120.0)};
  cfg.margins.shapes = {0.15, 0.15};
  cfg.margins.regional = true;
  cfg.mixture.weights = {0.4, 0.6};
  cfg.mixture.components = {DirichletComponent{{0.3, 0.7}, 6.0},
                            DirichletComponent{{(0.5 - 0.4 * 0.3) / 0.6, (0.5 - 0.4 * 0.7) / 0.6}, 12.0}};
  cfg.censoring.historical_days = historical_days;
  cfg.censoring.perception = {400.0, 600.0};
  cfg.seed = seed;
  return cfg;
}

inline ToyData make(const dmpot::SimConfig& cfg, int run_length = 2) {
  using namespace dmpot;
  ToyData t{cfg, simulate_panel(cfg).first, {}, std::nullopt};
  const ThresholdConfig tc{cfg.thresholds, run_length};
  t.summary = decluster(t.panel, tc);
  t.model.emplace(t.summary, estimate_zeta(t.panel, tc));
  return t;
}

inline double true_chi(const dmpot::SimConfig& cfg) { return dmpot::chi_coefficient(0, 1, cfg.mixture); }

}  // namespace toy_fit
