#include "dmpot/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "dmpot/error.hpp"

namespace dmpot {

namespace {

double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -kInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_k_prior(std::size_t k, const PriorSpec& pr) {
  if (k < 1 || k > pr.k_max) return -kInf;
  double norm = 0.0;
  for (std::size_t j = 1; j <= pr.k_max; ++j)
    norm += std::exp(static_cast<double>(j) * std::log(pr.k_rate) - std::lgamma(static_cast<double>(j) + 1.0));
  return static_cast<double>(k) * std::log(pr.k_rate) - std::lgamma(static_cast<double>(k) + 1.0) - std::log(norm);
}

double log_dirichlet_weights(std::span<const double> p, double alpha) {
  const double k = static_cast<double>(p.size());
  double out = std::lgamma(k * alpha) - k * std::lgamma(alpha);
  if (alpha != 1.0)
    for (double x : p) out += (alpha - 1.0) * std::log(x);
  return out;
}

bool centers_valid(const DMParams& psi) {
  for (const auto& c : psi.components)
    for (double mu : c.center)
      if (!(mu > 0.0)) return false;
  return true;
}

void renormalize(std::vector<double>& p) {
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= s;
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double standard_normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

bool metropolis(double log_ratio, std::mt19937_64& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01(rng)) < log_ratio;
}

std::vector<double> uniform_simplex(std::size_t d, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(d);
  for (auto& x : w) x = e(rng);
  renormalize(w);
  return w;
}

/// Proposed likelihood pieces for a candidate parameter value.
struct Candidate {
  std::vector<double> x, log_jac, cluster_terms, block_terms;
  std::vector<std::vector<double>> block_bounds;
  double lambda_u{0.0};
  double log_lik{0.0};
};

double row_term(const MixtureDensity& h, const double* x, const double* lj, std::size_t d) {
  double jac = 0.0;
  for (std::size_t j = 0; j < d; ++j) jac += lj[j];
  return h.log_exponent_density({x, d}) + jac;
}

double sum_terms(const Candidate& c, const CensoredModel& model) {
  double total = std::accumulate(c.cluster_terms.begin(), c.cluster_terms.end(), 0.0);
  total += void_below_log_term(model.below_days(), model.mean_cluster_size(), c.lambda_u);
  total += std::accumulate(c.block_terms.begin(), c.block_terms.end(), 0.0);
  return total;
}

/// Likelihood after replacing the margins of `changed` sites; -inf when some coordinate leaves
/// the support of its margin.
double evaluate_margins(const Sampler& s, const ChainState& st, const std::vector<SiteMargin>& site,
                        const std::vector<bool>& changed, Candidate& c) {
  const auto& model = *s.model;
  const auto d = model.n_sites();
  const auto n = model.n_clusters();
  c.x = st.x;
  c.log_jac = st.log_jac;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (!changed[j]) continue;
      auto [xj, lj] = model.frechet_coordinate(i, j, site[j], st.augmented);
      if (!std::isfinite(xj) || !std::isfinite(lj)) return -kInf;
      c.x[i * d + j] = xj;
      c.log_jac[i * d + j] = lj;
    }
  const MixtureDensity h(st.mixture);
  c.cluster_terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.cluster_terms[i] = row_term(h, &c.x[i * d], &c.log_jac[i * d], d);
  c.lambda_u = st.lambda_u;
  c.block_bounds = st.block_bounds;
  c.block_terms = st.block_terms;
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    auto nb = block_frechet_bounds(model.blocks()[b], site);
    if (nb == c.block_bounds[b]) continue;
    c.block_terms[b] = -(static_cast<double>(model.blocks()[b].length) / model.mean_cluster_size()) *
                       exponent_measure_region(nb, st.mixture, s.config.region).value;
    c.block_bounds[b] = std::move(nb);
  }
  c.log_lik = sum_terms(c, model);
  return c.log_lik;
}

/// Likelihood under a new mixture with the margins and imputations held fixed.
double evaluate_mixture(const Sampler& s, const ChainState& st, const DMParams& psi, Candidate& c) {
  const auto& model = *s.model;
  const auto d = model.n_sites();
  const auto n = model.n_clusters();
  const MixtureDensity h(psi);
  c.cluster_terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.cluster_terms[i] = row_term(h, &st.x[i * d], &st.log_jac[i * d], d);
  c.lambda_u = model.below_days() > 0 ? exponent_measure_region(model.frechet_thresholds(), psi, s.config.region).value
                                      : 0.0;
  c.block_terms.resize(model.blocks().size());
  for (std::size_t b = 0; b < model.blocks().size(); ++b)
    c.block_terms[b] = -(static_cast<double>(model.blocks()[b].length) / model.mean_cluster_size()) *
                       exponent_measure_region(st.block_bounds[b], psi, s.config.region).value;
  c.log_lik = sum_terms(c, model);
  return c.log_lik;
}

void rebuild_caches(const Sampler& s, ChainState& st) {
  const auto& model = *s.model;
  const auto d = model.n_sites();
  const auto n = model.n_clusters();
  st.site = model.margins(st.margins);
  st.log_prior = log_prior_margins(st.margins, s.prior) + log_prior_mixture(st.mixture, s.prior, s.z_table);
  if (!s.config.likelihood_enabled) {
    st.log_lik = 0.0;
    return;
  }
  st.x.assign(n * d, 0.0);
  st.log_jac.assign(n * d, 0.0);
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      auto [xj, lj] = model.frechet_coordinate(i, j, st.site[j], st.augmented);
      finite = finite && std::isfinite(xj) && std::isfinite(lj);
      st.x[i * d + j] = xj;
      st.log_jac[i * d + j] = lj;
    }
  st.block_bounds.clear();
  for (const auto& b : model.blocks()) st.block_bounds.push_back(block_frechet_bounds(b, st.site));
  if (!finite) {
    st.log_lik = -kInf;
    return;
  }
  Candidate c;
  evaluate_mixture(s, st, st.mixture, c);
  st.cluster_terms = std::move(c.cluster_terms);
  st.lambda_u = c.lambda_u;
  st.block_terms = std::move(c.block_terms);
  st.log_lik = c.log_lik;
}

void commit(ChainState& st, Candidate&& c, bool margins_changed) {
  if (margins_changed) {
    st.x = std::move(c.x);
    st.log_jac = std::move(c.log_jac);
    st.block_bounds = std::move(c.block_bounds);
  }
  st.cluster_terms = std::move(c.cluster_terms);
  st.lambda_u = c.lambda_u;
  st.block_terms = std::move(c.block_terms);
  st.log_lik = c.log_lik;
}

void notify(const Sampler& s, const DMParams& psi) {
  if (s.config.on_accepted_mixture) s.config.on_accepted_mixture(psi);
}

/// Metropolis step on a mixture proposal; `log_q` is the proposal and Jacobian correction.
bool try_mixture(const Sampler& s, ChainState& st, DMParams&& proposal, double log_q, std::mt19937_64& rng) {
  const double lp = log_prior_mixture(proposal, s.prior, s.z_table);
  if (lp == -kInf) return false;
  const double old_lp_mix = log_prior_mixture(st.mixture, s.prior, s.z_table);
  Candidate c;
  double ll = 0.0;
  if (s.config.likelihood_enabled) {
    ll = evaluate_mixture(s, st, proposal, c);
    if (std::isnan(ll) || ll == -kInf) return false;
  }
  const double ratio = (ll - st.log_lik) + (lp - old_lp_mix) + log_q;
  if (!metropolis(ratio, rng)) return false;
  st.mixture = std::move(proposal);
  st.log_prior += lp - old_lp_mix;
  if (s.config.likelihood_enabled) commit(st, std::move(c), false);
  notify(s, st.mixture);
  return true;
}

}  // namespace

void PriorSpec::validate(std::size_t n_sites) const {
  if (!(shape_sd > 0.0) || !std::isfinite(shape_mean)) throw ConfigError("shape prior needs finite mean, sd > 0");
  if (log_scale_means.size() != n_sites) throw ConfigError("log-scale prior needs one mean per site");
  for (double m : log_scale_means)
    if (!std::isfinite(m)) throw ConfigError("log-scale prior mean must be finite");
  if (!(log_scale_sd > 0.0)) throw ConfigError("log-scale prior sd must be positive");
  if (!(nu_shape > 0.0) || !(nu_rate > 0.0)) throw ConfigError("shape-parameter Gamma prior must be positive");
  if (!(k_rate > 0.0) || k_max < 1) throw ConfigError("k prior needs rate > 0 and k_max >= 1");
  if (!(weight_alpha > 0.0)) throw ConfigError("weight Dirichlet parameter must be positive");
}

PriorSpec default_priors(const CensoredModel& model) {
  PriorSpec pr;
  for (std::size_t j = 0; j < model.n_sites(); ++j) {
    std::vector<double> ex;
    for (std::size_t i = 0; i < model.n_clusters(); ++i)
      if (model.coord(i, j).exact) ex.push_back(model.coord(i, j).value - model.thresholds()[j]);
    double mean_log = 0.0;
    if (ex.size() >= 2) {
      const double mean = std::accumulate(ex.begin(), ex.end(), 0.0) / static_cast<double>(ex.size());
      double var = 0.0;
      for (double e : ex) var += (e - mean) * (e - mean);
      var /= static_cast<double>(ex.size() - 1);
      if (var > 0.0) mean_log = 0.5 * std::log(var);
    }
    pr.log_scale_means.push_back(mean_log);
  }
  return pr;
}

namespace {

/// P(mu_j < c_j for all j) for mu uniform on the simplex, by inclusion-exclusion.
double simplex_box_probability(std::span<const double> c) {
  const auto d = c.size();
  double p = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    double s = 1.0;
    int bits = 0;
    for (std::size_t j = 0; j < d; ++j)
      if (mask & (std::size_t{1} << j)) {
        s -= c[j];
        ++bits;
      }
    if (s <= 0.0) continue;
    const double term = std::pow(s, static_cast<double>(d - 1));
    p += (bits % 2 == 0) ? term : -term;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

std::vector<double> feasibility_table(std::size_t dim, std::size_t k_max, double weight_alpha, std::size_t draws) {
  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t, double, std::size_t>, std::vector<double>> memo;
  const auto key = std::make_tuple(dim, k_max, weight_alpha, draws);
  {
    std::lock_guard lock(mu);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  std::vector<double> z(k_max + 1, 1.0);
  z[0] = 0.0;
  if (dim >= 2) {
    std::gamma_distribution<double> gam(weight_alpha, 1.0);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> p, a(dim), c(dim), mu_m(dim);
    const double inv_d = 1.0 / static_cast<double>(dim);
    for (std::size_t k = 2; k <= k_max; ++k) {
      std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (k * 1000003ULL + dim));
      p.resize(k);
      double total = 0.0;
      for (std::size_t n = 0; n < draws; ++n) {
        if (weight_alpha == 1.0)
          for (auto& x : p) x = ex(rng);
        else
          for (auto& x : p) x = gam(rng);
        renormalize(p);
        std::fill(a.begin(), a.end(), inv_d);
        // all free centers but the last are drawn; the last one is integrated exactly
        for (std::size_t m = 0; m + 2 < k; ++m) {
          double s = 0.0;
          for (auto& x : mu_m) s += (x = ex(rng));
          for (std::size_t j = 0; j < dim; ++j) a[j] -= p[m] * mu_m[j] / s;
        }
        bool open = true;
        for (std::size_t j = 0; j < dim; ++j) {
          open = open && a[j] > 0.0;
          c[j] = a[j] / p[k - 2];
        }
        if (open) total += simplex_box_probability(c);
      }
      z[k] = total / static_cast<double>(draws);
      if (!(z[k] > 0.0)) throw NumericalError("feasibility normalizer vanished; lower k_max");
    }
  }
  std::lock_guard lock(mu);
  memo.emplace(key, z);
  return z;
}

double log_prior_mixture(const DMParams& psi, const PriorSpec& pr, std::span<const double> z_table) {
  const auto k = psi.k();
  const auto d = psi.dim();
  double out = log_k_prior(k, pr);
  if (out == -kInf || !centers_valid(psi)) return -kInf;
  out -= std::log(z_table[k]);
  out += log_dirichlet_weights(psi.weights, pr.weight_alpha);
  out += static_cast<double>(k - 1) * std::lgamma(static_cast<double>(d));
  for (const auto& c : psi.components) out += log_gamma_pdf(c.shape, pr.nu_shape, pr.nu_rate);
  return out;
}

double log_prior_margins(const MarginalParams& m, const PriorSpec& pr) {
  double out = 0.0;
  for (std::size_t j = 0; j < m.n_sites(); ++j) out += log_normal_pdf(m.log_scales[j], pr.log_scale_means[j], pr.log_scale_sd);
  if (m.regional)
    out += log_normal_pdf(m.shapes.front(), pr.shape_mean, pr.shape_sd);
  else
    for (double xi : m.shapes) out += log_normal_pdf(xi, pr.shape_mean, pr.shape_sd);
  return out;
}

void McmcConfig::validate() const {
  if (chains < 1) throw ConfigError("at least one chain required");
  if (iterations < 1 || burn_in >= iterations) throw ConfigError("burn-in must be shorter than the run");
  if (thin < 1) throw ConfigError("thinning must be >= 1");
  if (adapt_every < 1) throw ConfigError("adaptation batch must be >= 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw ConfigError("target acceptance must lie in (0,1)");
}

McmcConfig McmcConfig::with_defaults(std::size_t iterations, std::size_t chains, std::uint64_t seed) {
  McmcConfig c;
  c.iterations = iterations;
  c.burn_in = iterations / 5;
  c.thin = 10;
  c.chains = chains;
  c.seed = seed;
  return c;
}

void AdaptiveStep::record(bool ok) noexcept {
  ++proposed;
  accepted += ok;
}

void AdaptiveStep::adapt(double target) noexcept {
  if (proposed == 0) return;
  ++batches;
  const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  const double delta = std::min(0.5, 2.0 / std::sqrt(static_cast<double>(batches)));
  scale *= std::exp(delta * (rate - target));
  scale = std::clamp(scale, 1e-6, 1e3);
  proposed = accepted = 0;
}

StepSizes StepSizes::initial(std::size_t n_sites, bool regional) {
  StepSizes s;
  s.log_scale.assign(n_sites, AdaptiveStep{0.1});
  s.shape.assign(regional ? 1 : n_sites, AdaptiveStep{0.05});
  return s;
}

void StepSizes::adapt(double target) noexcept {
  for (auto& a : log_scale) a.adapt(target);
  for (auto& a : shape) a.adapt(target);
  weight.adapt(target);
  center.adapt(target);
  nu.adapt(target);
}

void MoveLedger::record(const std::string& name, bool accepted) {
  auto& m = moves[name];
  ++m.proposed;
  m.accepted += accepted;
}

Sampler make_sampler(const CensoredModel& model, PriorSpec prior, McmcConfig config) {
  config.validate();
  prior.validate(model.n_sites());
  Sampler s;
  s.model = &model;
  const auto d = model.n_sites();
  if (d == 1) prior.k_max = 1;
  s.z_table = feasibility_table(d, prior.k_max, prior.weight_alpha, config.normalizer_draws);
  s.prior = std::move(prior);
  s.config = std::move(config);
  return s;
}

ChainState init_chain(const Sampler& s, std::uint64_t /*seed*/) {
  const auto& model = *s.model;
  const auto d = model.n_sites();
  ChainState st;
  st.margins.regional = s.config.regional;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> ex;
    for (std::size_t i = 0; i < model.n_clusters(); ++i)
      if (model.coord(i, j).exact) ex.push_back(model.coord(i, j).value - model.thresholds()[j]);
    if (ex.size() >= 2) {
      auto [ls, xi] = gpd_moment_start(ex);
      st.margins.log_scales.push_back(ls);
      st.margins.shapes.push_back(xi);
    } else {
      st.warnings.push_back("site " + std::to_string(j) + ": fewer than two exact excesses, prior-mean start");
      st.margins.log_scales.push_back(s.prior.log_scale_means[j]);
      st.margins.shapes.push_back(s.prior.shape_mean);
    }
  }
  if (s.config.regional) {
    const double xi = std::accumulate(st.margins.shapes.begin(), st.margins.shapes.end(), 0.0) / static_cast<double>(d);
    std::fill(st.margins.shapes.begin(), st.margins.shapes.end(), xi);
  }
  st.mixture = DMParams::barycentric(d, static_cast<double>(d));
  st.augmented = model.initial_augmentation(model.margins(st.margins));
  rebuild_caches(s, st);
  // a negative moment start can put the upper endpoint below observed data
  if (s.config.likelihood_enabled && !std::isfinite(st.log_lik)) {
    for (auto& xi : st.margins.shapes) xi = std::max(xi, 0.0);
    st.augmented = model.initial_augmentation(model.margins(st.margins));
    rebuild_caches(s, st);
  }
  if (!std::isfinite(st.log_post())) throw NumericalError("initial log posterior is not finite");
  return st;
}

std::pair<double, double> recompute_log_post(const Sampler& s, const ChainState& st) {
  const double lp = log_prior_margins(st.margins, s.prior) + log_prior_mixture(st.mixture, s.prior, s.z_table);
  if (!s.config.likelihood_enabled) return {0.0, lp};
  const auto t = total_log_likelihood(*s.model, st.augmented, st.margins, st.mixture, s.config.region);
  return {t.total, lp};
}

void gibbs_impute(const Sampler& s, ChainState& st, std::mt19937_64& rng) {
  if (!s.config.likelihood_enabled) return;
  const auto& model = *s.model;
  if (model.n_latent() == 0) return;
  const auto d = model.n_sites();
  const MixtureDensity h(st.mixture);
  for (std::size_t i = 0; i < model.n_clusters(); ++i) {
    bool touched = false;
    for (std::size_t j = 0; j < d; ++j) {
      if (model.coord(i, j).exact) continue;
      auto [lo, hi] = model.frechet_interval(i, j, st.site[j]);
      double x;
      if (lo == hi) {
        x = lo;
      } else {
        const CoordinateConditional cond(h, {&st.x[i * d], d}, j, lo, hi);
        x = cond.sample(rng);
      }
      st.augmented.at(i, j) = model.latent_from_frechet(i, j, x, st.site[j]);
      auto [xj, lj] = model.frechet_coordinate(i, j, st.site[j], st.augmented);
      st.x[i * d + j] = xj;
      st.log_jac[i * d + j] = lj;
      touched = true;
    }
    if (touched) st.cluster_terms[i] = row_term(h, &st.x[i * d], &st.log_jac[i * d], d);
  }
  Candidate c;
  c.cluster_terms = st.cluster_terms;
  c.lambda_u = st.lambda_u;
  c.block_terms = st.block_terms;
  st.log_lik = sum_terms(c, model);
}

void update_margins(const Sampler& s, ChainState& st, StepSizes& steps, MoveLedger& ledger, std::mt19937_64& rng) {
  const auto d = s.model->n_sites();
  auto attempt = [&](MarginalParams prop, const std::vector<bool>& changed) {
    const double lp = log_prior_margins(prop, s.prior);
    const double old_lp = log_prior_margins(st.margins, s.prior);
    std::vector<SiteMargin> site = st.site;
    for (std::size_t j = 0; j < d; ++j)
      if (changed[j]) site[j] = site_margin(j, prop, s.model->rates(), s.model->thresholds());
    Candidate c;
    double ll = 0.0;
    if (s.config.likelihood_enabled) {
      ll = evaluate_margins(s, st, site, changed, c);
      if (ll == -kInf || std::isnan(ll)) return false;
    }
    if (!metropolis((ll - st.log_lik) + (lp - old_lp), rng)) return false;
    st.margins = std::move(prop);
    st.site = std::move(site);
    st.log_prior += lp - old_lp;
    if (s.config.likelihood_enabled) commit(st, std::move(c), true);
    return true;
  };
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<bool> changed(d, false);
    changed[j] = true;
    auto prop = st.margins;
    prop.log_scales[j] += steps.log_scale[j].scale * standard_normal(rng);
    const bool ok = attempt(std::move(prop), changed);
    steps.log_scale[j].record(ok);
    ledger.record("log_scale", ok);
  }
  if (s.config.regional) {
    auto prop = st.margins;
    const double xi = prop.shapes.front() + steps.shape.front().scale * standard_normal(rng);
    std::fill(prop.shapes.begin(), prop.shapes.end(), xi);
    const bool ok = attempt(std::move(prop), std::vector<bool>(d, true));
    steps.shape.front().record(ok);
    ledger.record("shape", ok);
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<bool> changed(d, false);
      changed[j] = true;
      auto prop = st.margins;
      prop.shapes[j] += steps.shape[j].scale * standard_normal(rng);
      const bool ok = attempt(std::move(prop), changed);
      steps.shape[j].record(ok);
      ledger.record("shape", ok);
    }
  }
}

void update_mixture_within(const Sampler& s, ChainState& st, StepSizes& steps, MoveLedger& ledger,
                           std::mt19937_64& rng) {
  const auto k = st.mixture.k();
  const auto d = st.mixture.dim();
  if (d < 2) return;
  if (k >= 2) {
    // weight pair reallocation on the logit scale
    const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k)) % k;
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k - 1)) % (k - 1);
    if (j >= i) ++j;
    auto prop = st.mixture;
    const double total = prop.weights[i] + prop.weights[j];
    const double q = prop.weights[i] / total;
    const double z = std::log(q) - std::log1p(-q) + steps.weight.scale * standard_normal(rng);
    const double q2 = 1.0 / (1.0 + std::exp(-z));
    bool ok = false;
    if (q2 > 0.0 && q2 < 1.0) {
      prop.weights[i] = q2 * total;
      prop.weights[j] = (1.0 - q2) * total;
      renormalize(prop.weights);
      if (resolve_last_center(prop)) {
        const double log_q = std::log(q2) + std::log1p(-q2) - std::log(q) - std::log1p(-q);
        ok = try_mixture(s, st, std::move(prop), log_q, rng);
      }
    }
    steps.weight.record(ok);
    ledger.record("weight", ok);

    // additive log-ratio walk on one free center
    const auto m = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k - 1)) % (k - 1);
    prop = st.mixture;
    auto& mu = prop.components[m].center;
    const auto old_mu = mu;
    std::vector<double> lz(d, 0.0);
    for (std::size_t l = 0; l + 1 < d; ++l)
      lz[l] = std::log(mu[l]) - std::log(mu[d - 1]) + steps.center.scale * standard_normal(rng);
    const double mx = *std::max_element(lz.begin(), lz.end());
    for (std::size_t l = 0; l < d; ++l) mu[l] = std::exp(lz[l] - mx);
    renormalize(mu);
    ok = false;
    bool inside = true;
    for (double v : mu) inside = inside && v > 0.0;
    if (inside && resolve_last_center(prop)) {
      double log_q = 0.0;
      for (std::size_t l = 0; l < d; ++l) log_q += std::log(mu[l]) - std::log(old_mu[l]);
      ok = try_mixture(s, st, std::move(prop), log_q, rng);
    }
    steps.center.record(ok);
    ledger.record("center", ok);
  }
  // log random walk on one shape parameter
  const auto m = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k)) % k;
  auto prop = st.mixture;
  const double step = steps.nu.scale * standard_normal(rng);
  prop.components[m].shape *= std::exp(step);
  bool ok = false;
  if (std::isfinite(prop.components[m].shape) && prop.components[m].shape > 0.0)
    ok = try_mixture(s, st, std::move(prop), step, rng);
  steps.nu.record(ok);
  ledger.record("nu", ok);
}

std::optional<DMParams> birth_of(const DMParams& psi, std::size_t slot, double w_star, const DirichletComponent& born) {
  const auto k = psi.k();
  if (slot >= k) throw std::invalid_argument("birth slot out of range");
  if (!(w_star > 0.0 && w_star < 1.0)) throw std::invalid_argument("birth weight must lie in (0, 1)");
  DMParams out = psi;
  for (auto& p : out.weights) p *= 1.0 - w_star;
  out.weights.insert(out.weights.begin() + static_cast<std::ptrdiff_t>(slot), w_star);
  out.components.insert(out.components.begin() + static_cast<std::ptrdiff_t>(slot), born);
  renormalize(out.weights);
  if (!resolve_last_center(out)) return std::nullopt;
  return out;
}

std::optional<DMParams> death_of(const DMParams& psi, std::size_t slot) {
  const auto k = psi.k();
  if (k < 2 || slot + 1 >= k) throw std::invalid_argument("death needs a free component");
  DMParams out = psi;
  out.weights.erase(out.weights.begin() + static_cast<std::ptrdiff_t>(slot));
  out.components.erase(out.components.begin() + static_cast<std::ptrdiff_t>(slot));
  renormalize(out.weights);
  if (!resolve_last_center(out)) return std::nullopt;
  return out;
}

double birth_log_ratio(const DMParams& psi, const DMParams& after, std::size_t slot, const PriorSpec& pr,
                       std::span<const double> z_table) {
  const auto k = psi.k();
  const double kd = static_cast<double>(k);
  const double w = after.weights[slot];
  double r = log_k_prior(k + 1, pr) - log_k_prior(k, pr);
  r += std::log(z_table[k]) - std::log(z_table[k + 1]);
  r += log_dirichlet_weights(after.weights, pr.weight_alpha) - log_dirichlet_weights(psi.weights, pr.weight_alpha);
  // new center and shape are proposed from their priors, which cancel
  r -= std::log(kd) + (kd - 1.0) * std::log1p(-w);  // Beta(1, k) proposal density
  r += (kd - 1.0) * std::log1p(-w);                 // Jacobian of the weight rescaling
  return r;
}

double death_log_ratio(const DMParams& psi, std::size_t slot, const PriorSpec& pr, std::span<const double> z_table) {
  auto before = death_of(psi, slot);
  if (!before) return -kInf;
  return -birth_log_ratio(*before, psi, slot, pr, z_table);
}

void rj_move(const Sampler& s, ChainState& st, MoveLedger& ledger, std::mt19937_64& rng) {
  const auto k = st.mixture.k();
  const auto d = st.mixture.dim();
  if (d < 2) return;
  const bool birth = uniform01(rng) < 0.5;
  if (birth) {
    if (k >= s.prior.k_max) return;
    const auto slot = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k)) % k;
    const double w_star = 1.0 - std::pow(uniform01(rng), 1.0 / static_cast<double>(k));
    std::gamma_distribution<double> g(s.prior.nu_shape, 1.0 / s.prior.nu_rate);
    DirichletComponent born{uniform_simplex(d, rng), g(rng)};
    bool ok = false;
    if (w_star > 0.0 && w_star < 1.0 && born.shape > 0.0) {
      auto after = birth_of(st.mixture, slot, w_star, born);
      if (after) {
        const double log_q = birth_log_ratio(st.mixture, *after, slot, s.prior, s.z_table) -
                             (log_prior_mixture(*after, s.prior, s.z_table) -
                              log_prior_mixture(st.mixture, s.prior, s.z_table));
        ok = try_mixture(s, st, std::move(*after), log_q, rng);
      }
    }
    ledger.record("birth", ok);
  } else {
    if (k <= 1) return;
    const auto slot = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k - 1)) % (k - 1);
    bool ok = false;
    auto after = death_of(st.mixture, slot);
    if (after) {
      const double log_q = death_log_ratio(st.mixture, slot, s.prior, s.z_table) -
                           (log_prior_mixture(*after, s.prior, s.z_table) -
                            log_prior_mixture(st.mixture, s.prior, s.z_table));
      ok = try_mixture(s, st, std::move(*after), log_q, rng);
    }
    ledger.record("death", ok);
  }
}

std::vector<std::string> scalar_names(const std::vector<std::string>& sites) {
  std::vector<std::string> out;
  for (const auto& n : sites) out.push_back("sigma_" + n);
  for (const auto& n : sites) out.push_back("xi_" + n);
  out.emplace_back("k");
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j) out.push_back("chi_" + sites[i] + "_" + sites[j]);
  out.emplace_back("log_lik");
  return out;
}

std::vector<double> PosteriorSample::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no posterior column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - names.begin());
  std::vector<double> out;
  out.reserve(n_draws());
  for (std::size_t r = 0; r < n_draws(); ++r) out.push_back(values[r * names.size() + c]);
  return out;
}

PosteriorSample run_chain(const Sampler& s, std::size_t chain_index, const std::vector<std::string>& sites) {
  const auto d = s.model->n_sites();
  if (sites.size() != d) throw ConfigError("site names do not match the model");
  std::seed_seq seq{static_cast<std::uint32_t>(s.config.seed), static_cast<std::uint32_t>(s.config.seed >> 32),
                    static_cast<std::uint32_t>(chain_index)};
  std::mt19937_64 rng(seq);
  ChainState st = init_chain(s, s.config.seed);
  StepSizes steps = StepSizes::initial(d, s.config.regional);
  MoveLedger ledger;
  PosteriorSample out;
  out.chain = chain_index;
  out.names = scalar_names(sites);
  out.warnings = st.warnings;
  const auto& cfg = s.config;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    st.iteration = it;
    gibbs_impute(s, st, rng);
    update_margins(s, st, steps, ledger, rng);
    update_mixture_within(s, st, steps, ledger, rng);
    rj_move(s, st, ledger, rng);
    if (!std::isfinite(st.log_post())) {
      std::ostringstream dump;
      dump << "chain " << chain_index << " reached a non-finite log posterior at iteration " << it << ": k="
           << st.mixture.k() << " log_lik=" << st.log_lik << " log_prior=" << st.log_prior;
      for (std::size_t j = 0; j < d; ++j)
        dump << " sigma" << j << "=" << std::exp(st.margins.log_scales[j]) << " xi" << j << "=" << st.margins.shapes[j];
      throw NumericalError(dump.str());
    }
    if (it <= cfg.burn_in && it % cfg.adapt_every == 0) steps.adapt(cfg.target_acceptance);
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.iterations.push_back(it);
      for (std::size_t j = 0; j < d; ++j) out.values.push_back(std::exp(st.margins.log_scales[j]));
      for (std::size_t j = 0; j < d; ++j) out.values.push_back(st.margins.shapes[j]);
      out.values.push_back(static_cast<double>(st.mixture.k()));
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) out.values.push_back(chi_coefficient(i, j, st.mixture));
      out.values.push_back(st.log_lik);
      out.margins.push_back(st.margins);
      out.mixtures.push_back(st.mixture);
    }
  }
  out.acceptance = ledger.moves;
  return out;
}

std::vector<PosteriorSample> run_chains(const CensoredModel& model, const PriorSpec& prior, const McmcConfig& config,
                                        const std::vector<std::string>& sites) {
  const Sampler s = make_sampler(model, prior, config);
  std::vector<PosteriorSample> out(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(config.chains, std::thread::hardware_concurrency()));
  std::size_t next = 0;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard lock(mu);
        if (next >= config.chains) return;
        c = next++;
      }
      try {
        out[c] = run_chain(s, c, sites);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace dmpot
