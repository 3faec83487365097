#include "dmpot/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "dmpot/error.hpp"
#include "dmpot/simulate.hpp"

namespace dmpot {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return s;
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

/// JSON number that survives +/-inf and NaN.
json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

PriorSpec prior_from_json(const json& j) {
  check_keys(j, {"shape_mean", "shape_sd", "log_scale_means", "log_scale_sd", "nu_shape", "nu_rate", "k_rate", "k_max",
                 "weight_alpha"},
             "priors");
  PriorSpec p;
  p.shape_mean = get_or(j, "shape_mean", p.shape_mean);
  p.shape_sd = get_or(j, "shape_sd", p.shape_sd);
  p.log_scale_means = get_or(j, "log_scale_means", p.log_scale_means);
  p.log_scale_sd = get_or(j, "log_scale_sd", p.log_scale_sd);
  p.nu_shape = get_or(j, "nu_shape", p.nu_shape);
  p.nu_rate = get_or(j, "nu_rate", p.nu_rate);
  p.k_rate = get_or(j, "k_rate", p.k_rate);
  p.k_max = get_or(j, "k_max", p.k_max);
  p.weight_alpha = get_or(j, "weight_alpha", p.weight_alpha);
  return p;
}

RegionOptions region_from_json(const json& j) {
  check_keys(j, {"method", "rel_tol", "qmc_nodes", "qmc_shifts", "qmc_seed"}, "integration");
  RegionOptions o;
  const auto m = get_or<std::string>(j, "method", "auto");
  if (m == "auto")
    o.method = RegionMethod::Auto;
  else if (m == "closed_form")
    o.method = RegionMethod::ClosedForm;
  else if (m == "quadrature")
    o.method = RegionMethod::Quadrature;
  else if (m == "qmc")
    o.method = RegionMethod::QuasiMonteCarlo;
  else
    throw ConfigError("unknown integration method '" + m + "'");
  o.rel_tol = get_or(j, "rel_tol", o.rel_tol);
  o.qmc_nodes = get_or(j, "qmc_nodes", o.qmc_nodes);
  o.qmc_shifts = get_or(j, "qmc_shifts", o.qmc_shifts);
  o.qmc_seed = get_or(j, "qmc_seed", o.qmc_seed);
  return o;
}

DMParams mixture_from_json(const json& j) {
  check_keys(j, {"weights", "components"}, "mixture");
  DMParams psi;
  psi.weights = get_req<std::vector<double>>(j, "weights", "mixture");
  for (const auto& c : j.at("components")) {
    check_keys(c, {"center", "shape"}, "mixture component");
    psi.components.push_back({get_req<std::vector<double>>(c, "center", "component"),
                              get_req<double>(c, "shape", "component")});
  }
  try {
    psi.validate(1e-9);
  } catch (const NumericalError& e) {
    throw ConfigError(std::string("invalid mixture: ") + e.what());
  }
  return psi;
}

json mixture_to_json(const DMParams& psi) {
  json comps = json::array();
  for (const auto& c : psi.components) comps.push_back({{"center", c.center}, {"shape", c.shape}});
  return {{"weights", psi.weights}, {"components", comps}};
}

MarginalParams margins_from_json(const json& j, std::size_t d) {
  MarginalParams m;
  if (j.contains("log_scales"))
    m.log_scales = get_req<std::vector<double>>(j, "log_scales", "theta");
  else
    for (double s : get_req<std::vector<double>>(j, "scales", "theta")) {
      if (!(s > 0.0)) throw ConfigError("scales must be positive");
      m.log_scales.push_back(std::log(s));
    }
  m.shapes = get_req<std::vector<double>>(j, "shapes", "theta");
  if (m.shapes.size() == 1 && d > 1) m.shapes.assign(d, m.shapes.front());
  m.regional = std::all_of(m.shapes.begin(), m.shapes.end(), [&](double x) { return x == m.shapes.front(); });
  if (m.log_scales.size() != d || m.shapes.size() != d) throw ConfigError("theta margins need one entry per site");
  return m;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

void write_band_row(std::ostream& out, const Band& b) {
  out << format_double(b.mean) << ',' << format_double(b.q05) << ',' << format_double(b.q95) << '\n';
}

std::vector<PosteriorSample> selected(const FitResult& fit) {
  std::vector<PosteriorSample> out;
  for (auto c : fit.reported_chains) out.push_back(fit.chains[c]);
  return out;
}

std::vector<std::string> margin_scalars(const std::vector<std::string>& sites) {
  std::vector<std::string> out;
  for (const auto& s : sites) {
    out.push_back("sigma_" + s);
    out.push_back("xi_" + s);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  auto j = parse_json(text);
  if (j.is_object() && j.contains("software") && j.contains("config")) j = j.at("config");
  check_keys(j, {"data", "thresholds", "run_length", "regional", "recent_only", "recent_start", "priors", "mcmc",
                 "integration", "products", "selection", "theta", "simulation", "periods"},
             "run configuration");
  RunConfig c;
  c.data = get_or<std::string>(j, "data", "");
  c.thresholds.thresholds = get_or<std::vector<double>>(j, "thresholds", {});
  c.thresholds.run_length = get_or(j, "run_length", 1);
  c.regional = get_or(j, "regional", false);
  c.recent_only = get_or(j, "recent_only", false);
  c.recent_start = parse_iso_date(get_or<std::string>(j, "recent_start", "1892-01-01"));
  if (j.contains("priors")) c.prior = prior_from_json(j.at("priors"));
  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    check_keys(m, {"chains", "iterations", "burn_in", "thin", "seed", "normalizer_draws", "adapt_every",
                   "target_acceptance", "likelihood"},
               "mcmc");
    c.mcmc.iterations = get_or(m, "iterations", c.mcmc.iterations);
    c.mcmc.burn_in = get_or(m, "burn_in", c.mcmc.iterations / 5);
    c.mcmc.thin = get_or(m, "thin", c.mcmc.thin);
    c.mcmc.chains = get_or(m, "chains", c.mcmc.chains);
    c.mcmc.seed = get_or(m, "seed", c.mcmc.seed);
    c.mcmc.normalizer_draws = get_or(m, "normalizer_draws", c.mcmc.normalizer_draws);
    c.mcmc.adapt_every = get_or(m, "adapt_every", c.mcmc.adapt_every);
    c.mcmc.target_acceptance = get_or(m, "target_acceptance", c.mcmc.target_acceptance);
    c.mcmc.likelihood_enabled = get_or(m, "likelihood", true);
  }
  if (j.contains("integration")) c.mcmc.region = region_from_json(j.at("integration"));
  if (j.contains("products")) {
    const auto& p = j.at("products");
    check_keys(p, {"periods", "angular_points", "tail_points", "tail_max_period", "days_per_year"}, "products");
    c.products.periods = get_or(p, "periods", c.products.periods);
    c.products.angular_points = get_or(p, "angular_points", c.products.angular_points);
    c.products.tail_points = get_or(p, "tail_points", c.products.tail_points);
    c.products.tail_max_period = get_or(p, "tail_max_period", c.products.tail_max_period);
    c.products.days_per_year = get_or(p, "days_per_year", c.products.days_per_year);
  }
  const auto sel = get_or<std::string>(j, "selection", "pooled");
  if (sel == "pooled")
    c.selection = ChainSelection::Pooled;
  else if (sel == "best")
    c.selection = ChainSelection::Best;
  else
    throw ConfigError("selection must be 'pooled' or 'best'");
  c.mcmc.regional = c.regional;
  c.json = j.dump();
  return c;
}

RunConfig RunConfig::from_file(const fs::path& p) { return from_json_text(read_text(p)); }

PreparedData prepare_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("run configuration has no 'data' path");
  if (!fs::exists(cfg.data)) throw ConfigError("data file '" + cfg.data + "' does not exist");
  PreparedData d;
  d.panel = read_csv_file(cfg.data);
  if (cfg.recent_only) d.panel = d.panel.from_date(cfg.recent_start);
  try {
    cfg.thresholds.validate(d.panel.n_sites());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  d.summary = decluster(d.panel, cfg.thresholds);
  d.rates = estimate_zeta(d.panel, cfg.thresholds);
  return d;
}

FitResult run_fit(const RunConfig& cfg, const PreparedData& data, const CensoredModel& model) {
  FitResult fit;
  fit.prior = cfg.prior ? *cfg.prior : default_priors(model);
  if (fit.prior.log_scale_means.empty()) fit.prior.log_scale_means = default_priors(model).log_scale_means;
  fit.chains = run_chains(model, fit.prior, cfg.mcmc, data.summary.site_names);
  fit.diagnostics = diagnose(fit.chains);
  const auto sites = data.summary.site_names;
  const auto marg = margin_scalars(sites);
  // a chain qualifies when every marginal scalar passes the stationarity test
  std::vector<std::size_t> passing;
  std::vector<std::size_t> pass_count(fit.chains.size(), 0);
  for (std::size_t c = 0; c < fit.chains.size(); ++c) {
    bool ok = true;
    for (const auto& name : marg) {
      const bool s = fit.diagnostics.at(name).stationary[c];
      ok = ok && s;
      pass_count[c] += s;
    }
    if (ok) passing.push_back(c);
  }
  if (cfg.selection == ChainSelection::Best) {
    const auto best = static_cast<std::size_t>(std::max_element(pass_count.begin(), pass_count.end()) - pass_count.begin());
    fit.reported_chains = {best};
  } else if (passing.empty()) {
    fit.notes.emplace_back("no chain passed the stationarity test on every marginal parameter; all chains pooled");
    fit.reported_chains.resize(fit.chains.size());
    std::iota(fit.reported_chains.begin(), fit.reported_chains.end(), 0);
  } else {
    fit.reported_chains = passing;
  }
  for (const auto& c : fit.chains)
    for (const auto& w : c.warnings) fit.notes.push_back("chain " + std::to_string(c.chain) + ": " + w);
  return fit;
}

void write_posterior_csv(const fs::path& p, const std::vector<PosteriorSample>& chains) {
  auto out = open_out(p);
  if (chains.empty()) return;
  out << "iteration,chain";
  for (const auto& n : chains.front().names) out << ',' << n;
  out << '\n';
  for (const auto& c : chains) {
    const auto w = c.names.size();
    for (std::size_t r = 0; r < c.n_draws(); ++r) {
      out << c.iterations[r] << ',' << c.chain;
      for (std::size_t k = 0; k < w; ++k) out << ',' << format_double(c.values[r * w + k]);
      out << '\n';
    }
  }
}

void write_diagnostics_json(const fs::path& p, const FitResult& fit) {
  json j;
  json scalars = json::array();
  for (const auto& s : fit.diagnostics.scalars) {
    json e{{"name", s.name}, {"rhat", num(s.rhat)}, {"ess", num(s.ess)}};
    if (!s.rhat_note.empty()) e["rhat_note"] = s.rhat_note;
    json st = json::array();
    for (std::size_t c = 0; c < s.stationary.size(); ++c)
      st.push_back({{"chain", c}, {"stationary", static_cast<bool>(s.stationary[c])}, {"start", s.start[c]}});
    e["heidelberger_welch"] = st;
    scalars.push_back(e);
  }
  j["scalars"] = scalars;
  j["chains_passing"] = fit.diagnostics.chains_passing;
  j["reported_chains"] = fit.reported_chains;
  json acc = json::array();
  for (const auto& c : fit.chains) {
    json a;
    a["chain"] = c.chain;
    for (const auto& [name, m] : c.acceptance) a[name] = {{"proposed", m.proposed}, {"accepted", m.accepted}};
    acc.push_back(a);
  }
  j["acceptance"] = acc;
  j["notes"] = fit.notes;
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

std::vector<std::string> emit_products(const std::vector<PosteriorSample>& chains, const CensoredModel& model,
                                       const std::vector<std::string>& sites, const ProductOptions& opt,
                                       const fs::path& outdir) {
  std::size_t draws = 0;
  for (const auto& c : chains) draws += c.n_draws();
  if (draws == 0) throw DataError("no retained draws");
  const auto prod = posterior_products(chains, model, opt);
  fs::create_directories(outdir);
  std::vector<std::string> files;
  {
    files.emplace_back("return_levels.csv");
    auto out = open_out(outdir / files.back());
    out << "site,T_years,posterior_mean,q05,q95\n";
    for (const auto& c : prod.return_levels)
      for (std::size_t p = 0; p < c.periods.size(); ++p) {
        out << sites[c.site] << ',' << format_double(c.periods[p]) << ',';
        write_band_row(out, c.levels[p]);
      }
  }
  for (const auto& g : prod.angular) {
    files.push_back("angular_" + sanitize(sites[g.i]) + "_" + sanitize(sites[g.j]) + ".csv");
    auto out = open_out(outdir / files.back());
    out << "w,density,q05,q95\n";
    for (std::size_t p = 0; p < g.w.size(); ++p) {
      out << format_double(g.w[p]) << ',';
      write_band_row(out, g.density[p]);
    }
  }
  {
    files.emplace_back("chi.csv");
    auto out = open_out(outdir / files.back());
    out << "draw";
    for (const auto& c : prod.chi) out << ",chi_" << sites[c.i] << '_' << sites[c.j];
    out << '\n';
    for (std::size_t r = 0; !prod.chi.empty() && r < prod.chi.front().draws.size(); ++r) {
      out << r;
      for (const auto& c : prod.chi) out << ',' << format_double(c.draws[r]);
      out << '\n';
    }
    files.emplace_back("chi_summary.csv");
    auto sum = open_out(outdir / files.back());
    sum << "pair,posterior_mean,q05,q95\n";
    for (const auto& c : prod.chi) {
      sum << sites[c.i] << '_' << sites[c.j] << ',';
      write_band_row(sum, c.band);
    }
  }
  for (const auto& c : prod.conditional) {
    files.push_back("conditional_" + sanitize(sites[c.i]) + "_given_" + sanitize(sites[c.j]) + ".csv");
    auto out = open_out(outdir / files.back());
    out << "level,posterior_mean,q05,q95\n";
    for (std::size_t p = 0; p < c.levels.size(); ++p) {
      out << format_double(c.levels[p]) << ',';
      write_band_row(out, c.probability[p]);
    }
  }
  return files;
}

void write_manifest(const fs::path& outdir, const std::string& subcommand, const std::string& config_json,
                    const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& outputs) {
  json j;
  j["software"] = kSoftwareVersion;
  j["subcommand"] = subcommand;
  j["config_hash"] = hex64(fnv1a64(config_json));
  j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  j["seeds"] = seeds;
  json files = json::object();
  for (const auto& f : outputs) files[f] = hex64(fnv1a64(read_text(outdir / f)));
  j["outputs"] = files;
  auto out = open_out(outdir / "manifest.json");
  out << j.dump(2) << '\n';
}

FitResult fit_to_directory(const RunConfig& cfg, const fs::path& outdir) {
  const auto data = prepare_data(cfg);
  const CensoredModel model(data.summary, data.rates);
  auto fit = run_fit(cfg, data, model);
  fs::create_directories(outdir);
  std::vector<std::string> files{"posterior.csv", "diagnostics.json"};
  write_posterior_csv(outdir / "posterior.csv", fit.chains);
  write_diagnostics_json(outdir / "diagnostics.json", fit);
  for (auto& f : emit_products(selected(fit), model, data.summary.site_names, cfg.products, outdir))
    files.push_back(std::move(f));
  std::vector<std::uint64_t> seeds{cfg.mcmc.seed};
  write_manifest(outdir, "fit", cfg.json, seeds, files);
  return fit;
}

GridOutcome run_experiment_grid(const RunConfig& cfg, const fs::path& outdir) {
  GridOutcome outcome;
  struct Variant {
    std::string name;
    bool regional, recent;
  };
  const std::vector<Variant> variants{{"regional_full", true, false},
                                      {"local_full", false, false},
                                      {"regional_recent", true, true},
                                      {"local_recent", false, true}};
  fs::create_directories(outdir);
  std::map<std::string, std::vector<PosteriorSample>> draws;
  std::map<std::string, double> best_loglik;
  std::vector<std::string> sites;
  std::optional<CensoredModel> full_model;
  for (const auto& v : variants) {
    outcome.variants.push_back(v.name);
    try {
      RunConfig vc = cfg;
      vc.regional = v.regional;
      vc.mcmc.regional = v.regional;
      vc.recent_only = v.recent;
      auto j = json::parse(cfg.json);
      j["regional"] = v.regional;
      j["recent_only"] = v.recent;
      vc.json = j.dump();
      const auto data = prepare_data(vc);
      const CensoredModel model(data.summary, data.rates);
      auto fit = run_fit(vc, data, model);
      const auto dir = outdir / v.name;
      fs::create_directories(dir);
      std::vector<std::string> files{"posterior.csv", "diagnostics.json"};
      write_posterior_csv(dir / "posterior.csv", fit.chains);
      write_diagnostics_json(dir / "diagnostics.json", fit);
      auto sel = selected(fit);
      for (auto& f : emit_products(sel, model, data.summary.site_names, vc.products, dir)) files.push_back(std::move(f));
      write_manifest(dir, "fit", vc.json, {vc.mcmc.seed}, files);
      sites = data.summary.site_names;
      double best = -kInf;
      for (const auto& c : fit.chains)
        for (double ll : c.column("log_lik")) best = std::max(best, ll);
      best_loglik[v.name] = best;
      draws[v.name] = std::move(sel);
    } catch (const std::exception& e) {
      outcome.errors[v.name] = e.what();
    }
  }
  std::vector<std::string> files;
  {
    // return levels come straight from each variant's retained margins
    files.emplace_back("comparison.csv");
    auto out = open_out(outdir / files.back());
    out << "site,T_years,variant,posterior_mean,q05,q95\n";
    if (!sites.empty()) {
      const auto data = prepare_data(cfg);
      for (std::size_t j = 0; j < sites.size(); ++j)
        for (double T : cfg.products.periods)
          for (const auto& v : variants) {
            out << sites[j] << ',' << format_double(T) << ',' << v.name << ',';
            auto it = draws.find(v.name);
            if (it == draws.end()) {
              out << "nan,nan,nan\n";
              continue;
            }
            RunConfig vc = cfg;
            vc.recent_only = v.recent;
            const auto vd = v.recent ? prepare_data(vc) : data;
            std::vector<double> levels;
            try {
              for (const auto& c : it->second)
                for (const auto& m : c.margins)
                  levels.push_back(return_level(T, j, m, vd.rates, cfg.thresholds.thresholds, cfg.products.days_per_year));
              write_band_row(out, summarize_band(levels));
            } catch (const std::domain_error&) {
              out << "nan,nan,nan\n";
            }
          }
    }
  }
  {
    files.emplace_back("comparison_parameters.csv");
    auto out = open_out(outdir / files.back());
    out << "variant,scalar,mean,sd,q05,q95\n";
    for (const auto& v : variants) {
      auto it = draws.find(v.name);
      if (it == draws.end() || it->second.empty()) continue;
      for (const auto& name : it->second.front().names) {
        std::vector<double> col;
        for (const auto& c : it->second) {
          auto x = c.column(name);
          col.insert(col.end(), x.begin(), x.end());
        }
        const auto b = summarize_band(col);
        double var = 0.0;
        for (double x : col) var += (x - b.mean) * (x - b.mean);
        const double sd = col.size() > 1 ? std::sqrt(var / static_cast<double>(col.size() - 1)) : 0.0;
        out << v.name << ',' << name << ',' << format_double(b.mean) << ',' << format_double(sd) << ','
            << format_double(b.q05) << ',' << format_double(b.q95) << '\n';
      }
    }
  }
  {
    files.emplace_back("lrt.json");
    json j;
    j["maximum_posterior_draws"] = true;
    j["note"] = "log-likelihoods are the maximum over retained posterior draws, not maximized likelihoods";
    for (const auto& era : {std::string("full"), std::string("recent")}) {
      const auto r = best_loglik.find("regional_" + era);
      const auto l = best_loglik.find("local_" + era);
      if (r == best_loglik.end() || l == best_loglik.end()) continue;
      json e{{"loglik_regional", num(r->second)}, {"loglik_local", num(l->second)}};
      try {
        e["p_value"] = num(lrt_regional_shape(r->second, l->second, sites.size()));
      } catch (const std::exception& ex) {
        e["error"] = ex.what();
      }
      j[era] = e;
    }
    auto out = open_out(outdir / files.back());
    out << j.dump(2) << '\n';
  }
  {
    files.emplace_back("grid_status.json");
    json j = json::object();
    for (const auto& v : variants) j[v.name] = outcome.errors.count(v.name) ? outcome.errors.at(v.name) : "ok";
    auto out = open_out(outdir / files.back());
    out << j.dump(2) << '\n';
  }
  write_manifest(outdir, "fit --grid", cfg.json, {cfg.mcmc.seed}, files);
  return outcome;
}

namespace {

json truth_to_json(const SyntheticTruth& t) {
  const auto& c = t.config;
  json j;
  j["site_names"] = c.site_names;
  j["start"] = format_iso_date(c.start);
  j["n_days"] = c.n_days;
  j["thresholds"] = c.thresholds;
  j["zetas"] = c.zetas;
  std::vector<double> scales;
  for (double ls : c.margins.log_scales) scales.push_back(std::exp(ls));
  j["scales"] = scales;
  j["shapes"] = c.margins.shapes;
  j["mixture"] = mixture_to_json(c.mixture);
  json chi = json::object();
  for (std::size_t a = 0; a < c.site_names.size(); ++a)
    for (std::size_t b = a + 1; b < c.site_names.size(); ++b)
      chi[c.site_names[a] + "_" + c.site_names[b]] = chi_coefficient(a, b, c.mixture);
  j["chi"] = chi;
  json cens;
  cens["historical_days"] = c.censoring.historical_days;
  cens["perception"] = c.censoring.perception;
  cens["lo_factor"] = c.censoring.lo_factor;
  cens["hi_factor"] = c.censoring.hi_factor;
  cens["right_censored_prob"] = c.censoring.right_censored_prob;
  cens["recent_missing_prob"] = c.censoring.recent_missing_prob;
  cens["missing_eras"] = c.censoring.missing_eras;
  j["censoring"] = cens;
  j["seed"] = c.seed;
  j["extreme_days"] = t.extreme_days;
  j["points"] = t.points;
  json emitted = json::object();
  for (std::size_t s = 0; s < c.site_names.size(); ++s) emitted[c.site_names[s]] = t.emitted[s];
  j["emitted"] = emitted;
  return j;
}

SimConfig sim_from_json(const json& j, std::uint64_t seed) {
  if (j.is_string() || (j.is_object() && j.value("preset", "") == "lookalike")) {
    if (j.is_string() && j.get<std::string>() != "lookalike") throw ConfigError("unknown simulation preset");
    return gardons_lookalike_config(seed);
  }
  check_keys(j, {"site_names", "start", "n_days", "thresholds", "zetas", "log_scales", "scales", "shapes", "mixture",
                 "censoring"},
             "simulation");
  SimConfig c;
  c.site_names = get_req<std::vector<std::string>>(j, "site_names", "simulation");
  c.start = parse_iso_date(get_or<std::string>(j, "start", "2000-01-01"));
  c.n_days = get_req<std::size_t>(j, "n_days", "simulation");
  c.thresholds = get_req<std::vector<double>>(j, "thresholds", "simulation");
  c.zetas = get_req<std::vector<double>>(j, "zetas", "simulation");
  c.margins = margins_from_json(j, c.site_names.size());
  c.mixture = mixture_from_json(j.at("mixture"));
  if (j.contains("censoring")) {
    const auto& s = j.at("censoring");
    check_keys(s, {"historical_days", "perception", "lo_factor", "hi_factor", "right_censored_prob",
                   "recent_missing_prob", "missing_eras"},
               "censoring");
    auto& cs = c.censoring;
    cs.historical_days = get_or(s, "historical_days", cs.historical_days);
    cs.perception = get_or(s, "perception", cs.perception);
    cs.lo_factor = get_or(s, "lo_factor", cs.lo_factor);
    cs.hi_factor = get_or(s, "hi_factor", cs.hi_factor);
    cs.right_censored_prob = get_or(s, "right_censored_prob", cs.right_censored_prob);
    cs.recent_missing_prob = get_or(s, "recent_missing_prob", cs.recent_missing_prob);
    cs.missing_eras = get_or(s, "missing_eras", cs.missing_eras);
  }
  c.seed = seed;
  return c;
}

struct Theta {
  MarginalParams margins;
  DMParams mixture;
};

Theta theta_from_config(const std::string& text, std::size_t d) {
  json j = parse_json(text);
  if (j.is_object() && j.contains("software") && j.contains("config")) j = j.at("config");
  if (!j.contains("theta")) throw ConfigError("configuration has no 'theta'");
  const auto& t = j.at("theta");
  check_keys(t, {"log_scales", "scales", "shapes", "mixture"}, "theta");
  Theta out{margins_from_json(t, d), t.contains("mixture") ? mixture_from_json(t.at("mixture"))
                                                           : DMParams::barycentric(d, static_cast<double>(d))};
  if (out.mixture.dim() != d) throw ConfigError("theta mixture dimension differs from the site count");
  return out;
}

struct PosteriorColumns {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  [[nodiscard]] std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
  [[nodiscard]] const std::vector<double>& column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("posterior has no column '" + name + "'");
    return columns[static_cast<std::size_t>(it - names.begin())];
  }
  [[nodiscard]] double value(const std::string& name, std::size_t r) const { return column(name)[r]; }
};

PosteriorColumns read_posterior_csv(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("'" + p.string() + "' does not exist");
  std::ifstream in(p);
  std::string line;
  PosteriorColumns post;
  if (!std::getline(in, line)) throw DataError("no retained draws");
  {
    std::istringstream hs(line);
    std::string f;
    while (std::getline(hs, f, ',')) post.names.push_back(f);
  }
  post.columns.resize(post.names.size());
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string f;
    std::size_t c = 0;
    for (; std::getline(ls, f, ','); ++c) {
      if (c >= post.columns.size()) throw DataError("ragged posterior row");
      try {
        post.columns[c].push_back(std::stod(f));
      } catch (const std::exception&) {
        throw DataError("unparseable posterior field '" + f + "'");
      }
    }
    if (c != post.columns.size()) throw DataError("ragged posterior row");
  }
  if (post.n_rows() == 0) throw DataError("no retained draws");
  return post;
}

int exit_code_for(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Bayesian multivariate peaks-over-threshold model with Dirichlet-mixture dependence"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool recent_only = false, regional = false, grid = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration or manifest");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed, "Override the random seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--recent-only", recent_only, "Use only the systematic measurement period");
    sub->add_flag("--regional", regional, "Share one shape parameter across sites");
  };
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel and its truth ledger");
  add_common(sim, false);
  auto* dec = app.add_subcommand("decluster", "Write cluster maxima and undetermined blocks");
  add_common(dec, true);
  auto* fit = app.add_subcommand("fit", "Run the sampler and write posterior products");
  add_common(fit, true);
  fit->add_flag("--grid,--experiment-grid", grid, "Run the regional x period experiment grid");
  auto* summ = app.add_subcommand("summarize", "Summarize posterior.csv in --out");
  add_common(summ, false);
  auto* rl = app.add_subcommand("return-levels", "Return levels for the theta in --config");
  add_common(rl, true);
  auto* chi = app.add_subcommand("chi", "Dependence coefficients and joint return periods for theta");
  add_common(chi, true);
  auto* ll = app.add_subcommand("loglik", "Dump likelihood terms for theta as JSON");
  add_common(ll, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const fs::path out(out_dir);
    if (sim->parsed()) {
      const std::uint64_t s = seed.value_or(1);
      json sim_json = "lookalike";
      std::string cfg_text = "{}";
      if (!config_path.empty()) {
        cfg_text = read_text(config_path);
        auto j = parse_json(cfg_text);
        if (j.is_object() && j.contains("software") && j.contains("config")) j = j.at("config");
        if (j.contains("simulation")) sim_json = j.at("simulation");
        if (!seed && j.contains("seed")) throw ConfigError("put the seed under --seed");
      }
      const auto cfg = sim_from_json(sim_json, s);
      auto [panel, truth] = simulate_panel(cfg);
      fs::create_directories(out);
      write_csv_file((out / "panel.csv").string(), panel);
      {
        auto o = open_out(out / "truth.json");
        o << truth_to_json(truth).dump(2) << '\n';
      }
      {
        auto o = open_out(out / "latent.csv");
        o << "date";
        for (const auto& n : cfg.site_names) o << ',' << n;
        o << '\n';
        const auto d = cfg.site_names.size();
        for (std::size_t t = 0; t < cfg.n_days; ++t) {
          o << format_iso_date(cfg.start + std::chrono::days{static_cast<long>(t)});
          for (std::size_t j = 0; j < d; ++j) o << ',' << format_double(truth.latent[t * d + j]);
          o << '\n';
        }
      }
      json eff{{"simulation", sim_json}};
      write_manifest(out, "simulate", eff.dump(), {s}, {"panel.csv", "truth.json", "latent.csv"});
      return 0;
    }
    if (summ->parsed()) {
      const auto post = read_posterior_csv(out / "posterior.csv");
      auto o = open_out(out / "summary.csv");
      o << "scalar,mean,sd,q05,q50,q95\n";
      for (std::size_t c = 2; c < post.names.size(); ++c) {
        const auto& col = post.columns[c];
        const auto b = summarize_band(col);
        double var = 0.0;
        for (double x : col) var += (x - b.mean) * (x - b.mean);
        const double sd = col.size() > 1 ? std::sqrt(var / static_cast<double>(col.size() - 1)) : 0.0;
        o << post.names[c] << ',' << format_double(b.mean) << ',' << format_double(sd) << ',' << format_double(b.q05)
          << ',' << format_double(sample_quantile(col, 0.5)) << ',' << format_double(b.q95) << '\n';
      }
      o.close();
      write_manifest(out, "summarize", "", {}, {"summary.csv"});
      return 0;
    }

    RunConfig cfg = RunConfig::from_file(config_path);
    {
      auto j = json::parse(cfg.json);
      if (seed) {
        cfg.mcmc.seed = *seed;
        j["mcmc"]["seed"] = *seed;
      }
      if (recent_only) cfg.recent_only = j["recent_only"] = true;
      if (regional) cfg.regional = cfg.mcmc.regional = j["regional"] = true;
      cfg.json = j.dump();
    }

    if (dec->parsed()) {
      const auto data = prepare_data(cfg);
      fs::create_directories(out);
      {
        auto o = open_out(out / "clusters.csv");
        write_clusters_csv(o, data.summary);
      }
      {
        auto o = open_out(out / "blocks.csv");
        write_blocks_csv(o, data.summary);
      }
      json s;
      s["n_days"] = data.summary.n_days;
      s["clusters"] = data.summary.clusters.size();
      s["cluster_days"] = data.summary.cluster_days;
      s["blocks"] = data.summary.blocks.size();
      s["block_days"] = data.summary.block_days();
      s["below_days"] = data.summary.below_days;
      s["missing_days"] = data.summary.missing_days;
      s["mean_cluster_size"] = data.summary.mean_cluster_size;
      s["zetas"] = data.rates.zetas;
      s["frechet_thresholds"] = data.rates.frechet_thresholds;
      {
        auto o = open_out(out / "summary.json");
        o << s.dump(2) << '\n';
      }
      write_manifest(out, "decluster", cfg.json, {}, {"clusters.csv", "blocks.csv", "summary.json"});
      return 0;
    }
    if (fit->parsed()) {
      if (grid) {
        const auto res = run_experiment_grid(cfg, out);
        for (const auto& [v, msg] : res.errors) std::cerr << "variant " << v << " failed: " << msg << '\n';
        return res.errors.empty() ? 0 : 3;
      }
      fit_to_directory(cfg, out);
      return 0;
    }

    const auto data = prepare_data(cfg);
    const auto d = data.panel.n_sites();
    const auto& sites = data.summary.site_names;
    fs::create_directories(out);
    // with a posterior.csv in --out the bands come from its draws, otherwise theta is a plug-in
    const bool from_posterior = (rl->parsed() || chi->parsed()) && fs::exists(out / "posterior.csv");
    if (rl->parsed()) {
      std::vector<MarginalParams> draws;
      if (from_posterior) {
        const auto post = read_posterior_csv(out / "posterior.csv");
        for (std::size_t r = 0; r < post.n_rows(); ++r) {
          MarginalParams m;
          for (const auto& s : sites) {
            m.log_scales.push_back(std::log(post.value("sigma_" + s, r)));
            m.shapes.push_back(post.value("xi_" + s, r));
          }
          m.regional = cfg.regional;
          draws.push_back(std::move(m));
        }
      } else {
        draws.push_back(theta_from_config(read_text(config_path), d).margins);
      }
      auto o = open_out(out / "return_levels.csv");
      o << "site,T_years,posterior_mean,q05,q95\n";
      for (std::size_t j = 0; j < d; ++j)
        for (double T : cfg.products.periods) {
          if (1.0 / (T * cfg.products.days_per_year) > data.rates.zetas[j]) continue;
          std::vector<double> levels;
          for (const auto& m : draws)
            levels.push_back(return_level(T, j, m, data.rates, cfg.thresholds.thresholds, cfg.products.days_per_year));
          o << sites[j] << ',' << format_double(T) << ',';
          write_band_row(o, summarize_band(levels));
        }
      o.close();
      write_manifest(out, "return-levels", cfg.json, {}, {"return_levels.csv"});
      return 0;
    }
    if (chi->parsed()) {
      std::optional<PosteriorColumns> post;
      std::optional<DMParams> psi;
      if (from_posterior)
        post = read_posterior_csv(out / "posterior.csv");
      else
        psi = theta_from_config(read_text(config_path), d).mixture;
      auto o = open_out(out / "chi.csv");
      o << "pair,posterior_mean,q05,q95\n";
      auto jo = open_out(out / "joint_return_periods.csv");
      jo << "pair,T_years,joint_T_years,independent_joint_T_years\n";
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) {
          const auto pair = sites[a] + "_" + sites[b];
          const auto band = post ? summarize_band(post->column("chi_" + pair))
                                 : summarize_band(std::vector<double>{chi_coefficient(a, b, *psi)});
          o << pair << ',';
          write_band_row(o, band);
          for (double T : cfg.products.periods)
            jo << pair << ',' << format_double(T) << ',' << format_double(joint_return_period(T, band.mean)) << ','
               << format_double(independent_joint_return_period(T, data.summary.mean_cluster_size)) << '\n';
        }
      o.close();
      jo.close();
      write_manifest(out, "chi", cfg.json, {}, {"chi.csv", "joint_return_periods.csv"});
      return 0;
    }
    const auto theta = theta_from_config(read_text(config_path), d);
    if (ll->parsed()) {
      const CensoredModel model(data.summary, data.rates);
      const auto aug = model.initial_augmentation(model.margins(theta.margins));
      const auto t = total_log_likelihood(model, aug, theta.margins, theta.mixture, cfg.mcmc.region);
      json j;
      json ct = json::array();
      for (double v : t.cluster_terms) ct.push_back(num(v));
      json bt = json::array();
      for (double v : t.void_blocks) bt.push_back(num(v));
      j["cluster_terms"] = ct;
      j["void_below"] = num(t.void_below);
      j["void_blocks"] = bt;
      j["total"] = num(t.total);
      j["augmentation"] = "interval midpoints";
      {
        auto o = open_out(out / "loglik.json");
        o << j.dump(2) << '\n';
      }
      std::cout << j.dump(2) << '\n';
      write_manifest(out, "loglik", cfg.json, {}, {"loglik.json"});
      return 0;
    }
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
  return 0;
}

}  // namespace dmpot
