// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance NAME...    run the named criteria
//   acceptance --list     print the criterion names

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "../support/decluster_fixtures.hpp"
#include "../support/dm_oracles.hpp"
#include "../support/likelihood_oracle.hpp"
#include "../support/margin_checks.hpp"
#include "../support/stat_tests.hpp"
#include "../support/toy_fit.hpp"
#include "dmpot/diagnostics.hpp"
#include "dmpot/mcmc.hpp"
#include "dmpot/products.hpp"

using namespace dmpot;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double x, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

Outcome joint_return_period_arithmetic() {
  const double dependent = joint_return_period(10.0, 0.645);
  const double independent = independent_joint_return_period(10.0, 1.248, 365.0);
  const bool a = std::abs(dependent - 15.5) <= 0.05;
  const bool b = std::abs(independent - 29247.8) <= 0.1;
  return {a && b, "10/0.645 = " + fmt(dependent) + " (target 15.5 +- 0.05); 10^2 * 365 / 1.248 = " +
                      fmt(independent, 9) + " (target 29247.8 +- 0.1)"};
}

Outcome chi_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(2, 4), comps(1, 3);
  double worst_excess = -kInf;
  int failures = 0;
  std::string worst;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = dim(rng);
    const auto psi = dm_oracles::random_params(rng, d, comps(rng));
    std::uniform_int_distribution<std::size_t> site(0, d - 1);
    const std::size_t i = site(rng);
    std::size_t j = site(rng);
    while (j == i) j = site(rng);
    const double lib = chi_coefficient(i, j, psi);
    const auto mc = dm_oracles::chi_exceedance_mc(psi, i, j, 10'000'000, 1000 + t);
    const double tol = std::max(0.01, 3.0 * mc.se);
    const double err = std::abs(lib - mc.mean);
    if (err > tol) ++failures;
    if (err - tol > worst_excess) {
      worst_excess = err - tol;
      worst = "case " + std::to_string(t) + " d=" + std::to_string(d) + " chi=" + fmt(lib) + " mc=" + fmt(mc.mean) +
              " tol=" + fmt(tol, 3);
    }
  }
  return {failures == 0, std::to_string(50 - failures) + "/50 within max(0.01, 3 se); closest: " + worst};
}

Outcome exponent_measure_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> dim(2, 4), comps(1, 3);
  std::uniform_real_distribution<double> level(1.0, 1000.0), coin(0.0, 1.0);
  int failures = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = dim(rng);
    const auto psi = dm_oracles::random_params(rng, d, comps(rng));
    std::vector<double> u(d);
    for (auto& x : u) x = coin(rng) < 0.15 ? kInf : level(rng);
    if (std::all_of(u.begin(), u.end(), [](double x) { return x == kInf; })) u[0] = level(rng);
    const auto mc = dm_oracles::lambda_mc(psi, u, 2'000'000, 500 + t);
    for (const auto method : {RegionMethod::Auto, RegionMethod::Quadrature}) {
      const double lib = exponent_measure_region(u, psi, RegionOptions{method}).value;
      const double rel = std::abs(lib - mc.mean) / mc.mean;
      worst = std::max(worst, rel);
      if (rel > 1e-3) ++failures;
    }
  }
  double fixture = 0.0;
  for (double u : {1.0, 475.7, 1e4}) {
    const std::vector<double> uu{u, u};
    fixture = std::max(fixture, std::abs(exponent_measure_region(uu, DMParams::barycentric(2, 2.0)).value * u / 1.5 - 1));
    fixture = std::max(fixture, std::abs(exponent_measure_region(uu, DMParams::barycentric(2, 1e16)).value * u - 1));
  }
  return {failures == 0 && fixture < 1e-6, "worst relative gap to Monte Carlo " + fmt(worst, 3) +
                                               " over 50 cases x 2 methods (limit 1e-3); analytic fixtures " +
                                               fmt(fixture, 3) + " (limit 1e-6)"};
}

Outcome censored_likelihood_oracle() {
  double worst = 0.0;
  std::string detail;
  for (const auto& c : likelihood_oracle::cases()) {
    const auto r = likelihood_oracle::run(c, 400'000, 91);
    worst = std::max(worst, r.relative_error());
    detail += c.name + " " + fmt(r.relative_error(), 3) + "; ";
  }
  return {worst < 0.01, detail + "limit 0.01"};
}

Outcome prior_reproduction() {
  const auto toy = toy_fit::make(toy_fit::two_site_config(7));
  const auto prior = default_priors(*toy.model);
  McmcConfig cfg;
  cfg.chains = 4;
  cfg.thin = 20;
  cfg.burn_in = 5000;
  cfg.iterations = cfg.burn_in + 25'000 * cfg.thin;
  cfg.seed = 31;
  cfg.likelihood_enabled = false;
  const auto chains = run_chains(*toy.model, prior, cfg, toy.config.site_names);

  std::vector<double> ls0, ls1, xi0, xi1, nu, k;
  for (const auto& c : chains) {
    for (double s : c.column("sigma_north")) ls0.push_back(std::log(s));
    for (double s : c.column("sigma_south")) ls1.push_back(std::log(s));
    for (double x : c.column("xi_north")) xi0.push_back(x);
    for (double x : c.column("xi_south")) xi1.push_back(x);
    for (double x : c.column("k")) k.push_back(x);
    for (const auto& m : c.mixtures) nu.push_back(m.components[0].shape);
  }
  const boost::math::normal n0(prior.log_scale_means[0], prior.log_scale_sd);
  const boost::math::normal n1(prior.log_scale_means[1], prior.log_scale_sd);
  const boost::math::normal nx(prior.shape_mean, prior.shape_sd);
  const boost::math::gamma_distribution<> g(prior.nu_shape, 1.0 / prior.nu_rate);
  auto cdf_of = [](const auto& dist) { return [&dist](double x) { return boost::math::cdf(dist, x); }; };

  std::vector<std::pair<std::string, double>> p{
      {"log sigma_1", stat_tests::ks_test(ls0, cdf_of(n0))},
      {"log sigma_2", stat_tests::ks_test(ls1, cdf_of(n1))},
      {"xi_1", stat_tests::ks_test(xi0, cdf_of(nx))},
      {"xi_2", stat_tests::ks_test(xi1, cdf_of(nx))},
      {"nu", stat_tests::ks_test(nu, cdf_of(g))},
  };

  // truncated Poisson on 1..k_max, tail pooled until every expected count is at least 5
  std::vector<double> prob(prior.k_max + 1, 0.0);
  double norm = 0.0;
  for (std::size_t j = 1; j <= prior.k_max; ++j)
    norm += prob[j] = std::exp(static_cast<double>(j) * std::log(prior.k_rate) - std::lgamma(j + 1.0));
  std::vector<double> counts, expected;
  double tail_p = 0.0, tail_c = 0.0;
  const double total = static_cast<double>(k.size());
  for (std::size_t j = 1; j <= prior.k_max; ++j) {
    const double pj = prob[j] / norm;
    const double cj = static_cast<double>(std::count(k.begin(), k.end(), static_cast<double>(j)));
    if (pj * total >= 5.0 && tail_p == 0.0) {
      counts.push_back(cj);
      expected.push_back(pj);
    } else {
      tail_p += pj;
      tail_c += cj;
    }
  }
  counts.push_back(tail_c);
  expected.push_back(tail_p);
  p.emplace_back("k", stat_tests::chi_square_test(counts, expected));

  bool ok = true;
  std::string detail = std::to_string(ls0.size()) + " draws; p-values:";
  for (const auto& [name, pv] : p) {
    ok = ok && pv > 0.01;
    detail += " " + name + "=" + fmt(pv, 3);
  }
  return {ok, detail};
}

Outcome simulation_recovery() {
  const std::size_t reps = 20;
  int cover_xi = 0, cover_s1 = 0, cover_s2 = 0, cover_chi = 0, rhat_ok = 0;
  std::size_t min_clusters = SIZE_MAX, max_clusters = 0;
  double worst_rhat = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto cfg = toy_fit::two_site_config(100 + r, 17500);
    const auto toy = toy_fit::make(cfg);
    min_clusters = std::min(min_clusters, toy.summary.clusters.size());
    max_clusters = std::max(max_clusters, toy.summary.clusters.size());
    McmcConfig mc = McmcConfig::with_defaults(50'000, 2, 7000 + r);
    mc.regional = true;
    const auto chains = run_chains(*toy.model, default_priors(*toy.model), mc, cfg.site_names);

    auto covers = [&](const std::string& name, double truth) {
      std::vector<double> all;
      for (const auto& c : chains) {
        const auto col = c.column(name);
        all.insert(all.end(), col.begin(), col.end());
      }
      return sample_quantile(all, 0.05) <= truth && truth <= sample_quantile(all, 0.95);
    };
    cover_xi += covers("xi_north", cfg.margins.shapes[0]);
    cover_s1 += covers("sigma_north", std::exp(cfg.margins.log_scales[0]));
    cover_s2 += covers("sigma_south", std::exp(cfg.margins.log_scales[1]));
    cover_chi += covers("chi_north_south", toy_fit::true_chi(cfg));

    double rep_rhat = 0.0;
    for (const char* name : {"sigma_north", "sigma_south", "xi_north"})
      rep_rhat = std::max(rep_rhat, gelman_rubin({chains[0].column(name), chains[1].column(name)}));
    worst_rhat = std::max(worst_rhat, rep_rhat);
    rhat_ok += rep_rhat < 1.1;
  }
  const int need = 15;
  const bool ok = cover_xi >= need && cover_s1 >= need && cover_s2 >= need && cover_chi >= need &&
                  rhat_ok == static_cast<int>(reps);
  return {ok, "90% coverage xi " + std::to_string(cover_xi) + "/20, sigma_1 " + std::to_string(cover_s1) +
                  "/20, sigma_2 " + std::to_string(cover_s2) + "/20, chi_12 " + std::to_string(cover_chi) +
                  "/20; R-hat < 1.1 in " + std::to_string(rhat_ok) + "/20 (worst " + fmt(worst_rhat, 4) +
                  "); clusters per replicate " + std::to_string(min_clusters) + ".." + std::to_string(max_clusters)};
}

Outcome declustering_fixtures() {
  int passed = 0;
  std::string first_failure;
  const auto all = fixtures::decluster_fixtures();
  for (const auto& fx : all) {
    const auto why = fixtures::check_fixture(fx);
    if (why.empty())
      ++passed;
    else if (first_failure.empty())
      first_failure = "; " + fx.name + ": " + why;
  }
  return {passed == static_cast<int>(all.size()),
          std::to_string(passed) + "/" + std::to_string(all.size()) + " hand-traced panels" + first_failure};
}

Outcome numerical_margins() {
  const double branch = margin_checks::branch_continuity();
  const double jac = margin_checks::jacobian_vs_finite_difference(20000, 3);
  const double trip = margin_checks::return_level_round_trip(20000, 4);
  return {branch < 1e-8 && jac < 1e-6 && trip < 1e-9, "shape -> 0 continuity " + fmt(branch, 3) +
                                                          " (limit 1e-8); Jacobian vs finite difference " +
                                                          fmt(jac, 3) + " (limit 1e-6); return-level round trip " +
                                                          fmt(trip, 3) + " (limit 1e-9)"};
}

Outcome constraint_suite() {
  const auto toy = toy_fit::make(toy_fit::two_site_config(5, 3000, 0.01, 600));
  McmcConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 1'000'000;
  cfg.burn_in = 1000;
  cfg.thin = 1000;
  cfg.seed = 17;
  std::mutex mu;
  std::size_t seen = 0;
  double worst_defect = 0.0, worst_sum = 0.0;
  cfg.on_accepted_mixture = [&](const DMParams& psi) {
    double s = 0.0;
    for (double p : psi.weights) s += p;
    const double defect = psi.moment_defect();
    std::lock_guard lock(mu);
    ++seen;
    worst_defect = std::max(worst_defect, defect);
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  };
  (void)run_chains(*toy.model, default_priors(*toy.model), cfg, toy.config.site_names);
  return {seen >= 1'000'000 && worst_defect < 1e-10 && worst_sum < 1e-12,
          std::to_string(seen) + " accepted states; worst moment defect " + fmt(worst_defect, 3) +
              " (limit 1e-10); worst weight-sum error " + fmt(worst_sum, 3) + " (limit 1e-12)"};
}

Outcome lrt() {
  const double p = lrt_regional_shape(-1000.0, -1000.0 + 2.565, 4);
  return {p >= 0.15 && p <= 0.17, "p = " + fmt(p, 5) + " for a log-likelihood gain of 2.565 with 4 sites"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"joint_return_period", joint_return_period_arithmetic},
    {"chi_oracle", chi_oracle},
    {"exponent_measure_oracle", exponent_measure_oracle},
    {"censored_likelihood_oracle", censored_likelihood_oracle},
    {"prior_reproduction", prior_reproduction},
    {"simulation_recovery", simulation_recovery},
    {"declustering_fixtures", declustering_fixtures},
    {"numerical_margins", numerical_margins},
    {"constraint_suite", constraint_suite},
    {"lrt_regional_shape", lrt},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.size() == 1 && wanted[0] == "--list") {
    for (const auto& [name, f] : kCriteria) std::cout << name << '\n';
    return 0;
  }
  if (wanted.empty())
    for (const auto& [name, f] : kCriteria) wanted.push_back(name);
  int failed = 0;
  for (const auto& w : wanted) {
    const auto it = std::find_if(kCriteria.begin(), kCriteria.end(), [&](const auto& c) { return c.first == w; });
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << w << '\n';
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << w << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
