#pragma once

// Monte Carlo oracles for the Dirichlet mixture angular measure. Sampling here uses
// std::gamma_distribution directly and never calls the library sampler.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dmpot/angular.hpp"

namespace dm_oracles {

struct Estimate {
  double mean;
  double se;
};

class DirichletMixtureSampler {
 public:
  explicit DirichletMixtureSampler(const dmpot::DMParams& psi) : psi_(psi), pick_(psi.weights.begin(), psi.weights.end()) {
    for (const auto& c : psi.components) {
      std::vector<std::gamma_distribution<double>> g;
      for (double mu : c.center) g.emplace_back(c.shape * mu, 1.0);
      gammas_.push_back(std::move(g));
    }
  }

  template <class Rng>
  void draw(Rng& rng, std::vector<double>& w) {
    auto& g = gammas_[pick_(rng)];
    w.resize(g.size());
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) s += (w[j] = g[j](rng));
    for (auto& x : w) x /= s;
  }

 private:
  dmpot::DMParams psi_;
  std::discrete_distribution<std::size_t> pick_;
  std::vector<std::vector<std::gamma_distribution<double>>> gammas_;
};

/// Random mixture satisfying the moment constraint, built by rejection on the last center.
inline dmpot::DMParams random_params(std::mt19937_64& rng, std::size_t d, std::size_t k, double min_shape = 0.5,
                                     double max_shape = 60.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    dmpot::DMParams psi;
    std::vector<double> p(k);
    double ps = 0.0;
    for (auto& x : p) ps += (x = -std::log(u(rng)));
    for (auto& x : p) x /= ps;
    std::vector<double> rest(d, 1.0 / static_cast<double>(d));
    for (std::size_t m = 0; m + 1 < k; ++m) {
      std::vector<double> c(d);
      double cs = 0.0;
      for (auto& x : c) cs += (x = -std::log(u(rng)));
      for (auto& x : c) x /= cs;
      for (std::size_t j = 0; j < d; ++j) rest[j] -= p[m] * c[j];
      psi.components.push_back({c, 0.0});
    }
    std::vector<double> last(d);
    bool ok = true;
    for (std::size_t j = 0; j < d; ++j) {
      last[j] = rest[j] / p[k - 1];
      ok = ok && last[j] > 0.02;
    }
    if (!ok) continue;
    psi.components.push_back({last, 0.0});
    for (auto& c : psi.components) c.shape = min_shape * std::pow(max_shape / min_shape, u(rng));
    psi.weights = p;
    return psi;
  }
}

/// lambda(A_u) = d E_H[max_j W_j / u_j], with sum_j W_j / u_j (mean sum_j 1/(d u_j)) as control variate.
inline Estimate lambda_mc(const dmpot::DMParams& psi, const std::vector<double>& u, std::size_t n,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DirichletMixtureSampler s(psi);
  const std::size_t d = u.size();
  double known = 0.0;
  for (double uj : u)
    if (std::isfinite(uj)) known += 1.0 / (static_cast<double>(d) * uj);
  double sy = 0, sc = 0, syy = 0, scc = 0, syc = 0;
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    s.draw(rng, w);
    double y = 0.0, c = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(u[j])) continue;
      y = std::max(y, w[j] / u[j]);
      c += w[j] / u[j];
    }
    sy += y;
    sc += c;
    syy += y * y;
    scc += c * c;
    syc += y * c;
  }
  const double nn = static_cast<double>(n);
  const double my = sy / nn, mc = sc / nn;
  const double vyy = syy / nn - my * my, vcc = scc / nn - mc * mc, vyc = syc / nn - my * mc;
  const double beta = vcc > 0 ? vyc / vcc : 0.0;
  const double est = my - beta * (mc - known);
  const double var = std::max(vyy - 2 * beta * vyc + beta * beta * vcc, 0.0);
  const double dd = static_cast<double>(d);
  return {dd * est, dd * std::sqrt(var / nn)};
}

/// chi_ij = d E_H[min(W_i, W_j)].
inline Estimate chi_mc(const dmpot::DMParams& psi, std::size_t i, std::size_t j, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DirichletMixtureSampler s(psi);
  const double d = static_cast<double>(psi.dim());
  double sum = 0, sum2 = 0;
  std::vector<double> w;
  for (std::size_t t = 0; t < n; ++t) {
    s.draw(rng, w);
    const double y = d * std::min(w[i], w[j]);
    sum += y;
    sum2 += y * y;
  }
  const double nn = static_cast<double>(n);
  const double m = sum / nn;
  return {m, std::sqrt(std::max(sum2 / nn - m * m, 0.0) / nn)};
}

/// Conditional exceedance frequency P(X_i > x | X_j > x) over points of the limiting process
/// with radius R ~ Pareto(1) and angle W ~ H, at the level x = d where site j is exceeded
/// when R W_j > 1.
inline Estimate chi_exceedance_mc(const dmpot::DMParams& psi, std::size_t i, std::size_t j, std::size_t n,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DirichletMixtureSampler s(psi);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t at_j = 0, both = 0;
  std::vector<double> w;
  for (std::size_t t = 0; t < n; ++t) {
    s.draw(rng, w);
    const double r = 1.0 / (1.0 - u(rng));
    if (r * w[j] > 1.0) {
      ++at_j;
      both += r * w[i] > 1.0;
    }
  }
  const double p = static_cast<double>(both) / static_cast<double>(at_j);
  return {p, std::sqrt(p * (1 - p) / static_cast<double>(at_j))};
}

}  // namespace dm_oracles
