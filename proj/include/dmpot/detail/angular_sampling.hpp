#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

namespace dmpot {

namespace detail {

/// log of a Gamma(alpha, 1) variate; alpha < 1 goes through G(alpha+1) U^(1/alpha)
/// so the result never underflows to log(0).
template <class Rng>
double log_gamma_variate(double alpha, Rng& rng) {
  if (alpha >= 1.0) {
    std::gamma_distribution<double> g(alpha, 1.0);
    return std::log(g(rng));
  }
  std::gamma_distribution<double> g(alpha + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double uu;
  do uu = unif(rng);
  while (uu <= 0.0);
  return std::log(g(rng)) + std::log(uu) / alpha;
}

/// Dirichlet(shape * center) into w.
template <class Rng>
void sample_dirichlet(std::span<const double> center, double shape, Rng& rng, std::span<double> w) {
  double mx = -INFINITY;
  for (std::size_t j = 0; j < center.size(); ++j) {
    w[j] = log_gamma_variate(shape * center[j], rng);
    mx = std::max(mx, w[j]);
  }
  double sum = 0.0;
  for (auto& x : w) sum += (x = std::exp(x - mx));
  for (auto& x : w) x /= sum;
}

}  // namespace detail

template <class Rng>
void sample_dm_point(const DMParams& psi, Rng& rng, std::span<double> w) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double pick = unif(rng);
  std::size_t m = 0;
  for (; m + 1 < psi.k(); ++m) {
    pick -= psi.weights[m];
    if (pick < 0.0) break;
  }
  const auto& c = psi.components[m];
  detail::sample_dirichlet(c.center, c.shape, rng, w);
}

}  // namespace dmpot
