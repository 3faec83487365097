#include "dmpot/angular.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dmpot/error.hpp"

namespace dmpot {

namespace {

double log_sum_exp(std::span<const double> v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == -kInf || mx == kInf) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

double DMParams::moment_defect() const {
  const auto d = dim();
  double worst = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t m = 0; m < k(); ++m) s += weights[m] * components[m].center[j];
    worst = std::max(worst, std::abs(s - 1.0 / static_cast<double>(d)));
  }
  return worst;
}

void DMParams::validate(double moment_tol) const {
  if (k() == 0 || components.size() != k()) throw NumericalError("mixture needs k >= 1 matching components");
  const auto d = dim();
  if (d < 1) throw NumericalError("mixture dimension must be >= 1");
  double wsum = 0.0;
  for (double p : weights) {
    if (!(p > 0.0) || !std::isfinite(p)) throw NumericalError("mixture weights must be positive");
    wsum += p;
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw NumericalError("mixture weights do not sum to one");
  for (const auto& c : components) {
    if (c.center.size() != d) throw NumericalError("component center has wrong dimension");
    if (!(c.shape > 0.0) || !std::isfinite(c.shape)) throw NumericalError("component shape must be positive");
    double s = 0.0;
    for (double mu : c.center) {
      if (!(mu > 0.0)) throw NumericalError("component center outside the open simplex");
      s += mu;
    }
    if (std::abs(s - 1.0) > 1e-12) throw NumericalError("component center does not sum to one");
  }
  if (moment_defect() > moment_tol) throw NumericalError("moment constraint violated");
}

DMParams DMParams::barycentric(std::size_t d, double shape) {
  return DMParams{{1.0}, {DirichletComponent{std::vector<double>(d, 1.0 / static_cast<double>(d)), shape}}};
}

double log_dirichlet_density(std::span<const double> w, const DirichletComponent& c) {
  double out = std::lgamma(c.shape);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double a = c.shape * c.center[j];
    out -= std::lgamma(a);
    if (w[j] > 0.0) {
      out += (a - 1.0) * std::log(w[j]);
    } else if (a < 1.0) {
      return kInf;
    } else if (a > 1.0) {
      return -kInf;
    }
  }
  return out;
}

double dirichlet_density(std::span<const double> w, const DirichletComponent& c) {
  return std::exp(log_dirichlet_density(w, c));
}

double log_dm_density(std::span<const double> w, const DMParams& psi) {
  std::vector<double> terms(psi.k());
  for (std::size_t m = 0; m < psi.k(); ++m)
    terms[m] = std::log(psi.weights[m]) + log_dirichlet_density(w, psi.components[m]);
  return log_sum_exp(terms);
}

double dm_density(std::span<const double> w, const DMParams& psi) { return std::exp(log_dm_density(w, psi)); }

MixtureDensity::MixtureDensity(const DMParams& psi)
    : dim_(psi.dim()), log_const_(psi.k()), alpha_(psi.k() * psi.dim()), shape_(psi.k()) {
  for (std::size_t m = 0; m < psi.k(); ++m) {
    const auto& c = psi.components[m];
    double lc = std::log(psi.weights[m]) + std::lgamma(c.shape);
    for (std::size_t j = 0; j < dim_; ++j) {
      const double a = c.shape * c.center[j];
      alpha_[m * dim_ + j] = a;
      lc -= std::lgamma(a);
    }
    log_const_[m] = lc;
    shape_[m] = c.shape;
  }
}

double MixtureDensity::log_density_from_logs(std::span<const double> log_w) const {
  const auto k = log_const_.size();
  double terms[64];
  std::vector<double> heap;
  double* t = terms;
  if (k > 64) {
    heap.resize(k);
    t = heap.data();
  }
  double mx = -kInf;
  for (std::size_t m = 0; m < k; ++m) {
    double v = log_const_[m];
    const double* a = alpha_.data() + m * dim_;
    for (std::size_t j = 0; j < dim_; ++j) v += (a[j] - 1.0) * log_w[j];
    t[m] = v;
    mx = std::max(mx, v);
  }
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t m = 0; m < k; ++m) s += std::exp(t[m] - mx);
  return mx + std::log(s);
}

double MixtureDensity::log_exponent_density(std::span<const double> x) const {
  double r = 0.0;
  for (double v : x) r += v;
  const double log_r = std::log(r);
  double log_w[32];
  std::vector<double> heap;
  double* lw = log_w;
  if (dim_ > 32) {
    heap.resize(dim_);
    lw = heap.data();
  }
  for (std::size_t j = 0; j < dim_; ++j) lw[j] = std::log(x[j]) - log_r;
  return std::log(static_cast<double>(dim_)) + log_density_from_logs({lw, dim_}) -
         static_cast<double>(dim_ + 1) * log_r;
}

std::optional<std::vector<double>> solve_last_center(std::span<const double> weights,
                                                     std::span<const std::vector<double>> free_centers,
                                                     std::size_t dim) {
  const auto k = weights.size();
  if (k == 0 || free_centers.size() + 1 != k) throw std::invalid_argument("solve_last_center: size mismatch");
  std::vector<double> mu(dim, 1.0 / static_cast<double>(dim));
  for (std::size_t m = 0; m + 1 < k; ++m)
    for (std::size_t j = 0; j < dim; ++j) mu[j] -= weights[m] * free_centers[m][j];
  const double pk = weights[k - 1];
  double sum = 0.0;
  for (auto& x : mu) {
    x /= pk;
    if (!(x > 0.0) || !std::isfinite(x)) return std::nullopt;
    sum += x;
  }
  // the linear solve sums to one up to rounding; renormalizing keeps the 1e-12 center invariant
  for (auto& x : mu) x /= sum;
  return mu;
}

bool resolve_last_center(DMParams& psi) {
  const auto k = psi.k();
  std::vector<std::vector<double>> free;
  free.reserve(k - 1);
  for (std::size_t m = 0; m + 1 < k; ++m) free.push_back(psi.components[m].center);
  auto mu = solve_last_center(psi.weights, free, psi.dim());
  if (!mu) return false;
  psi.components.back().center = std::move(*mu);
  return true;
}

std::vector<AngularPoint> sample_dm(const DMParams& psi, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AngularPoint> out(count);
  for (auto& pt : out) {
    pt.w.resize(psi.dim());
    sample_dm_point(psi, rng, pt.w);
  }
  return out;
}

double log_exponent_density(std::span<const double> x, const DMParams& psi) {
  return MixtureDensity(psi).log_exponent_density(x);
}

double exponent_density(std::span<const double> x, const DMParams& psi) {
  return std::exp(log_exponent_density(x, psi));
}

namespace {

/// E[max(B/ui, (1-B)/uj)] for B ~ Beta(a, b).
double beta_max_expectation(double a, double b, double ui, double uj) {
  const boost::math::policies::policy<boost::math::policies::promote_double<false>> pol;
  const double c = ui / (ui + uj);
  const double mean_b = a / (a + b);
  if (std::min(a, b) > 1e7) {
    // B is Gaussian to O(1/a) here: E max = E[(1-B)/uj] + E[X+] with X linear in B
    const double sd_b = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
    const double slope = 1.0 / ui + 1.0 / uj;
    const double mx = mean_b * slope - 1.0 / uj;
    const double sx = sd_b * slope;
    const double z = mx / sx;
    const double pos = mx * 0.5 * std::erfc(-z / std::sqrt(2.0)) + sx * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return (1.0 - mean_b) / uj + pos;
  }
  return mean_b * boost::math::ibetac(a + 1.0, b, c, pol) / ui + (1.0 - mean_b) * boost::math::ibeta(a, b + 1.0, c, pol) / uj;
}

RegionMeasure region_closed_form(std::span<const double> u, const DMParams& psi) {
  std::vector<std::size_t> finite;
  for (std::size_t j = 0; j < u.size(); ++j)
    if (u[j] < kInf) finite.push_back(j);
  if (finite.size() > 2) throw std::invalid_argument("closed form needs at most two finite thresholds");
  const double d = static_cast<double>(psi.dim());
  double total = 0.0;
  for (std::size_t m = 0; m < psi.k(); ++m) {
    const auto& c = psi.components[m];
    double e = 0.0;
    if (finite.size() == 1) {
      e = c.center[finite[0]] / u[finite[0]];
    } else if (finite.size() == 2) {
      const auto i = finite[0], j = finite[1];
      e = (c.center[i] + c.center[j]) *
          beta_max_expectation(c.shape * c.center[i], c.shape * c.center[j], u[i], u[j]);
    }
    total += psi.weights[m] * e;
  }
  return {d * total, 0.0, true};
}

/// E[max_j w_j / u_j] under Dirichlet(alpha), alpha = nu mu, as
///   int_0^inf 1 - prod_j P(alpha_j, nu tau u_j) dtau
/// (normalized Gamma representation; w is independent of the Gamma total).
using GammaPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

RegionMeasure dirichlet_max_quadrature(std::span<const double> alpha, double nu, std::span<const double> u,
                                       double rel_tol) {
  std::vector<std::size_t> idx;
  double scale = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j)
    if (u[j] < kInf) {
      idx.push_back(j);
      scale = std::max(scale, u[j]);
    }
  if (idx.empty()) return {};
  // the measure is homogeneous of degree -1, so integrate with bounds rescaled to at most 1
  std::vector<double> us(u.size());
  for (auto j : idx) us[j] = u[j] / scale;
  auto integrand = [&](double tau) {
    double log_prod = 0.0;
    for (auto j : idx) {
      const double x = nu * tau * us[j];
      const double p = boost::math::gamma_p(alpha[j], x, GammaPolicy{});
      if (p < 0.5) {
        if (p <= 0.0) return 1.0;
        log_prod += std::log(p);
      } else {
        log_prod += std::log1p(-boost::math::gamma_q(alpha[j], x, GammaPolicy{}));
      }
    }
    return -std::expm1(log_prod);
  };
  std::vector<double> br{0.0};
  for (auto j : idx) {
    const double b = alpha[j] / nu / us[j];
    const double spread = 6.0 / std::sqrt(alpha[j] + 1.0);
    br.push_back(b);
    br.push_back(b * (1.0 + spread));
    if (spread < 1.0) br.push_back(b * (1.0 - spread));
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  RegionMeasure out;
  for (std::size_t s = 0; s + 1 < br.size(); ++s) {
    double err = 0.0;
    out.value += GK::integrate(integrand, br[s], br[s + 1], 15, rel_tol, &err);
    out.error += err;
  }
  double err = 0.0;
  out.value += GK::integrate(integrand, br.back(), kInf, 15, rel_tol, &err);
  out.error += err;
  out.converged = out.error <= std::max(1e3 * rel_tol * std::abs(out.value), 1e-14);
  out.value /= scale;
  out.error /= scale;
  return out;
}

RegionMeasure region_quadrature(std::span<const double> u, const DMParams& psi, double rel_tol) {
  const double d = static_cast<double>(psi.dim());
  RegionMeasure out;
  std::vector<double> alpha(psi.dim());
  for (std::size_t m = 0; m < psi.k(); ++m) {
    const auto& c = psi.components[m];
    for (std::size_t j = 0; j < alpha.size(); ++j) alpha[j] = c.shape * c.center[j];
    const auto e = dirichlet_max_quadrature(alpha, c.shape, u, rel_tol);
    out.value += d * psi.weights[m] * e.value;
    out.error += d * psi.weights[m] * e.error;
    out.converged = out.converged && e.converged;
  }
  return out;
}

double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += static_cast<double>(i % base) * f;
    i /= base;
    f *= inv;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

RegionMeasure region_qmc(std::span<const double> u, const DMParams& psi, const RegionOptions& opt) {
  const auto d = psi.dim();
  if (d > std::size(kPrimes)) throw std::invalid_argument("QMC supports at most 32 dimensions");
  const std::size_t shifts = std::max<std::size_t>(2, opt.qmc_shifts);
  const std::size_t per = std::max<std::size_t>(1, opt.qmc_nodes / shifts);
  std::mt19937_64 rng(opt.qmc_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> estimates(shifts, 0.0);
  std::vector<double> shift(d), g(d);
  for (std::size_t s = 0; s < shifts; ++s) {
    for (auto& x : shift) x = unif(rng);
    double est = 0.0;
    for (std::size_t m = 0; m < psi.k(); ++m) {
      const auto& c = psi.components[m];
      double acc = 0.0;
      for (std::size_t i = 1; i <= per; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double q = radical_inverse(i, kPrimes[j]) + shift[j];
          q -= std::floor(q);
          q = std::clamp(q, 1e-300, 1.0 - 1e-16);
          g[j] = boost::math::gamma_p_inv(c.shape * c.center[j], q);
          total += g[j];
        }
        if (!(total > 0.0)) continue;
        double mx = 0.0;
        for (std::size_t j = 0; j < d; ++j)
          if (u[j] < kInf) mx = std::max(mx, g[j] / total / u[j]);
        acc += mx;
      }
      est += psi.weights[m] * acc / static_cast<double>(per);
    }
    estimates[s] = static_cast<double>(d) * est;
  }
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(shifts);
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= static_cast<double>(shifts - 1);
  const double se = std::sqrt(var / static_cast<double>(shifts));
  return {mean, se, se <= 1e-2 * std::abs(mean) || mean == 0.0};
}

}  // namespace

RegionMeasure exponent_measure_region(std::span<const double> u, const DMParams& psi, const RegionOptions& opt) {
  if (u.size() != psi.dim()) throw std::invalid_argument("threshold vector has wrong dimension");
  std::size_t n_finite = 0;
  for (double x : u) {
    if (!(x > 0.0)) throw std::domain_error("Frechet thresholds must be positive");
    n_finite += x < kInf;
  }
  if (n_finite == 0) return {};
  switch (opt.method) {
    case RegionMethod::Auto:
      return n_finite <= 2 ? region_closed_form(u, psi) : region_quadrature(u, psi, opt.rel_tol);
    case RegionMethod::ClosedForm:
      return region_closed_form(u, psi);
    case RegionMethod::Quadrature:
      return region_quadrature(u, psi, opt.rel_tol);
    case RegionMethod::QuasiMonteCarlo:
      return region_qmc(u, psi, opt);
  }
  return {};
}

DMParams pair_margin(const DMParams& psi, std::size_t i, std::size_t j) {
  if (i == j) throw std::invalid_argument("pair_margin needs two distinct sites");
  const double d = static_cast<double>(psi.dim());
  DMParams out;
  for (std::size_t m = 0; m < psi.k(); ++m) {
    const auto& c = psi.components[m];
    const double s = c.center[i] + c.center[j];
    out.weights.push_back(0.5 * d * psi.weights[m] * s);
    out.components.push_back({{c.center[i] / s, c.center[j] / s}, c.shape * s});
  }
  double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (auto& p : out.weights) p /= total;
  return out;
}

double chi_coefficient(std::size_t i, std::size_t j, const DMParams& psi, ChiMethod method) {
  if (i == j) throw std::invalid_argument("chi coefficient needs two distinct sites");
  if (i > j) std::swap(i, j);
  double v = 0.0;
  if (method == ChiMethod::ClosedForm) {
    const auto pm = pair_margin(psi, i, j);
    for (std::size_t m = 0; m < pm.k(); ++m) {
      const auto& c = pm.components[m];
      v += 2.0 * pm.weights[m] * beta_max_expectation(c.shape * c.center[0], c.shape * c.center[1], 1.0, 1.0);
    }
  } else {
    std::vector<double> u(psi.dim(), kInf);
    u[i] = u[j] = 1.0;
    v = region_quadrature(u, psi, 1e-12).value;
  }
  return std::clamp(2.0 - v, 0.0, 1.0);
}

double joint_return_period(double years, double chi) {
  if (!(years > 0.0)) throw std::domain_error("return period must be positive");
  if (!(chi >= 0.0 && chi <= 1.0)) throw std::domain_error("chi must lie in [0, 1]");
  if (chi == 0.0) return kInf;
  return years / chi;
}

double independent_joint_return_period(double years, double mean_cluster_size, double days_per_year) {
  if (!(years > 0.0) || !(mean_cluster_size >= 1.0)) throw std::domain_error("invalid period or cluster size");
  return years * years * days_per_year / mean_cluster_size;
}

double conditional_tail_frechet(std::size_t i, std::size_t j, double x_i, double u_j, const DMParams& psi) {
  if (i == j) throw std::invalid_argument("conditional tail needs two distinct sites");
  if (x_i == kInf) return 0.0;
  std::vector<double> u(psi.dim(), kInf);
  u[i] = x_i;
  u[j] = u_j;
  const double v = exponent_measure_region(u, psi).value;
  return std::clamp((1.0 / x_i + 1.0 / u_j - v) * u_j, 0.0, 1.0);
}

double conditional_tail(std::size_t i, std::size_t j, double y, const MarginalParams& m, const ExceedanceRates& r,
                        std::span<const double> thresholds, const DMParams& psi) {
  const double x_i = site_margin(i, m, r, thresholds).to_frechet(y);
  return conditional_tail_frechet(i, j, x_i, r.frechet_thresholds[j], psi);
}

}  // namespace dmpot
