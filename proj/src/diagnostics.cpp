#include "dmpot/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dmpot/error.hpp"

namespace dmpot {

namespace {

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sample_var(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const auto m = chains.size();
  if (m < 2) throw std::invalid_argument("Gelman-Rubin needs at least two chains");
  const auto n = chains.front().size();
  if (n < 10) throw std::invalid_argument("Gelman-Rubin needs chains of length >= 10");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("Gelman-Rubin needs chains of equal length");
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(chains[j]);
    vars[j] = sample_var(chains[j]);
  }
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  const double nd = static_cast<double>(n);
  b *= nd / static_cast<double>(m - 1);
  const double w = mean_of(vars);
  if (!(w > 0.0)) throw NumericalError("Gelman-Rubin undefined: zero within-chain variance");
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(var_plus / w);
}

double spectrum0_ar(std::span<const double> x) {
  const auto n = x.size();
  if (n < 3) throw std::invalid_argument("spectrum at zero needs at least three values");
  const double mu = mean_of(x);
  const auto order_max =
      std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
  std::vector<double> r(order_max + 1, 0.0);
  for (std::size_t lag = 0; lag <= order_max; ++lag) {
    double s = 0.0;
    for (std::size_t t = lag; t < n; ++t) s += (x[t] - mu) * (x[t - lag] - mu);
    r[lag] = s / static_cast<double>(n);
  }
  if (!(r[0] > 0.0)) return 0.0;
  // Levinson-Durbin recursion, keeping the coefficients of every order
  std::vector<std::vector<double>> phi(order_max + 1);
  std::vector<double> innov(order_max + 1);
  innov[0] = r[0];
  for (std::size_t k = 1; k <= order_max; ++k) {
    double num = r[k];
    for (std::size_t j = 1; j < k; ++j) num -= phi[k - 1][j - 1] * r[k - j];
    const double a = num / innov[k - 1];
    phi[k].resize(k);
    for (std::size_t j = 1; j < k; ++j) phi[k][j - 1] = phi[k - 1][j - 1] - a * phi[k - 1][k - j - 1];
    phi[k][k - 1] = a;
    innov[k] = innov[k - 1] * (1.0 - a * a);
    if (!(innov[k] > 0.0)) {
      innov.resize(k);
      phi.resize(k);
      break;
    }
  }
  std::size_t best = 0;
  double best_aic = kInf;
  for (std::size_t k = 0; k < innov.size(); ++k) {
    const double aic = static_cast<double>(n) * std::log(innov[k]) + 2.0 * static_cast<double>(k);
    if (aic < best_aic) {
      best_aic = aic;
      best = k;
    }
  }
  const double var_pred = innov[best] * static_cast<double>(n) / static_cast<double>(n - (best + 1));
  double denom = 1.0;
  for (std::size_t j = 0; j < best; ++j) denom -= phi[best][j];
  return var_pred / (denom * denom);
}

double pcramer(double q) {
  if (!(q > 0.0)) return 0.0;
  double out = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double kd = k;
    const double u = (4.0 * kd + 1.0) * (4.0 * kd + 1.0) / (16.0 * q);
    if (u > 700.0) break;
    const double log_z = std::lgamma(kd + 0.5) - std::lgamma(kd + 1.0) + 0.5 * std::log(4.0 * kd + 1.0) -
                         1.5 * std::log(M_PI) - 0.5 * std::log(q);
    const double term = std::exp(log_z - u) * boost::math::cyl_bessel_k(0.25, u);
    out += term;
    if (term < 1e-14 * out) break;
  }
  return std::clamp(out, 0.0, 1.0);
}

StationarityResult heidelberger_welch(std::span<const double> draws, double alpha) {
  const auto n = draws.size();
  if (n < 100) throw std::invalid_argument("Heidelberger-Welch needs at least 100 draws");
  const double s0 = spectrum0_ar(draws.subspan(n / 2));
  StationarityResult res;
  const std::size_t step = n / 10;
  for (std::size_t start = 0; start <= n / 2; start += step) {
    const auto y = draws.subspan(start);
    const auto len = y.size();
    const double ybar = mean_of(y);
    double cum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      cum += y[t] - ybar;
      sum_sq += cum * cum;
    }
    const double ld = static_cast<double>(len);
    const double stat = s0 > 0.0 ? sum_sq / (ld * s0) / ld : kInf;
    const double p = std::isfinite(stat) ? pcramer(stat) : 1.0;
    res.statistic = stat;
    res.p_value = 1.0 - p;
    res.start = start;
    if (p < 1.0 - alpha) {
      res.passed = true;
      return res;
    }
  }
  res.passed = false;
  return res;
}

double effective_sample_size(std::span<const double> x) {
  const double s0 = spectrum0_ar(x);
  if (!(s0 > 0.0)) return 0.0;
  return static_cast<double>(x.size()) * sample_var(x) / s0;
}

const ScalarDiagnostics& DiagnosticsReport::at(const std::string& name) const {
  for (const auto& s : scalars)
    if (s.name == name) return s;
  throw std::out_of_range("no diagnostics for '" + name + "'");
}

DiagnosticsReport diagnose(const std::vector<PosteriorSample>& chains) {
  DiagnosticsReport rep;
  if (chains.empty()) return rep;
  const auto& names = chains.front().names;
  std::vector<bool> chain_ok(chains.size(), true);
  for (const auto& name : names) {
    if (name == "log_lik") continue;
    ScalarDiagnostics sd;
    sd.name = name;
    std::vector<std::vector<double>> cols;
    for (const auto& c : chains) cols.push_back(c.column(name));
    try {
      sd.rhat = gelman_rubin(cols);
    } catch (const std::exception& e) {
      sd.rhat = std::nan("");
      sd.rhat_note = e.what();
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& col = cols[c];
      bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
      if (col.size() >= 100 && !constant) {
        const auto hw = heidelberger_welch(col);
        sd.stationary.push_back(hw.passed);
        sd.start.push_back(hw.start);
        sd.ess += effective_sample_size(col);
      } else {
        sd.stationary.push_back(constant);
        sd.start.push_back(0);
      }
      if (!sd.stationary.back()) chain_ok[c] = false;
    }
    rep.scalars.push_back(std::move(sd));
  }
  for (std::size_t c = 0; c < chains.size(); ++c)
    if (chain_ok[c]) rep.chains_passing.push_back(c);
  return rep;
}

double lrt_regional_shape(double loglik_regional, double loglik_local, std::size_t n_sites) {
  if (n_sites < 2) throw std::invalid_argument("regional test needs at least two sites");
  const double delta = loglik_local - loglik_regional;
  if (delta < 0.0) throw NumericalError("local fit has lower log-likelihood than the regional fit");
  if (delta == 0.0) return 1.0;
  const boost::math::chi_squared dist(static_cast<double>(n_sites - 1));
  return boost::math::cdf(boost::math::complement(dist, 2.0 * delta));
}

}  // namespace dmpot
