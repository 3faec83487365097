#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dmpot/margins.hpp"

namespace dmpot {

/// Dirichlet distribution on the simplex with center of mass `center` and shape `shape`
/// (concentration parameters shape * center).
struct DirichletComponent {
  std::vector<double> center{};
  double shape{1.0};

  friend bool operator==(const DirichletComponent&, const DirichletComponent&) = default;
};

/// Dirichlet mixture angular measure. The last component's center is the one solved from
/// the moment constraint; the others are free.
struct DMParams {
  std::vector<double> weights{};
  std::vector<DirichletComponent> components{};

  [[nodiscard]] std::size_t k() const noexcept { return weights.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return components.empty() ? 0 : components.front().center.size(); }

  /// Max absolute deviation of sum_m p_m mu_m from the simplex barycenter.
  [[nodiscard]] double moment_defect() const;
  /// Throws NumericalError unless weights/centers/shapes are valid and the moment constraint
  /// holds to `moment_tol`.
  void validate(double moment_tol = 1e-10) const;

  /// Single component at the barycenter.
  [[nodiscard]] static DMParams barycentric(std::size_t d, double shape);

  friend bool operator==(const DMParams&, const DMParams&) = default;
};

[[nodiscard]] double log_dirichlet_density(std::span<const double> w, const DirichletComponent& c);
[[nodiscard]] double dirichlet_density(std::span<const double> w, const DirichletComponent& c);
[[nodiscard]] double log_dm_density(std::span<const double> w, const DMParams& psi);
[[nodiscard]] double dm_density(std::span<const double> w, const DMParams& psi);

/// Precomputed log-space mixture evaluator.
class MixtureDensity {
 public:
  explicit MixtureDensity(const DMParams& psi);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t k() const noexcept { return log_const_.size(); }
  /// log h(w) given log w_j for every coordinate.
  [[nodiscard]] double log_density_from_logs(std::span<const double> log_w) const;
  /// log d + log h(w) - (d+1) log r, x on the unit-Frechet scale.
  [[nodiscard]] double log_exponent_density(std::span<const double> x) const;

  /// Per-component log(p_m) + log Dirichlet normalizer.
  [[nodiscard]] std::span<const double> log_constants() const noexcept { return log_const_; }
  /// Concentrations nu_m * mu_{j,m}, row m.
  [[nodiscard]] std::span<const double> alphas(std::size_t m) const noexcept { return {alpha_.data() + m * dim_, dim_}; }
  [[nodiscard]] double shape(std::size_t m) const noexcept { return shape_[m]; }

 private:
  std::size_t dim_;
  std::vector<double> log_const_;
  std::vector<double> alpha_;
  std::vector<double> shape_;
};

/// Center of the last component implied by the moment constraint, or nullopt when it falls
/// outside the open simplex.
[[nodiscard]] std::optional<std::vector<double>> solve_last_center(std::span<const double> weights,
                                                                   std::span<const std::vector<double>> free_centers,
                                                                   std::size_t dim);
/// Re-solves `psi.components.back().center` in place; false when infeasible (psi unchanged).
bool resolve_last_center(DMParams& psi);

struct AngularPoint {
  std::vector<double> w{};
  double radius{0.0};
};

/// Draws from H: component m ~ p, then Dirichlet(nu_m mu_m) by normalized Gamma variates.
[[nodiscard]] std::vector<AngularPoint> sample_dm(const DMParams& psi, std::size_t count, std::uint64_t seed);

template <class Rng>
void sample_dm_point(const DMParams& psi, Rng& rng, std::span<double> w);

[[nodiscard]] double exponent_density(std::span<const double> x, const DMParams& psi);
[[nodiscard]] double log_exponent_density(std::span<const double> x, const DMParams& psi);

enum class RegionMethod {
  Auto,             // closed form with <= 2 finite thresholds, quadrature otherwise
  ClosedForm,       // incomplete-Beta form; requires <= 2 finite thresholds
  Quadrature,       // one-dimensional Gamma-order-statistic integral, any d
  QuasiMonteCarlo,  // randomized Halton over the simplex
};

struct RegionOptions {
  RegionMethod method{RegionMethod::Auto};
  double rel_tol{1e-10};
  std::size_t qmc_nodes{1u << 16};
  std::size_t qmc_shifts{16};
  std::uint64_t qmc_seed{0x5eed};
};

struct RegionMeasure {
  double value{0.0};
  double error{0.0};
  bool converged{true};
};

/// lambda(A_u) = d * integral over the simplex of max_j(w_j / u_j) H(dw).
/// Coordinates with u_j = +inf are excluded from the region.
[[nodiscard]] RegionMeasure exponent_measure_region(std::span<const double> u, const DMParams& psi,
                                                    const RegionOptions& opt = {});

/// Bivariate angular measure of sites (i, j) by Dirichlet aggregation.
[[nodiscard]] DMParams pair_margin(const DMParams& psi, std::size_t i, std::size_t j);

enum class ChiMethod { ClosedForm, Quadrature };

/// chi_ij = 2 - V_ij(1, 1).
[[nodiscard]] double chi_coefficient(std::size_t i, std::size_t j, const DMParams& psi,
                                     ChiMethod method = ChiMethod::ClosedForm);

/// Return period of a joint excess of two T-year marginal levels: T / chi (+inf when chi = 0).
[[nodiscard]] double joint_return_period(double years, double chi);
/// Same under independence with mean cluster size tau: T^2 * days_per_year / tau.
[[nodiscard]] double independent_joint_return_period(double years, double mean_cluster_size,
                                                     double days_per_year = 365.0);

/// P(Y_i > y | Y_j > v_j) as the exponent-measure ratio on the Frechet scale.
[[nodiscard]] double conditional_tail(std::size_t i, std::size_t j, double y, const MarginalParams& m,
                                      const ExceedanceRates& r, std::span<const double> thresholds,
                                      const DMParams& psi);
/// Same, with site i given directly on the Frechet scale.
[[nodiscard]] double conditional_tail_frechet(std::size_t i, std::size_t j, double x_i, double u_j,
                                              const DMParams& psi);

}  // namespace dmpot

#include "dmpot/detail/angular_sampling.hpp"
