#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dmpot/angular.hpp"
#include "dmpot/likelihood.hpp"
#include "dmpot/margins.hpp"

namespace dmpot {

struct PriorSpec {
  double shape_mean{0.0};
  double shape_sd{10.0};
  std::vector<double> log_scale_means{};  // one per site
  double log_scale_sd{10.0};
  double nu_shape{1.0};
  double nu_rate{0.01};
  double k_rate{1.0};
  std::size_t k_max{15};
  double weight_alpha{1.0};

  void validate(std::size_t n_sites) const;
};

/// Log-scale means at log(sd of exact excesses) per site; 0 where fewer than two exist.
[[nodiscard]] PriorSpec default_priors(const CensoredModel& model);

/// P(last center feasible | k) under the within-model prior, k = 1..k_max; index 0 unused.
/// Seeded Monte Carlo over weights and all but one free center, with the remaining center
/// integrated exactly; memoized per (d, k_max, alpha, draws).
[[nodiscard]] std::vector<double> feasibility_table(std::size_t dim, std::size_t k_max, double weight_alpha,
                                                    std::size_t draws);

/// Log prior of the mixture, including the k prior and the feasibility normalizer.
[[nodiscard]] double log_prior_mixture(const DMParams& psi, const PriorSpec& pr, std::span<const double> z_table);
[[nodiscard]] double log_prior_margins(const MarginalParams& m, const PriorSpec& pr);

struct McmcConfig {
  std::size_t chains{2};
  std::size_t iterations{10000};
  std::size_t burn_in{2000};
  std::size_t thin{10};
  std::uint64_t seed{1};
  bool regional{false};
  bool likelihood_enabled{true};
  std::size_t normalizer_draws{200000};
  std::size_t adapt_every{50};
  double target_acceptance{0.25};
  RegionOptions region{};
  /// Called with the mixture after every accepted mixture or dimension move.
  std::function<void(const DMParams&)> on_accepted_mixture{};

  void validate() const;
  /// Burn-in 20% and thinning 10 for the given iteration count.
  [[nodiscard]] static McmcConfig with_defaults(std::size_t iterations, std::size_t chains, std::uint64_t seed);
};

struct MoveStats {
  std::size_t proposed{0};
  std::size_t accepted{0};
  [[nodiscard]] double rate() const noexcept {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

/// Current parameter values plus the caches that make incremental updates cheap.
struct ChainState {
  MarginalParams margins{};
  DMParams mixture{};
  AugmentedState augmented{};
  double log_lik{0.0};
  double log_prior{0.0};
  std::size_t iteration{0};
  std::vector<std::string> warnings{};

  // caches
  std::vector<SiteMargin> site{};
  std::vector<double> x{};        // Frechet coordinates, cluster-major
  std::vector<double> log_jac{};  // per coordinate
  std::vector<double> cluster_terms{};
  double lambda_u{0.0};
  std::vector<std::vector<double>> block_bounds{};
  std::vector<double> block_terms{};

  [[nodiscard]] double log_post() const noexcept { return log_lik + log_prior; }
};

/// Everything a chain needs besides its own state.
struct Sampler {
  const CensoredModel* model{nullptr};
  PriorSpec prior{};
  McmcConfig config{};
  std::vector<double> z_table{};
};

[[nodiscard]] Sampler make_sampler(const CensoredModel& model, PriorSpec prior, McmcConfig config);

[[nodiscard]] ChainState init_chain(const Sampler& s, std::uint64_t seed);

/// Recomputes log-likelihood and log-prior from scratch (no caches read).
[[nodiscard]] std::pair<double, double> recompute_log_post(const Sampler& s, const ChainState& st);

/// Random-walk scale with burn-in adaptation toward a target acceptance rate.
struct AdaptiveStep {
  double scale{0.5};
  std::size_t proposed{0};
  std::size_t accepted{0};
  std::size_t batches{0};

  void record(bool ok) noexcept;
  void adapt(double target) noexcept;
};

struct StepSizes {
  std::vector<AdaptiveStep> log_scale{};
  std::vector<AdaptiveStep> shape{};  // a single entry when regional
  AdaptiveStep weight{1.0};
  AdaptiveStep center{0.3};
  AdaptiveStep nu{0.3};

  [[nodiscard]] static StepSizes initial(std::size_t n_sites, bool regional);
  void adapt(double target) noexcept;
};

struct MoveLedger {
  std::map<std::string, MoveStats> moves{};
  void record(const std::string& name, bool accepted);
};

void gibbs_impute(const Sampler& s, ChainState& st, std::mt19937_64& rng);
void update_margins(const Sampler& s, ChainState& st, StepSizes& steps, MoveLedger& ledger, std::mt19937_64& rng);
void update_mixture_within(const Sampler& s, ChainState& st, StepSizes& steps, MoveLedger& ledger,
                           std::mt19937_64& rng);
void rj_move(const Sampler& s, ChainState& st, MoveLedger& ledger, std::mt19937_64& rng);

/// Birth of a free component at free position `slot` with weight `w_star`; the last center is
/// re-solved. Returns nullopt when the constraint has no feasible solution.
[[nodiscard]] std::optional<DMParams> birth_of(const DMParams& psi, std::size_t slot, double w_star,
                                               const DirichletComponent& born);
/// Removes free component `slot` and renormalizes; nullopt when infeasible.
[[nodiscard]] std::optional<DMParams> death_of(const DMParams& psi, std::size_t slot);
/// Log acceptance ratio of the birth psi -> after (prior and proposal parts, no likelihood).
[[nodiscard]] double birth_log_ratio(const DMParams& psi, const DMParams& after, std::size_t slot,
                                     const PriorSpec& pr, std::span<const double> z_table);
/// Log acceptance ratio of the death psi -> death_of(psi, slot) (no likelihood).
[[nodiscard]] double death_log_ratio(const DMParams& psi, std::size_t slot, const PriorSpec& pr,
                                     std::span<const double> z_table);

struct PosteriorSample {
  std::size_t chain{0};
  std::vector<std::string> names{};
  std::vector<std::size_t> iterations{};
  std::vector<double> values{};  // row-major, one row per retained draw
  std::vector<MarginalParams> margins{};
  std::vector<DMParams> mixtures{};
  std::map<std::string, MoveStats> acceptance{};
  std::vector<std::string> warnings{};

  [[nodiscard]] std::size_t n_draws() const noexcept { return iterations.size(); }
  [[nodiscard]] std::vector<double> column(const std::string& name) const;
};

/// Column names of the retained scalars for the given site names.
[[nodiscard]] std::vector<std::string> scalar_names(const std::vector<std::string>& sites);

/// Runs one chain to completion.
[[nodiscard]] PosteriorSample run_chain(const Sampler& s, std::size_t chain_index,
                                        const std::vector<std::string>& sites);

/// Runs config.chains independent chains concurrently, chain c seeded from (seed, c).
[[nodiscard]] std::vector<PosteriorSample> run_chains(const CensoredModel& model, const PriorSpec& prior,
                                                      const McmcConfig& config,
                                                      const std::vector<std::string>& sites);

}  // namespace dmpot
