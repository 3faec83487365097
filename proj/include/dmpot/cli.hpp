#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmpot/diagnostics.hpp"
#include "dmpot/mcmc.hpp"
#include "dmpot/products.hpp"

namespace dmpot {

inline constexpr const char* kSoftwareVersion = "dmpot 0.1.0";

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);
[[nodiscard]] std::string hex64(std::uint64_t h);

enum class ChainSelection { Pooled, Best };

/// One fit as described by a JSON run document.
struct RunConfig {
  std::string data{};
  ThresholdConfig thresholds{};
  bool regional{false};
  bool recent_only{false};
  Date recent_start{};
  std::optional<PriorSpec> prior{};  // filled from data when absent
  McmcConfig mcmc{};
  ProductOptions products{};
  ChainSelection selection{ChainSelection::Pooled};
  std::string json{};  // effective document, canonical dump

  /// Parses a run document (or a manifest carrying one under "config").
  [[nodiscard]] static RunConfig from_json_text(const std::string& text);
  [[nodiscard]] static RunConfig from_file(const std::filesystem::path& p);
};

/// Model inputs as the fit sees them: declustered panel and exceedance rates.
struct PreparedData {
  SeriesPanel panel{};
  DeclusterSummary summary{};
  ExceedanceRates rates{};
};

[[nodiscard]] PreparedData prepare_data(const RunConfig& cfg);

struct FitResult {
  std::vector<PosteriorSample> chains{};
  DiagnosticsReport diagnostics{};
  std::vector<std::size_t> reported_chains{};  // chains whose draws feed the products
  std::vector<std::string> notes{};
  PriorSpec prior{};
};

[[nodiscard]] FitResult run_fit(const RunConfig& cfg, const PreparedData& data, const CensoredModel& model);

/// posterior.csv: iteration, chain, every retained scalar (k included).
void write_posterior_csv(const std::filesystem::path& p, const std::vector<PosteriorSample>& chains);
void write_diagnostics_json(const std::filesystem::path& p, const FitResult& fit);

/// Writes the plot-ready product CSVs for the selected chains. Returns the written file names.
std::vector<std::string> emit_products(const std::vector<PosteriorSample>& chains, const CensoredModel& model,
                                       const std::vector<std::string>& sites, const ProductOptions& opt,
                                       const std::filesystem::path& outdir);

/// manifest.json: software version, config hash and text, seeds, output file hashes.
void write_manifest(const std::filesystem::path& outdir, const std::string& subcommand, const std::string& config_json,
                    const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& outputs);

/// Full fit into outdir (posterior, diagnostics, products, manifest).
FitResult fit_to_directory(const RunConfig& cfg, const std::filesystem::path& outdir);

struct GridOutcome {
  std::map<std::string, std::string> errors{};  // variant -> message
  std::vector<std::string> variants{};
};

/// {regional, local} x {full period, recent only}, with comparison tables and the shape LRT.
GridOutcome run_experiment_grid(const RunConfig& cfg, const std::filesystem::path& outdir);

/// Runs the command line; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace dmpot
