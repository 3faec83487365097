#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "dmpot/data_model.hpp"

namespace dmpot {

/// Inclusive day range [start, end] of one multivariate cluster.
struct Cluster {
  std::size_t start{0};
  std::size_t end{0};

  [[nodiscard]] std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// Componentwise censored maximum of a cluster. `coords[j]` carries the merged kind.
struct ClusterMaximum {
  std::size_t start{0};
  std::size_t length{1};
  std::vector<Observation> coords{};

  friend bool operator==(const ClusterMaximum&, const ClusterMaximum&) = default;
};

/// Run of non-cluster days sharing one per-site upper-bound vector. Bounds are clamped
/// to the thresholds from below; +inf means "no information" at that site.
struct UndeterminedBlock {
  std::size_t start{0};
  std::size_t length{0};
  std::vector<double> upper_bounds{};

  friend bool operator==(const UndeterminedBlock&, const UndeterminedBlock&) = default;
};

struct UndeterminedPartition {
  std::vector<UndeterminedBlock> blocks{};
  std::size_t below_days{0};
  std::size_t missing_days{0};
};

struct DeclusterSummary {
  std::vector<std::string> site_names{};
  Date start{};
  std::size_t n_days{0};
  ThresholdConfig config{};
  std::vector<ClusterMaximum> clusters{};  // censored below threshold
  std::size_t cluster_days{0};
  std::vector<UndeterminedBlock> blocks{};
  std::size_t below_days{0};
  std::size_t missing_days{0};
  double mean_cluster_size{1.0};

  [[nodiscard]] std::size_t n_sites() const noexcept { return site_names.size(); }
  [[nodiscard]] std::size_t block_days() const noexcept;
};

/// Run declustering over all sites: a cluster opens on the first day with any site Above
/// and closes after `tau` consecutive days with no site Above. Trailing quiet days are
/// not part of the cluster.
[[nodiscard]] std::vector<Cluster> extract_clusters(const SeriesPanel& p, const ThresholdConfig& c);

/// Univariate declustering of site `j` alone at threshold `v`.
[[nodiscard]] std::vector<Cluster> extract_site_clusters(const SeriesPanel& p, std::size_t j, double v, int tau);

[[nodiscard]] ClusterMaximum cluster_maximum(const SeriesPanel& p, const Cluster& cl);

/// Merge rule for one site's records over a cluster.
[[nodiscard]] Observation merge_records(std::span<const Observation> records);

/// Coordinates Below their threshold become IntervalCensored [0, v_j].
[[nodiscard]] ClusterMaximum censor_below_threshold(ClusterMaximum cm, std::span<const double> thresholds);

[[nodiscard]] UndeterminedPartition partition_undetermined(const SeriesPanel& p, std::span<const Cluster> clusters,
                                                           const ThresholdConfig& c);

/// Mean univariate cluster length, averaged over sites having at least one cluster.
[[nodiscard]] double mean_cluster_size(const SeriesPanel& p, const ThresholdConfig& c);

/// Full pipeline: clusters, censored maxima, undetermined partition, mean cluster size.
[[nodiscard]] DeclusterSummary decluster(const SeriesPanel& p, const ThresholdConfig& c);

/// clusters.csv: start_date,site,kind,value,lower,upper (one row per cluster per site).
void write_clusters_csv(std::ostream& out, const DeclusterSummary& s);
/// blocks.csv: start_date,length,bound_<site>...
void write_blocks_csv(std::ostream& out, const DeclusterSummary& s);

}  // namespace dmpot
