#pragma once

// Hand-traced declustering panels. Each fixture lists the raw records and the complete
// expected output of decluster(): cluster ranges, censored maxima, undetermined blocks,
// below/missing day counts and the mean cluster size.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmpot/decluster.hpp"

namespace fixtures {

using dmpot::kInf;
using dmpot::Observation;

/// Cell shorthand: "." missing, "e15" exact, "r16" right-censored, "i12-20" interval.
inline Observation cell(const std::string& s) {
  if (s == ".") return Observation::missing();
  const double a = std::stod(s.substr(1));
  switch (s[0]) {
    case 'e':
      return Observation::exact(a);
    case 'r':
      return Observation::right_censored(a);
    case 'i':
      return Observation::interval(a, std::stod(s.substr(s.find('-', 1) + 1)));
  }
  throw std::invalid_argument("bad fixture cell " + s);
}

struct DeclusterFixture {
  std::string name;
  std::vector<double> thresholds;
  int tau;
  std::vector<std::vector<std::string>> days;  // one row per day, one cell per site
  std::vector<dmpot::Cluster> clusters;
  std::vector<std::vector<std::string>> maxima;  // censored cluster maxima, cell shorthand
  std::vector<dmpot::UndeterminedBlock> blocks;
  std::size_t below_days;
  std::size_t missing_days;
  double tau_hat;

  [[nodiscard]] dmpot::SeriesPanel panel() const {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < thresholds.size(); ++j) names.push_back("s" + std::to_string(j + 1));
    std::vector<Observation> cells;
    for (const auto& row : days)
      for (const auto& c : row) cells.push_back(cell(c));
    return {names, dmpot::parse_iso_date("1800-01-01"), days.size(), cells};
  }
  [[nodiscard]] dmpot::ThresholdConfig config() const { return {thresholds, tau}; }
};

inline std::vector<DeclusterFixture> decluster_fixtures() {
  std::vector<DeclusterFixture> f;
  // opened on the first excess, closed after tau quiet days; the trailing quiet days stay outside
  f.push_back({"run rule, one cluster",
               {10.0},
               2,
               {{"e3"}, {"e12"}, {"e4"}, {"e11"}, {"e3"}, {"e3"}, {"e3"}},
               {{1, 3}},
               {{"e12"}},
               {},
               4,
               0,
               3.0});
  f.push_back({"no excess", {10.0}, 2, {{"e3"}, {"e4"}, {"e5"}}, {}, {}, {}, 3, 0, 1.0});
  f.push_back({"exactly tau quiet days split clusters",
               {10.0},
               2,
               {{"e12"}, {"e3"}, {"e3"}, {"e15"}},
               {{0, 0}, {3, 3}},
               {{"e12"}, {"e15"}},
               {},
               2,
               0,
               1.0});
  f.push_back({"tau - 1 quiet days keep one cluster",
               {10.0},
               3,
               {{"e12"}, {"e3"}, {"e3"}, {"e15"}, {"e2"}},
               {{0, 3}},
               {{"e15"}},
               {},
               1,
               0,
               4.0});
  f.push_back({"second site initiates",
               {10.0, 20.0},
               1,
               {{"e5", "e25"}, {"e12", "e5"}, {"e5", "e5"}},
               {{0, 1}},
               {{"e12", "e25"}},
               {},
               1,
               0,
               1.0});
  f.push_back({"exact above interval lower bound wins",
               {10.0},
               1,
               {{"e15"}, {"i12-20"}, {"e3"}},
               {{0, 1}},
               {{"e15"}},
               {},
               1,
               0,
               2.0});
  f.push_back({"interval records merge to their bound maxima",
               {10.0},
               1,
               {{"i12-20"}, {"i11-18"}, {"e1"}},
               {{0, 1}},
               {{"i12-20"}},
               {},
               1,
               0,
               2.0});
  f.push_back({"interval lower bound above the exact value wins",
               {10.0},
               1,
               {{"e13"}, {"i15-30"}, {"e1"}},
               {{0, 1}},
               {{"i15-30"}},
               {},
               1,
               0,
               2.0});
  f.push_back({"right-censored record dominates",
               {10.0},
               1,
               {{"e13"}, {"r16"}, {"e1"}},
               {{0, 1}},
               {{"r16"}},
               {},
               1,
               0,
               2.0});
  f.push_back({"missing site and below-threshold censoring",
               {10.0, 10.0, 10.0},
               1,
               {{"e15", ".", "e4"}, {"e3", ".", "i0-8"}, {"e1", ".", "e2"}},
               {{0, 0}},
               {{"e15", ".", "i0-10"}},
               {{1, 2, {10.0, kInf, 10.0}}},
               0,
               0,
               1.0});
  f.push_back({"undetermined blocks need identical bounds",
               {100.0, 200.0},
               1,
               {{"i0-500", "i0-600"},
                {"i0-500", "i0-600"},
                {"i0-500", "i0-600"},
                {"i0-500", "i0-650"},
                {"i0-50", "i0-100"},
                {".", "."},
                {"i0-500", "i0-600"},
                {"e50", "r150"},
                {"e50", "e150"}},
               {},
               {},
               {{0, 3, {500.0, 600.0}}, {3, 1, {500.0, 650.0}}, {6, 1, {500.0, 600.0}}, {7, 1, {100.0, kInf}}},
               2,
               1,
               1.0});
  f.push_back({"bounds at threshold and a cluster left open at the end",
               {100.0, 200.0},
               2,
               {{"i0-100", "e150"}, {"e120", "i0-300"}, {"e90", "i0-300"}, {"e101", "e50"}, {"e50", "e50"}},
               {{1, 3}},
               {{"e120", "i0-200"}},
               {{0, 1, {100.0, 200.0}}},
               1,
               0,
               3.0});
  return f;
}

/// Empty when decluster() reproduces the fixture exactly, otherwise the first mismatch.
inline std::string check_fixture(const DeclusterFixture& fx) {
  const auto p = fx.panel();
  const auto s = dmpot::decluster(p, fx.config());
  std::ostringstream why;
  const auto cl = dmpot::extract_clusters(p, fx.config());
  if (cl != fx.clusters) {
    why << "cluster ranges differ (" << cl.size() << " found)";
    return why.str();
  }
  if (s.clusters.size() != fx.maxima.size()) return "cluster maximum count differs";
  for (std::size_t i = 0; i < fx.maxima.size(); ++i)
    for (std::size_t j = 0; j < fx.maxima[i].size(); ++j)
      if (!(s.clusters[i].coords[j] == cell(fx.maxima[i][j]))) {
        why << "cluster " << i << " site " << j << " differs from " << fx.maxima[i][j];
        return why.str();
      }
  if (s.blocks != fx.blocks) {
    why << "blocks differ (" << s.blocks.size() << " found)";
    return why.str();
  }
  if (s.below_days != fx.below_days) return "below-day count " + std::to_string(s.below_days);
  if (s.missing_days != fx.missing_days) return "missing-day count " + std::to_string(s.missing_days);
  if (s.mean_cluster_size != fx.tau_hat) return "mean cluster size " + std::to_string(s.mean_cluster_size);
  if (s.cluster_days + s.block_days() + s.below_days + s.missing_days != p.n_days()) return "days not partitioned";
  return {};
}

}  // namespace fixtures
