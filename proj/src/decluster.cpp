#include "dmpot/decluster.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "dmpot/error.hpp"

namespace dmpot {

std::size_t DeclusterSummary::block_days() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.length;
  return n;
}

namespace {

template <class IsAboveDay>
std::vector<Cluster> run_decluster(std::size_t n_days, int tau, IsAboveDay&& above) {
  std::vector<Cluster> out;
  bool open = false;
  Cluster cur;
  int quiet = 0;
  for (std::size_t t = 0; t < n_days; ++t) {
    if (above(t)) {
      if (!open) {
        open = true;
        cur.start = t;
      }
      cur.end = t;
      quiet = 0;
    } else if (open && ++quiet >= tau) {
      out.push_back(cur);
      open = false;
      quiet = 0;
    }
  }
  if (open) out.push_back(cur);
  return out;
}

}  // namespace

std::vector<Cluster> extract_clusters(const SeriesPanel& p, const ThresholdConfig& c) {
  c.validate(p.n_sites());
  return run_decluster(p.n_days(), c.run_length, [&](std::size_t t) {
    for (std::size_t j = 0; j < p.n_sites(); ++j)
      if (classify_position(p.at(t, j), c.thresholds[j]) == Position::Above) return true;
    return false;
  });
}

std::vector<Cluster> extract_site_clusters(const SeriesPanel& p, std::size_t j, double v, int tau) {
  return run_decluster(p.n_days(), tau,
                       [&](std::size_t t) { return classify_position(p.at(t, j), v) == Position::Above; });
}

Observation merge_records(std::span<const Observation> records) {
  double y = -kInf;
  double lo = 0.0;
  double hi = -kInf;
  bool any = false;
  bool censored = false;
  for (const auto& o : records) {
    switch (o.kind) {
      case CensorKind::Missing:
        continue;
      case CensorKind::Exact:
        y = std::max(y, *o.value);
        hi = std::max(hi, *o.value);
        break;
      case CensorKind::RightCensored:
      case CensorKind::IntervalCensored:
        lo = std::max(lo, o.lower);
        hi = std::max(hi, o.upper);
        censored = true;
        break;
    }
    any = true;
  }
  if (!any) return Observation::missing();
  if (y > lo || (!censored && y > -kInf)) return Observation::exact(y);
  // a finite upper bound is required for an interval; an unbounded one degrades to right-censoring
  if (hi < kInf && lo < hi) return Observation::interval(lo, hi);
  if (hi < kInf) return Observation::interval(lo, lo);
  if (lo > 0.0) return Observation::right_censored(lo);
  return Observation::missing();
}

ClusterMaximum cluster_maximum(const SeriesPanel& p, const Cluster& cl) {
  ClusterMaximum cm;
  cm.start = cl.start;
  cm.length = cl.length();
  cm.coords.reserve(p.n_sites());
  std::vector<Observation> column(cl.length());
  for (std::size_t j = 0; j < p.n_sites(); ++j) {
    for (std::size_t t = cl.start; t <= cl.end; ++t) column[t - cl.start] = p.at(t, j);
    cm.coords.push_back(merge_records(column));
  }
  return cm;
}

ClusterMaximum censor_below_threshold(ClusterMaximum cm, std::span<const double> thresholds) {
  for (std::size_t j = 0; j < cm.coords.size(); ++j)
    if (classify_position(cm.coords[j], thresholds[j]) == Position::Below)
      cm.coords[j] = Observation::interval(0.0, thresholds[j]);
  return cm;
}

namespace {

/// Per-site upper bound carried by a non-cluster record, clamped to the threshold.
double effective_bound(const Observation& o, double v) {
  switch (classify_position(o, v)) {
    case Position::Below:
      return v;
    case Position::Above:
      break;  // not reachable outside clusters
    case Position::Undetermined:
      if (o.kind == CensorKind::IntervalCensored) return std::max(o.upper, v);
      return kInf;
  }
  return kInf;
}

}  // namespace

UndeterminedPartition partition_undetermined(const SeriesPanel& p, std::span<const Cluster> clusters,
                                             const ThresholdConfig& c) {
  c.validate(p.n_sites());
  const auto d = p.n_sites();
  std::vector<bool> in_cluster(p.n_days(), false);
  for (const auto& cl : clusters)
    for (std::size_t t = cl.start; t <= cl.end; ++t) in_cluster[t] = true;

  UndeterminedPartition out;
  std::vector<double> bounds(d);
  bool block_open = false;
  for (std::size_t t = 0; t < p.n_days(); ++t) {
    if (in_cluster[t]) {
      block_open = false;
      continue;
    }
    bool all_below = true;
    bool all_missing = true;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& o = p.at(t, j);
      const auto pos = classify_position(o, c.thresholds[j]);
      if (pos == Position::Above) throw DataError("above-threshold day outside every cluster");
      all_below = all_below && pos == Position::Below;
      all_missing = all_missing && o.kind == CensorKind::Missing;
      bounds[j] = effective_bound(o, c.thresholds[j]);
    }
    if (all_below) {
      ++out.below_days;
      block_open = false;
    } else if (all_missing) {
      ++out.missing_days;
      block_open = false;
    } else if (block_open && out.blocks.back().upper_bounds == bounds) {
      ++out.blocks.back().length;
    } else {
      out.blocks.push_back({t, 1, bounds});
      block_open = true;
    }
  }
  return out;
}

double mean_cluster_size(const SeriesPanel& p, const ThresholdConfig& c) {
  c.validate(p.n_sites());
  double sum = 0.0;
  std::size_t sites_with_clusters = 0;
  for (std::size_t j = 0; j < p.n_sites(); ++j) {
    const auto cl = extract_site_clusters(p, j, c.thresholds[j], c.run_length);
    if (cl.empty()) continue;
    std::size_t days = 0;
    for (const auto& x : cl) days += x.length();
    sum += static_cast<double>(days) / static_cast<double>(cl.size());
    ++sites_with_clusters;
  }
  if (sites_with_clusters == 0) throw DataError("no excesses at given thresholds");
  return sum / static_cast<double>(sites_with_clusters);
}

DeclusterSummary decluster(const SeriesPanel& p, const ThresholdConfig& c) {
  DeclusterSummary s;
  s.site_names = p.site_names();
  s.start = p.start();
  s.n_days = p.n_days();
  s.config = c;
  const auto clusters = extract_clusters(p, c);
  for (const auto& cl : clusters) {
    s.clusters.push_back(censor_below_threshold(cluster_maximum(p, cl), c.thresholds));
    s.cluster_days += cl.length();
  }
  auto part = partition_undetermined(p, clusters, c);
  s.blocks = std::move(part.blocks);
  s.below_days = part.below_days;
  s.missing_days = part.missing_days;
  s.mean_cluster_size = clusters.empty() ? 1.0 : mean_cluster_size(p, c);
  return s;
}

void write_clusters_csv(std::ostream& out, const DeclusterSummary& s) {
  out << "start_date,site,kind,value,lower,upper\n";
  for (const auto& cm : s.clusters) {
    const auto ds = format_iso_date(s.start + std::chrono::days{static_cast<long>(cm.start)});
    for (std::size_t j = 0; j < cm.coords.size(); ++j) {
      const auto& o = cm.coords[j];
      out << ds << ',' << s.site_names[j] << ',' << static_cast<int>(o.kind) << ','
          << (o.value ? format_double(*o.value) : std::string{}) << ',' << format_double(o.lower) << ','
          << format_double(o.upper) << '\n';
    }
  }
}

void write_blocks_csv(std::ostream& out, const DeclusterSummary& s) {
  out << "start_date,length";
  for (const auto& name : s.site_names) out << ",bound_" << name;
  out << '\n';
  for (const auto& b : s.blocks) {
    out << format_iso_date(s.start + std::chrono::days{static_cast<long>(b.start)}) << ',' << b.length;
    for (double r : b.upper_bounds) out << ',' << format_double(r);
    out << '\n';
  }
}

}  // namespace dmpot
