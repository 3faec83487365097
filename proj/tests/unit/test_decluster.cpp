#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "../support/decluster_fixtures.hpp"
#include "dmpot/decluster.hpp"
#include "dmpot/error.hpp"
#include "dmpot/simulate.hpp"

using namespace dmpot;

namespace {

const SeriesPanel& lookalike() {
  static const SeriesPanel p = make_gardons_lookalike(20240611);
  return p;
}

ThresholdConfig lookalike_config() { return {{300.0, 320.0, 520.0, 380.0}, 3}; }

}  // namespace

TEST_SUITE("decluster") {
  TEST_CASE("hand-traced fixtures") {
    for (const auto& fx : fixtures::decluster_fixtures()) {
      CAPTURE(fx.name);
      CHECK(fixtures::check_fixture(fx) == "");
    }
  }

  TEST_CASE("merge rule priorities") {
    using fixtures::cell;
    const std::vector<Observation> a{cell("e15"), cell("i12-20")};
    CHECK(merge_records(a) == cell("e15"));
    const std::vector<Observation> b{cell("i12-20")};
    CHECK(merge_records(b) == cell("i12-20"));
    const std::vector<Observation> c{cell("."), cell(".")};
    CHECK(merge_records(c) == Observation::missing());
    const std::vector<Observation> d{cell("r30"), cell("e20")};
    CHECK(merge_records(d) == cell("r30"));
  }

  TEST_CASE("below-threshold coordinates are censored to [0, v]") {
    ClusterMaximum cm{0, 1, {Observation::exact(4.0), Observation::exact(40.0)}};
    const std::vector<double> v{10.0, 10.0};
    const auto out = censor_below_threshold(cm, v);
    CHECK(out.coords[0] == Observation::interval(0.0, 10.0));
    CHECK(out.coords[1] == Observation::exact(40.0));
  }

  TEST_CASE("lookalike panel partitions every day") {
    const auto s = decluster(lookalike(), lookalike_config());
    CHECK(s.clusters.size() >= 80);
    CHECK(s.clusters.size() <= 200);
    CHECK(s.cluster_days + s.block_days() + s.below_days + s.missing_days == lookalike().n_days());
    for (std::size_t i = 1; i < s.clusters.size(); ++i)
      CHECK(s.clusters[i].start > s.clusters[i - 1].start + s.clusters[i - 1].length - 1);
    for (const auto& b : s.blocks)
      for (std::size_t j = 0; j < b.upper_bounds.size(); ++j) CHECK(b.upper_bounds[j] >= lookalike_config().thresholds[j]);
  }

  TEST_CASE("declustering is idempotent") {
    const auto a = decluster(lookalike(), lookalike_config());
    const auto b = decluster(lookalike(), lookalike_config());
    CHECK(a.clusters == b.clusters);
    CHECK(a.blocks == b.blocks);
    CHECK(a.mean_cluster_size == b.mean_cluster_size);
  }

  TEST_CASE("raising thresholds never adds clusters") {
    auto cfg = lookalike_config();
    std::size_t prev = extract_clusters(lookalike(), cfg).size();
    for (int step = 0; step < 4; ++step) {
      for (auto& v : cfg.thresholds) v *= 1.2;
      const auto n = extract_clusters(lookalike(), cfg).size();
      CHECK(n <= prev);
      prev = n;
    }
  }

  TEST_CASE("longer run length never adds clusters") {
    auto cfg = lookalike_config();
    std::size_t prev = extract_clusters(lookalike(), cfg).size();
    for (int tau = 4; tau <= 10; tau += 2) {
      cfg.run_length = tau;
      const auto n = extract_clusters(lookalike(), cfg).size();
      CHECK(n <= prev);
      prev = n;
    }
  }

  TEST_CASE("mean cluster size is near one on the lookalike panel") {
    const double t = mean_cluster_size(lookalike(), lookalike_config());
    CHECK(t >= 1.0);
    CHECK(t < 1.5);
  }

  TEST_CASE("mean cluster size without excesses is an error") {
    const auto fx = fixtures::decluster_fixtures()[1];
    CHECK_THROWS(mean_cluster_size(fx.panel(), fx.config()));
  }

  TEST_CASE("csv writers emit one row per cluster site and per block") {
    const auto fx = fixtures::decluster_fixtures()[10];
    const auto s = decluster(fx.panel(), fx.config());
    std::ostringstream blocks;
    write_blocks_csv(blocks, s);
    const auto text = blocks.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(text.rfind("start_date,length,bound_s1,bound_s2", 0) == 0);

    const auto fx2 = fixtures::decluster_fixtures()[4];
    std::ostringstream clusters;
    write_clusters_csv(clusters, decluster(fx2.panel(), fx2.config()));
    const auto t2 = clusters.str();
    CHECK(std::count(t2.begin(), t2.end(), '\n') == 3);
  }
}
