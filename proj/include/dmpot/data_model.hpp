#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmpot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Censoring type of one site-day record. Integer codes are the on-disk codes.
enum class CensorKind : std::uint8_t {
  Missing = 0,
  Exact = 1,
  RightCensored = 2,
  IntervalCensored = 3,
};

inline constexpr std::size_t kCensorKindCount = 4;

/// One site-day record: kind + value + bounds (discharge units).
struct Observation {
  CensorKind kind{CensorKind::Missing};
  std::optional<double> value{};
  double lower{0.0};
  double upper{kInf};

  static Observation missing() { return {}; }
  static Observation exact(double v) { return {CensorKind::Exact, v, 0.0, kInf}; }
  static Observation right_censored(double lo) { return {CensorKind::RightCensored, std::nullopt, lo, kInf}; }
  static Observation interval(double lo, double hi) {
    return {CensorKind::IntervalCensored, std::nullopt, lo, hi};
  }

  /// Empty string when the invariants of `kind` hold, otherwise a description.
  [[nodiscard]] std::string invariant_violation() const;

  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class Position { Above, Below, Undetermined };

/// Position of a record relative to threshold `v`. Exact ties count as Below.
[[nodiscard]] Position classify_position(const Observation& o, double v) noexcept;

using Date = std::chrono::sys_days;

[[nodiscard]] Date parse_iso_date(std::string_view s);
[[nodiscard]] std::string format_iso_date(Date d);

/// Contiguous daily panel: n days starting at `start`, d sites, row-major n x d cells.
class SeriesPanel {
 public:
  SeriesPanel() = default;
  SeriesPanel(std::vector<std::string> site_names, Date start, std::size_t n_days);
  SeriesPanel(std::vector<std::string> site_names, Date start, std::size_t n_days,
              std::vector<Observation> cells);

  [[nodiscard]] std::size_t n_days() const noexcept { return n_days_; }
  [[nodiscard]] std::size_t n_sites() const noexcept { return site_names_.size(); }
  [[nodiscard]] const std::vector<std::string>& site_names() const noexcept { return site_names_; }
  [[nodiscard]] Date start() const noexcept { return start_; }
  [[nodiscard]] Date date(std::size_t t) const noexcept { return start_ + std::chrono::days{static_cast<long>(t)}; }

  [[nodiscard]] const Observation& at(std::size_t t, std::size_t j) const { return cells_[t * n_sites() + j]; }
  Observation& at(std::size_t t, std::size_t j) { return cells_[t * n_sites() + j]; }
  [[nodiscard]] std::span<const Observation> day(std::size_t t) const {
    return {cells_.data() + t * n_sites(), n_sites()};
  }

  /// Days [first, first + count) as a new panel.
  [[nodiscard]] SeriesPanel slice(std::size_t first, std::size_t count) const;
  /// Days on or after `from` (empty panel when `from` is past the end).
  [[nodiscard]] SeriesPanel from_date(Date from) const;

  friend bool operator==(const SeriesPanel&, const SeriesPanel&) = default;

 private:
  std::vector<std::string> site_names_{};
  Date start_{};
  std::size_t n_days_{0};
  std::vector<Observation> cells_{};
};

/// Declustering threshold per site plus the run length tau (days).
struct ThresholdConfig {
  std::vector<double> thresholds{};
  int run_length{1};

  void validate(std::size_t n_sites) const;
};

/// Parse the `date,site,kind,value,lower,upper` CSV dialect. Columns are located by
/// header name. Absent (date, site) cells and calendar gaps become Missing.
[[nodiscard]] SeriesPanel parse_csv(std::istream& in);
[[nodiscard]] SeriesPanel read_csv_file(const std::string& path);

/// Writes every cell (Missing included), so parse_csv(write_csv(p)) == p.
void write_csv(std::ostream& out, const SeriesPanel& p);
void write_csv_file(const std::string& path, const SeriesPanel& p);

/// Shortest round-trip decimal representation; `+inf` for infinity.
[[nodiscard]] std::string format_double(double x);

using KindCounts = std::array<std::size_t, kCensorKindCount>;

/// Per-site tallies of each CensorKind, indexed by the integer code.
[[nodiscard]] std::vector<KindCounts> panel_summary(const SeriesPanel& p);

}  // namespace dmpot
