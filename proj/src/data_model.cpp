#include "dmpot/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "dmpot/error.hpp"

namespace dmpot {

std::string Observation::invariant_violation() const {
  switch (kind) {
    case CensorKind::Missing:
      if (value || lower != 0.0 || upper != kInf) return "missing record carries data";
      return {};
    case CensorKind::Exact:
      if (!value) return "exact record missing value";
      if (!std::isfinite(*value) || *value < 0.0) return "exact value must be finite and non-negative";
      return {};
    case CensorKind::RightCensored:
      if (value) return "right-censored record carries a value";
      if (!(lower > 0.0) || !std::isfinite(lower)) return "right-censored lower bound must be positive and finite";
      if (upper != kInf) return "right-censored upper bound must be infinite";
      return {};
    case CensorKind::IntervalCensored:
      if (value) return "interval-censored record carries a value";
      if (!(lower >= 0.0) || !(lower <= upper) || !std::isfinite(upper))
        return "interval-censored bounds must satisfy 0 <= lower <= upper < inf";
      return {};
  }
  return "unknown censoring kind";
}

Position classify_position(const Observation& o, double v) noexcept {
  switch (o.kind) {
    case CensorKind::Exact:
      return *o.value > v ? Position::Above : Position::Below;
    case CensorKind::RightCensored:
      return o.lower > v ? Position::Above : Position::Undetermined;
    case CensorKind::IntervalCensored:
      if (o.lower > v) return Position::Above;
      if (o.upper < v) return Position::Below;
      return Position::Undetermined;
    case CensorKind::Missing:
      break;
  }
  return Position::Undetermined;
}

Date parse_iso_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return DataError("invalid ISO date '" + std::string(s) + "'"); };
  if (s.size() < 10 || s[s.size() - 3] != '-' || s[s.size() - 6] != '-') throw bad();
  const char* p = s.data();
  const char* end = s.data() + s.size();
  auto r1 = std::from_chars(p, end - 6, y);
  auto r2 = std::from_chars(end - 5, end - 3, m);
  auto r3 = std::from_chars(end - 2, end, d);
  if (r1.ec != std::errc{} || r1.ptr != end - 6 || r2.ec != std::errc{} || r3.ec != std::errc{}) throw bad();
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_iso_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

SeriesPanel::SeriesPanel(std::vector<std::string> site_names, Date start, std::size_t n_days)
    : site_names_(std::move(site_names)), start_(start), n_days_(n_days), cells_(n_days * site_names_.size()) {}

SeriesPanel::SeriesPanel(std::vector<std::string> site_names, Date start, std::size_t n_days,
                         std::vector<Observation> cells)
    : site_names_(std::move(site_names)), start_(start), n_days_(n_days), cells_(std::move(cells)) {
  if (cells_.size() != n_days_ * site_names_.size()) throw DataError("panel cell count does not match n x d");
}

SeriesPanel SeriesPanel::slice(std::size_t first, std::size_t count) const {
  first = std::min(first, n_days_);
  count = std::min(count, n_days_ - first);
  const auto d = n_sites();
  std::vector<Observation> cells(cells_.begin() + static_cast<std::ptrdiff_t>(first * d),
                                 cells_.begin() + static_cast<std::ptrdiff_t>((first + count) * d));
  return SeriesPanel(site_names_, date(first), count, std::move(cells));
}

SeriesPanel SeriesPanel::from_date(Date from) const {
  if (from <= start_) return *this;
  const auto offset = static_cast<std::size_t>((from - start_).count());
  if (offset >= n_days_) return SeriesPanel(site_names_, from, 0);
  return slice(offset, n_days_ - offset);
}

void ThresholdConfig::validate(std::size_t n_sites) const {
  if (thresholds.size() != n_sites) throw ConfigError("threshold count does not match site count");
  for (double v : thresholds)
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("thresholds must be positive and finite");
  if (run_length < 1) throw ConfigError("run length tau must be >= 1");
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto c = line.find(',', pos);
    if (c == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, c - pos));
    pos = c + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s, std::size_t line_no, const char* field) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s == "+inf" || s == "inf" || s == "Inf" || s == "+Inf") return kInf;
  if (s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ": malformed " + field + " '" + std::string(s) + "'");
  return x;
}

struct Row {
  Date date;
  std::size_t site;
  Observation obs;
  std::size_t line;
};

}  // namespace

SeriesPanel parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t col_date = 0, col_site = 0, col_kind = 0, col_value = 0, col_lower = 0, col_upper = 0;
  // header (skip leading blank lines)
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("missing CSV header");
  {
    auto fields = split_commas(line);
    auto find = [&](std::string_view name) {
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (trim(fields[i]) == name) return i;
      throw DataError("CSV header lacks column '" + std::string(name) + "'");
    };
    col_date = find("date");
    col_site = find("site");
    col_kind = find("kind");
    col_value = find("value");
    col_lower = find("lower");
    col_upper = find("upper");
  }
  const std::size_t n_cols =
      1 + std::max({col_date, col_site, col_kind, col_value, col_lower, col_upper});

  std::vector<std::string> sites;
  std::unordered_map<std::string, std::size_t> site_index;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_commas(line);
    if (f.size() < n_cols)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_cols) + " fields");
    Date date;
    try {
      date = parse_iso_date(trim(f[col_date]));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string site{trim(f[col_site])};
    if (site.empty()) throw DataError("line " + std::to_string(line_no) + ": empty site");
    const auto kind_str = trim(f[col_kind]);
    int kind = -1;
    auto kr = std::from_chars(kind_str.data(), kind_str.data() + kind_str.size(), kind);
    if (kr.ec != std::errc{} || kr.ptr != kind_str.data() + kind_str.size() || kind < 0 || kind > 3)
      throw DataError("line " + std::to_string(line_no) + ": kind must be 0..3");

    const auto value = parse_number(f[col_value], line_no, "value");
    const auto lower = parse_number(f[col_lower], line_no, "lower");
    const auto upper = parse_number(f[col_upper], line_no, "upper");

    Observation o;
    o.kind = static_cast<CensorKind>(kind);
    switch (o.kind) {
      case CensorKind::Missing:
        break;
      case CensorKind::Exact:
        o.value = value;
        break;
      case CensorKind::RightCensored:
      case CensorKind::IntervalCensored:
        o.lower = lower.value_or(0.0);
        o.upper = upper.value_or(kInf);
        break;
    }
    if (auto why = o.invariant_violation(); !why.empty())
      throw DataError("line " + std::to_string(line_no) + " (" + format_iso_date(date) + ", " + site +
                      "): " + why);

    auto [it, inserted] = site_index.try_emplace(site, sites.size());
    if (inserted) sites.push_back(site);
    rows.push_back({date, it->second, o, line_no});
  }

  if (rows.empty()) return SeriesPanel(std::move(sites), Date{}, 0);

  auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                      [](const Row& a, const Row& b) { return a.date < b.date; });
  const Date start = lo->date;
  const auto n = static_cast<std::size_t>((hi->date - start).count()) + 1;
  SeriesPanel panel(sites, start, n);
  std::vector<bool> seen(n * sites.size(), false);
  for (const auto& r : rows) {
    const auto t = static_cast<std::size_t>((r.date - start).count());
    const auto idx = t * sites.size() + r.site;
    if (seen[idx])
      throw DataError("line " + std::to_string(r.line) + ": duplicate record for (" + format_iso_date(r.date) +
                      ", " + sites[r.site] + ")");
    seen[idx] = true;
    panel.at(t, r.site) = r.obs;
  }
  return panel;
}

SeriesPanel read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in);
}

std::string format_double(double x) {
  if (x == kInf) return "+inf";
  if (x == -kInf) return "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void write_csv(std::ostream& out, const SeriesPanel& p) {
  out << "date,site,kind,value,lower,upper\n";
  for (std::size_t t = 0; t < p.n_days(); ++t) {
    const auto ds = format_iso_date(p.date(t));
    for (std::size_t j = 0; j < p.n_sites(); ++j) {
      const auto& o = p.at(t, j);
      out << ds << ',' << p.site_names()[j] << ',' << static_cast<int>(o.kind) << ','
          << (o.value ? format_double(*o.value) : std::string{}) << ',' << format_double(o.lower) << ','
          << format_double(o.upper) << '\n';
    }
  }
}

void write_csv_file(const std::string& path, const SeriesPanel& p) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, p);
}

std::vector<KindCounts> panel_summary(const SeriesPanel& p) {
  std::vector<KindCounts> counts(p.n_sites(), KindCounts{});
  for (std::size_t t = 0; t < p.n_days(); ++t)
    for (std::size_t j = 0; j < p.n_sites(); ++j) ++counts[j][static_cast<std::size_t>(p.at(t, j).kind)];
  return counts;
}

}  // namespace dmpot
