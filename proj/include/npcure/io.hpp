#pragma once

#include "error.hpp"
#include "random.hpp"
#include "survival.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace npcure {

//! Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v)
{
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s)
{
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

//! How to read a delimited file into a CensoredSample. Columns are named by
//! header field, or by 1-based position when the file has no header.
struct DatasetSchema
{
  std::string covariate = "age";
  std::string time = "time";
  std::string delta = "delta";
  std::optional<std::string> group;
  char delimiter = ',';
  bool header = true;
};

struct IngestReport
{
  CensoredSample sample;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t censored = 0;

  double censoring_percent() const noexcept
  {
    return rows_kept == 0 ? 0.0 : 100.0 * static_cast<double>(censored) / static_cast<double>(rows_kept);
  }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  s = s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

inline std::size_t resolve_column(const std::string& name,
                                  const std::vector<std::string>& header,
                                  bool has_header,
                                  const std::string& role)
{
  if (has_header) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end())
      return static_cast<std::size_t>(it - header.begin());
  }
  std::size_t index = 0;
  const auto res = std::from_chars(name.data(), name.data() + name.size(), index);
  if (res.ec == std::errc{} && res.ptr == name.data() + name.size() && index >= 1 &&
      (!has_header || index <= header.size()))
    return index - 1;
  throw Error(ErrorKind::parse, role + " column '" + name + "' not found" + (has_header ? " in header" : ""));
}

} // namespace detail

//! Parses delimited text. Blank lines are skipped; any malformed row aborts
//! with its 1-based line number. When `groups` is nonempty, only rows whose
//! group field equals one of its entries are kept.
inline IngestReport ingest(std::istream& in,
                           const DatasetSchema& schema,
                           std::span<const std::string> groups = {},
                           const std::string& source = "<input>")
{
  require(!schema.group || !schema.group->empty(), "group column name must not be empty");
  require(groups.empty() || schema.group.has_value(), "group filter given but no group column configured");

  std::vector<std::string> header;
  std::size_t cx = 0, ct = 0, cd = 0;
  std::optional<std::size_t> cg;
  bool resolved = false;
  auto resolve = [&] {
    cx = detail::resolve_column(schema.covariate, header, schema.header, "covariate");
    ct = detail::resolve_column(schema.time, header, schema.header, "time");
    cd = detail::resolve_column(schema.delta, header, schema.header, "delta");
    if (schema.group)
      cg = detail::resolve_column(*schema.group, header, schema.header, "group");
    resolved = true;
  };

  IngestReport report;
  std::vector<Observation> records;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::parse, source + ":" + std::to_string(lineno) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty())
      continue;
    const auto fields = detail::split_fields(line, schema.delimiter);
    if (!resolved) {
      if (schema.header) {
        for (auto f : fields)
          header.emplace_back(f);
        try {
          resolve();
        } catch (const Error& e) {
          fail(e.what());
        }
        continue;
      }
      resolve();
    }
    const std::size_t needed = std::max({cx, ct, cd, cg.value_or(0)}) + 1;
    if (fields.size() < needed)
      fail("expected at least " + std::to_string(needed) + " fields, found " + std::to_string(fields.size()));
    ++report.rows_read;

    if (cg && !groups.empty() &&
        std::find(groups.begin(), groups.end(), std::string(fields[*cg])) == groups.end())
      continue;

    const auto x = parse_double(fields[cx]);
    if (!x || !std::isfinite(*x))
      fail("covariate '" + std::string(fields[cx]) + "' is not a finite number");
    const auto t = parse_double(fields[ct]);
    if (!t || !std::isfinite(*t) || *t < 0.0)
      fail("time '" + std::string(fields[ct]) + "' is not a nonnegative number");
    const auto d = fields[cd];
    if (d != "0" && d != "1")
      fail("delta '" + std::string(d) + "' must be 0 or 1");
    records.push_back(Observation{*x, *t, d == "1"});
    if (d == "0")
      ++report.censored;
  }
  if (!resolved && schema.header)
    throw Error(ErrorKind::parse, source + ": missing header line");
  report.rows_kept = records.size();
  if (records.empty())
    throw Error(ErrorKind::empty_sample, source + ": no rows left" + (groups.empty() ? "" : " after group filtering"));
  report.sample = CensoredSample(std::move(records));
  return report;
}

inline IngestReport ingest(const std::string& path, const DatasetSchema& schema, std::span<const std::string> groups = {})
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return ingest(in, schema, groups, path);
}

//! Minimal CSV table: header once, then rows of preformatted fields.
class CsvWriter
{
public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> columns)
    : out_(out)
    , width_(columns.size())
  {
    write_fields(columns);
  }

  class Row
  {
  public:
    explicit Row(CsvWriter& w)
      : w_(w)
    {}
    Row(const Row&) = delete;
    Row& operator=(const Row&) = delete;
    ~Row() { w_.out_ << '\n'; }

    Row& operator<<(double v) { return field(format_double(v)); }
    Row& operator<<(std::size_t v) { return field(std::to_string(v)); }
    Row& operator<<(int v) { return field(std::to_string(v)); }
    Row& operator<<(std::string_view v) { return field(v); }
    Row& operator<<(const char* v) { return field(v); }

  private:
    Row& field(std::string_view v)
    {
      if (count_++)
        w_.out_ << ',';
      w_.out_ << v;
      return *this;
    }

    CsvWriter& w_;
    std::size_t count_ = 0;
  };

  Row row() { return Row(*this); }
  std::size_t width() const noexcept { return width_; }

private:
  void write_fields(std::initializer_list<std::string_view> fields)
  {
    bool first = true;
    for (auto f : fields) {
      if (!first)
        out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
  }

  std::ostream& out_;
  std::size_t width_;
};

//! Row of the synthetic colorectal-cancer-shaped dataset.
struct ChuacRow
{
  double age = 0.0;
  double time = 0.0;
  bool delta = false;
  int stage = 0;
};

struct StageCounts
{
  int stage;
  int patients;
  int censored;
};

//! Per-stage patient and censoring counts the synthetic file reproduces.
inline constexpr std::array<StageCounts, 4> chuac_stage_counts{{
  {1, 62, 44},
  {2, 167, 92},
  {3, 133, 53},
  {4, 52, 16},
}};

//! Synthetic stand-in for the clinical data: exact per-stage counts, integer
//! ages in [25, 94], event times shortening with stage, censoring times
//! spread over a 12-year follow-up window. Times are in years.
inline std::vector<ChuacRow> synth_chuac_rows(std::uint64_t seed)
{
  RandomStream root(seed);
  std::vector<ChuacRow> rows;
  for (const auto& sc : chuac_stage_counts) {
    auto rng = root.split(static_cast<std::uint64_t>(sc.stage));
    const double mean_event = 4.0 / sc.stage;
    for (int i = 0; i < sc.patients; ++i) {
      ChuacRow r;
      r.stage = sc.stage;
      r.age = 25.0 + std::floor(70.0 * rng.uniform());
      const double u = rng.uniform_open();
      r.delta = i >= sc.censored;
      r.time = r.delta ? mean_event * (0.6 + 0.01 * (r.age - 25.0)) * -std::log(u) : 0.25 + 11.75 * u;
      rows.push_back(r);
    }
  }
  return rows;
}

inline void write_chuac_csv(std::ostream& out, std::span<const ChuacRow> rows)
{
  CsvWriter csv(out, {"age", "time", "delta", "stage"});
  for (const auto& r : rows)
    csv.row() << r.age << r.time << (r.delta ? 1 : 0) << r.stage;
}

} // namespace npcure
