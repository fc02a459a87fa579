#include "npcure/npcure.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace {

using json = nlohmann::ordered_json;
using npcure::Error;
using npcure::ErrorKind;

enum ExitCode
{
  exit_ok = 0,
  exit_other = 1,
  exit_config = 2,
  exit_data = 3,
  exit_numerical = 4,
};

struct Options
{
  int model = 1;
  std::size_t n = 100;
  std::size_t m = 100;
  std::size_t samples = 1;
  std::size_t resamples = 100;
  std::string grid = "5:100:35";
  std::string grid2;
  std::vector<double> xs;
  std::vector<double> ts;
  std::string h = "auto";
  double pilot_c = 0.75;
  std::optional<double> pilot;
  std::optional<double> weight_upper;
  std::size_t time_points = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  std::string data;
  npcure::DatasetSchema schema;
  std::string col_group;
  std::string delimiter = ",";
  bool no_header = false;
  std::vector<std::string> groups;
  std::string mode = "curve";
  std::string composition = "corrected";
  bool full_scale = false;
  unsigned threads = 0;
};

//! A result table, serialized as CSV or as a JSON array of row objects.
struct Table
{
  using Cell = std::variant<double, long long, std::string>;

  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string csv_field(const Table::Cell& c)
{
  if (const auto* d = std::get_if<double>(&c))
    return npcure::format_double(*d);
  if (const auto* i = std::get_if<long long>(&c))
    return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"')
      quoted += '"';
    quoted += ch;
  }
  return quoted + '"';
}

std::string render(const Table& table, const std::string& format)
{
  std::ostringstream out;
  if (format == "json") {
    json rows = json::array();
    for (const auto& r : table.rows) {
      json obj = json::object();
      for (std::size_t k = 0; k < r.size(); ++k) {
        const auto& c = r[k];
        if (const auto* d = std::get_if<double>(&c))
          obj[table.columns[k]] = std::isfinite(*d) ? json(*d) : json(nullptr);
        else if (const auto* i = std::get_if<long long>(&c))
          obj[table.columns[k]] = *i;
        else
          obj[table.columns[k]] = std::get<std::string>(c);
      }
      rows.push_back(std::move(obj));
    }
    out << rows.dump(2) << '\n';
    return out.str();
  }
  for (std::size_t k = 0; k < table.columns.size(); ++k)
    out << (k ? "," : "") << table.columns[k];
  out << '\n';
  for (const auto& r : table.rows) {
    for (std::size_t k = 0; k < r.size(); ++k)
      out << (k ? "," : "") << csv_field(r[k]);
    out << '\n';
  }
  return out.str();
}

struct RunResult
{
  Table table;
  json report = json::object();
};

npcure::BandwidthGrid parse_grid(const std::string& spec, const std::string& flag)
{
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');)
    parts.push_back(part);
  if (parts.size() != 3)
    throw Error(ErrorKind::invalid_argument, flag + " must look like lo:hi:count, got '" + spec + "'");
  const auto lo = npcure::parse_double(parts[0]);
  const auto hi = npcure::parse_double(parts[1]);
  const auto count = npcure::parse_double(parts[2]);
  if (!lo || !hi || !count || *count < 1 || *count != std::floor(*count))
    throw Error(ErrorKind::invalid_argument, flag + " must look like lo:hi:count, got '" + spec + "'");
  try {
    return npcure::log_grid(*lo, *hi, static_cast<std::size_t>(*count));
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_argument, flag + ": " + e.what());
  }
}

npcure::BootstrapConfig bootstrap_config(const Options& o)
{
  npcure::BootstrapConfig cfg;
  cfg.resamples = o.resamples;
  cfg.grid = parse_grid(o.grid, "--grid");
  cfg.pilot_c = o.pilot_c;
  cfg.pilot = o.pilot;
  cfg.weight_upper = o.weight_upper;
  cfg.time_grid_size = o.time_points ? o.time_points : 100;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_argument, std::string("bootstrap settings (--B, --pilot-c, --pilot, --weight-upper, "
                                                         "--time-points): ") + e.what());
  }
  return cfg;
}

npcure::ExperimentConfig experiment_config(const Options& o)
{
  npcure::ExperimentConfig cfg;
  cfg.time_grid_size = o.time_points ? o.time_points : 100;
  cfg.weight_upper = o.weight_upper;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

void require_xs(const Options& o)
{
  if (o.xs.empty())
    throw Error(ErrorKind::invalid_argument, "--x: at least one covariate value is required");
}

json ingest_json(const npcure::IngestReport& r)
{
  return json{{"rows_read", r.rows_read},
              {"rows_kept", r.rows_kept},
              {"censored", r.censored},
              {"censoring_percent", r.censoring_percent()}};
}

npcure::IngestReport load_data(const Options& o)
{
  if (o.data.empty())
    throw Error(ErrorKind::invalid_argument, "--data: an input file is required");
  auto schema = o.schema;
  if (o.delimiter.size() != 1)
    throw Error(ErrorKind::invalid_argument, "--delimiter must be a single character");
  schema.delimiter = o.delimiter[0];
  schema.header = !o.no_header;
  if (!o.col_group.empty())
    schema.group = o.col_group;
  auto report = npcure::ingest(o.data, schema, o.groups);
  std::cerr << "read " << report.rows_read << " rows, kept " << report.rows_kept << ", censored " << report.censored
            << " (" << std::fixed << std::setprecision(2) << report.censoring_percent() << "%)\n"
            << std::defaultfloat;
  return report;
}

RunResult run_synth(const Options& o)
{
  RunResult r;
  r.table.columns = {"age", "time", "delta", "stage"};
  const auto rows = npcure::synth_chuac_rows(o.seed);
  std::size_t censored = 0;
  for (const auto& row : rows) {
    r.table.add({row.age, row.time, static_cast<long long>(row.delta), static_cast<long long>(row.stage)});
    censored += row.delta ? 0 : 1;
  }
  r.report = json{{"rows", rows.size()},
                  {"censored", censored},
                  {"censoring_percent", 100.0 * static_cast<double>(censored) / static_cast<double>(rows.size())}};
  return r;
}

RunResult run_simulate(const Options& o)
{
  const auto spec = npcure::model_by_number(o.model);
  const auto batch = npcure::generate_batch(spec, o.n, o.samples, o.seed);
  RunResult r;
  r.table.columns = {"trial", "x", "time", "delta"};
  json seeds = json::array();
  for (std::size_t j = 0; j < batch.samples.size(); ++j) {
    for (const auto& rec : batch.samples[j].records())
      r.table.add({static_cast<long long>(j), rec.x, rec.t, static_cast<long long>(rec.delta)});
    seeds.push_back(batch.seeds[j]);
  }
  json params = json::object();
  for (const auto& [name, value] : spec.parameters)
    params[name] = value;
  r.report = json{{"model", spec.id}, {"parameters", params}, {"trial_seeds", seeds}};
  return r;
}

RunResult run_estimate(const Options& o)
{
  require_xs(o);
  const auto data = load_data(o);
  const bool automatic = o.h == "auto";
  std::optional<double> fixed;
  if (!automatic) {
    fixed = npcure::parse_double(o.h);
    if (!fixed || !(*fixed > 0.0))
      throw Error(ErrorKind::invalid_argument, "--h must be a positive number or 'auto', got '" + o.h + "'");
  }
  const auto cfg = automatic ? bootstrap_config(o) : npcure::BootstrapConfig{};
  const std::size_t points = o.time_points ? o.time_points : 200;
  if (points < 2)
    throw Error(ErrorKind::invalid_argument, "--time-points must be at least 2");

  RunResult r;
  r.table.columns = {"x", "h", "incidence", "t", "latency", "status"};
  r.report["ingest"] = ingest_json(data);
  json per_x = json::array();
  std::size_t failed = 0;
  for (double x : o.xs) {
    try {
      double h = 0.0;
      json info{{"x", x}};
      if (fixed) {
        h = *fixed;
      } else {
        const auto curve = npcure::mise_star(data.sample, x, cfg);
        h = curve.selected();
        info["pilot"] = curve.pilot;
        info["failed_resamples_at_selected"] = curve.failures[curve.argmin_index];
      }
      const auto fit = npcure::latency_estimate(data.sample, x, h);
      const auto times = npcure::uniform_grid(0.0, fit.t_max1, points);
      const auto values = fit.latency.evaluate(times);
      for (std::size_t k = 0; k < times.size(); ++k)
        r.table.add({x, h, fit.incidence, times[k], values[k], std::string("ok")});
      info["h"] = h;
      per_x.push_back(std::move(info));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_argument)
        throw;
      ++failed;
      std::cerr << "x = " << x << ": " << e.what() << '\n';
      const double nan = std::numeric_limits<double>::quiet_NaN();
      r.table.add({x, nan, nan, nan, nan, std::string(e.what())});
      per_x.push_back(json{{"x", x}, {"error", e.what()}});
    }
  }
  r.report["covariates"] = per_x;
  if (failed == o.xs.size())
    throw Error(ErrorKind::all_failed, "estimation failed at every requested covariate value");
  return r;
}

npcure::CensoredSample selectbw_sample(const Options& o, RunResult& r)
{
  if (!o.data.empty()) {
    auto data = load_data(o);
    r.report["ingest"] = ingest_json(data);
    return std::move(data.sample);
  }
  const auto spec = npcure::model_by_number(o.model);
  auto rng = npcure::trial_stream(o.seed, 0);
  r.report["generated"] = json{{"model", spec.id}, {"n", o.n}, {"stream", rng.key()}};
  return npcure::generate(spec, o.n, rng);
}

RunResult run_selectbw(const Options& o)
{
  require_xs(o);
  const auto cfg = bootstrap_config(o);
  RunResult r;
  const auto sample = selectbw_sample(o, r);
  r.table.columns = {"x", "h", "mise_star", "failures", "selected"};
  json per_x = json::array();
  for (double x : o.xs) {
    const auto curve = npcure::mise_star(sample, x, cfg);
    for (std::size_t l = 0; l < curve.grid.size(); ++l)
      r.table.add({x, curve.grid[l], curve.values[l], static_cast<long long>(curve.failures[l]),
                   static_cast<long long>(l == curve.argmin_index)});
    per_x.push_back(json{{"x", x}, {"h_star", curve.selected()}, {"pilot", curve.pilot},
                         {"weight_upper", curve.weight_upper}});
  }
  r.report["selections"] = per_x;
  return r;
}

RunResult run_mise(const Options& o)
{
  require_xs(o);
  const auto spec = npcure::model_by_number(o.model);
  const auto exp = experiment_config(o);
  const auto grid = parse_grid(o.grid, "--grid");
  RunResult r;
  r.report["model"] = spec.id;

  if (o.mode == "curve") {
    r.table.columns = {"x", "h", "mise", "used"};
    for (double x : o.xs) {
      const auto curve = npcure::true_mise(spec, o.n, o.m, x, grid, exp);
      for (std::size_t l = 0; l < grid.size(); ++l)
        r.table.add({x, grid[l], curve.values[l], static_cast<long long>(o.m - curve.failures[l])});
    }
  } else if (o.mode == "surface") {
    const auto grid2 = o.grid2.empty() ? grid : parse_grid(o.grid2, "--grid2");
    r.table.columns = {"x", "h1", "h2", "mise", "used"};
    json argmins = json::array();
    for (double x : o.xs) {
      const auto s = npcure::true_mise_two_bw(spec, o.n, o.m, x, grid, grid2, exp);
      for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = 0; b < grid2.size(); ++b)
          r.table.add({x, grid[a], grid2[b], s.at(a, b), static_cast<long long>(s.used(a, b))});
      const auto [a, b] = s.argmin();
      argmins.push_back(json{{"x", x}, {"h1", grid[a]}, {"h2", grid2[b]}});
    }
    r.report["argmin"] = argmins;
  } else if (o.mode == "compare") {
    const auto boot = bootstrap_config(o);
    const auto cmp = npcure::bootstrap_vs_optimal(spec, o.n, o.m, o.xs, boot, exp);
    r.table.columns = {"x", "h", "mise", "used", "selected_count"};
    json summary = json::array();
    for (const auto& c : cmp) {
      for (std::size_t l = 0; l < grid.size(); ++l)
        r.table.add({c.x, grid[l], c.mise.values[l], static_cast<long long>(o.m - c.mise.failures[l]),
                     static_cast<long long>(c.histogram[l])});
      json s{{"x", c.x}, {"h_opt", c.mise.selected()}, {"failed_trials", c.failed_trials}};
      if (!c.ratios.empty()) {
        s["median_ratio"] = c.ratio_quantile(0.5);
        s["q90_ratio"] = c.ratio_quantile(0.9);
      }
      summary.push_back(std::move(s));
    }
    r.report["comparison"] = summary;
  } else {
    throw Error(ErrorKind::invalid_argument, "--mode must be curve, surface or compare, got '" + o.mode + "'");
  }
  return r;
}

RunResult run_oracle(const Options& o)
{
  require_xs(o);
  if (o.ts.empty())
    throw Error(ErrorKind::invalid_argument, "--t: at least one time is required");
  npcure::AmseComposition comp{};
  if (o.composition == "corrected")
    comp = npcure::AmseComposition::sign_corrected;
  else if (o.composition == "published")
    comp = npcure::AmseComposition::as_published;
  else
    throw Error(ErrorKind::invalid_argument,
                "--composition must be corrected or published, got '" + o.composition + "'");
  const auto pop = npcure::population_from_model(npcure::model_by_number(o.model));
  const double n = static_cast<double>(o.n);

  RunResult r;
  r.table.columns = {"t", "x", "h", "n", "B1", "B2", "V1", "V2", "V3", "bias", "variance",
                     "bias_term", "variance_term", "amse", "richardson_change"};
  json bandwidths = json::array();
  for (double x : o.xs) {
    double h = 0.0;
    if (o.h == "auto") {
      const auto range = npcure::default_time_range(pop, x);
      h = npcure::h_amise(pop, x, n, range, {}, comp);
      bandwidths.push_back(json{{"x", x}, {"h_amise", h}, {"t_lo", range.lo}, {"t_hi", range.hi}});
    } else {
      const auto parsed = npcure::parse_double(o.h);
      if (!parsed || !(*parsed > 0.0))
        throw Error(ErrorKind::invalid_argument, "--h must be a positive number or 'auto', got '" + o.h + "'");
      h = *parsed;
    }
    for (double t : o.ts) {
      const auto a = npcure::amse(pop, t, x, h, n, {}, comp);
      r.table.add({t, x, h, n, a.terms.b1, a.terms.b2, a.terms.v1, a.terms.v2, a.terms.v3, a.bias, a.variance,
                   a.bias_term, a.variance_term, a.amse, a.terms.richardson_change});
    }
  }
  if (!bandwidths.empty())
    r.report["h_amise"] = bandwidths;
  return r;
}

//! Flat option map for the sidecar; reloadable through --config.
json echo_config(const CLI::App& sub)
{
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty())
      continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help" || name == "threads" || name == "out" || name == "config")
      continue;
    if (opt->get_expected_max() == 0) {
      if (opt->count() > 0)
        cfg[name] = true;
      continue;
    }
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1)
        cfg[name] = res;
      else
        cfg[name] = res.back();
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

//! Arguments from a flat JSON object (or a sidecar's "config" member),
//! skipping any option already given on the command line.
std::vector<std::string> config_arguments(const std::string& path, const std::vector<std::string>& given)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_argument, "config file '" + path + "': " + e.what());
  }
  if (j.contains("config") && j["config"].is_object())
    j = j["config"];
  if (!j.is_object())
    throw Error(ErrorKind::invalid_argument, "config file '" + path + "' must hold a flat JSON object");

  auto scalar = [&](const std::string& key, const json& v) -> std::string {
    if (v.is_string())
      return v.get<std::string>();
    if (v.is_number_integer())
      return std::to_string(v.get<long long>());
    if (v.is_number())
      return npcure::format_double(v.get<double>());
    throw Error(ErrorKind::invalid_argument, "config key '" + key + "' must be a string or number");
  };
  std::vector<std::string> args;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (std::find(given.begin(), given.end(), flag) != given.end())
      continue;
    if (value.is_boolean()) {
      if (value.get<bool>())
        args.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& e : value) {
        args.push_back(flag);
        args.push_back(scalar(key, e));
      }
    } else {
      args.push_back(flag);
      args.push_back(scalar(key, value));
    }
  }
  return args;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out)
    throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
}

int exit_code_for(const Error& e)
{
  switch (e.kind()) {
    case ErrorKind::invalid_argument: return exit_config;
    case ErrorKind::parse:
    case ErrorKind::io:
    case ErrorKind::empty_sample: return exit_data;
    default: return e.is_numerical() ? exit_numerical : exit_other;
  }
}

} // namespace

int main(int argc, char** argv)
{
  Options o;
  CLI::App app{"Nonparametric mixture cure model estimation and experiments"};
  // `--h` is the bandwidth, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", npcure::version);

  auto common = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Master random seed")->capture_default_str();
    s->add_option("--out", o.out, "Output file (default: $NPCURE_OUTPUT_DIR/<command>.<format>, else stdout)");
    s->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    s->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
    s->add_option("--config", "Flat JSON file of option values; command-line flags take precedence");
  };
  auto model_opts = [&](CLI::App* s) {
    s->add_option("--model", o.model, "Data-generating model")->check(CLI::IsMember({1, 2}))->capture_default_str();
    s->add_option("--n", o.n, "Sample size")->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto data_opts = [&](CLI::App* s) {
    s->add_option("--data", o.data, "Input delimited file");
    s->add_option("--col-x", o.schema.covariate, "Covariate column (name, or 1-based index)")->capture_default_str();
    s->add_option("--col-time", o.schema.time, "Observed time column")->capture_default_str();
    s->add_option("--col-delta", o.schema.delta, "Uncensoring indicator column (0/1)")->capture_default_str();
    s->add_option("--col-group", o.col_group, "Grouping column used by --group");
    s->add_option("--delimiter", o.delimiter, "Field delimiter")->capture_default_str();
    s->add_flag("--no-header", o.no_header, "Input has no header line");
    s->add_option("--group", o.groups, "Keep rows whose group column equals this value (repeatable)");
  };
  auto bootstrap_opts = [&](CLI::App* s) {
    s->add_option("--B", o.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--grid", o.grid, "Log-spaced bandwidth grid lo:hi:count")->capture_default_str();
    s->add_option("--pilot-c", o.pilot_c, "Pilot bandwidth constant")->capture_default_str();
    s->add_option("--pilot", o.pilot, "Fixed pilot bandwidth (overrides --pilot-c)");
    s->add_option("--weight-upper", o.weight_upper, "Upper end of the MISE integration range");
    s->add_flag("--full-scale", o.full_scale, "Full-study defaults: B=200 and, for mise, m=1000");
  };

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic colorectal-cancer-shaped dataset");
  common(synth);

  auto* simulate = app.add_subcommand("simulate", "Draw samples from a simulation model");
  common(simulate);
  model_opts(simulate);
  simulate->add_option("--m", o.samples, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();

  auto* estimate = app.add_subcommand("estimate", "Estimate incidence and latency at covariate values");
  common(estimate);
  data_opts(estimate);
  bootstrap_opts(estimate);
  estimate->add_option("--x", o.xs, "Covariate value (repeatable)");
  estimate->add_option("--h", o.h, "Bandwidth, or 'auto' for the bootstrap selector")->capture_default_str();
  estimate->add_option("--time-points", o.time_points, "Points on the output time grid (default 200)");

  auto* selectbw = app.add_subcommand("selectbw", "Bootstrap bandwidth selection");
  common(selectbw);
  model_opts(selectbw);
  data_opts(selectbw);
  bootstrap_opts(selectbw);
  selectbw->add_option("--x", o.xs, "Covariate value (repeatable)");
  selectbw->add_option("--time-points", o.time_points, "Points on the MISE integration grid (default 100)");

  auto* mise = app.add_subcommand("mise", "Monte Carlo MISE of the latency estimator");
  common(mise);
  model_opts(mise);
  bootstrap_opts(mise);
  mise->add_option("--m", o.m, "Monte Carlo trials")->check(CLI::PositiveNumber)->capture_default_str();
  mise->add_option("--x", o.xs, "Covariate value (repeatable)");
  mise->add_option("--grid2", o.grid2, "Second bandwidth grid for --mode surface (default: --grid)");
  mise->add_option("--mode", o.mode, "curve, surface (two bandwidths) or compare (bootstrap vs optimal)")
    ->check(CLI::IsMember({"curve", "surface", "compare"}))
    ->capture_default_str();
  mise->add_option("--time-points", o.time_points, "Points on the MISE integration grid (default 100)");

  auto* oracle = app.add_subcommand("oracle", "Asymptotic bias, variance and AMSE for a known model");
  common(oracle);
  model_opts(oracle);
  oracle->add_option("--x", o.xs, "Covariate value (repeatable)");
  oracle->add_option("--t", o.ts, "Time (repeatable; 'inf' allowed)");
  oracle->add_option("--h", o.h, "Bandwidth, or 'auto' for the AMISE-optimal bandwidth")->capture_default_str();
  oracle->add_option("--composition", o.composition, "corrected or published combination of the terms")
    ->check(CLI::IsMember({"corrected", "published"}))
    ->capture_default_str();

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    std::vector<std::string> given;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const auto& a = args[i];
      if (a.rfind("--", 0) != 0)
        continue;
      const auto eq = a.find('=');
      const std::string flag = a.substr(0, eq);
      given.push_back(flag);
      if (flag == "--config")
        config_path = eq != std::string::npos ? a.substr(eq + 1) : (i + 1 < args.size() ? args[i + 1] : "");
    }
    if (!config_path.empty()) {
      const auto extra = config_arguments(config_path, given);
      args.insert(args.end(), extra.begin(), extra.end());
    }
  } catch (const Error& e) {
    std::cerr << "npcure: " << e.what() << '\n';
    return exit_code_for(e);
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string command = active->get_name();
  // Full scale only replaces values left at their defaults; the sidecar
  // records the effective values so a rerun from it needs no flag.
  json scale_overrides = json::object();
  if (o.full_scale) {
    if (active->count("--B") == 0) {
      o.resamples = 200;
      scale_overrides["B"] = "200";
    }
    if (command == "mise" && active->count("--m") == 0) {
      o.m = 1000;
      scale_overrides["m"] = "1000";
    }
  }
  try {
    RunResult result;
    if (command == "synth-data")
      result = run_synth(o);
    else if (command == "simulate")
      result = run_simulate(o);
    else if (command == "estimate")
      result = run_estimate(o);
    else if (command == "selectbw")
      result = run_selectbw(o);
    else if (command == "mise")
      result = run_mise(o);
    else
      result = run_oracle(o);

    const std::string body = render(result.table, o.format);
    json config = echo_config(*active);
    config.erase("full-scale");
    config.update(scale_overrides);
    json meta{{"tool", "npcure"},
              {"version", npcure::version},
              {"command", command},
              {"seed", o.seed},
              {"config", config},
              {"report", result.report}};

    std::filesystem::path out = o.out;
    if (out.empty()) {
      if (const char* dir = std::getenv("NPCURE_OUTPUT_DIR"); dir && *dir)
        out = std::filesystem::path(dir) / (command + "." + o.format);
    }
    if (out.empty()) {
      std::cout << body;
      return exit_ok;
    }
    write_file(out, body);
    write_file(out.string() + ".meta.json", meta.dump(2) + "\n");
    return exit_ok;
  } catch (const Error& e) {
    std::cerr << "npcure " << command << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "npcure " << command << ": " << e.what() << '\n';
    return exit_other;
  }
}
