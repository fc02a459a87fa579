#include "npcure/npcure.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace npcure;

namespace {

class Cli : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() / ("npcure_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  //! Runs the CLI with `args`; returns its exit status. Stderr goes to err.txt.
  int run(const std::string& args, const std::string& env = "")
  {
    const std::string cmd = env + " " + std::string(NPCURE_CLI) + " " + args + " 2> " + (dir_ / "err.txt").string() +
                            " > " + (dir_ / "stdout.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p)
  {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& content) const
  {
    std::ofstream(path(name), std::ios::binary) << content;
  }

  fs::path dir_;
};

} // namespace

TEST_F(Cli, SimulateIsDeterministic)
{
  ASSERT_EQ(run("simulate --model 1 --n 1000 --seed 7 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("simulate --model 1 --n 1000 --seed 7 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.csv.meta.json")), slurp(path("b.csv.meta.json")));
  ASSERT_EQ(run("simulate --model 1 --n 1000 --seed 8 --out " + path("c.csv")), 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, SimulateMatchesLibrary)
{
  ASSERT_EQ(run("simulate --model 2 --n 5 --seed 3 --out " + path("s.csv")), 0);
  auto rng = trial_stream(3, 0);
  const auto s = generate(model2(), 5, rng);
  std::ostringstream expected;
  expected << "trial,x,time,delta\n";
  for (const auto& r : s.records())
    expected << "0," << format_double(r.x) << ',' << format_double(r.t) << ',' << (r.delta ? 1 : 0) << '\n';
  EXPECT_EQ(slurp(path("s.csv")), expected.str());
}

TEST_F(Cli, EstimateFixedBandwidthMatchesLibraryByteForByte)
{
  write("toy.csv", "age,time,delta\n40,1,1\n42,2,0\n");
  ASSERT_EQ(run("estimate --data " + path("toy.csv") + " --x 41 --h 5 --time-points 3 --out " + path("e.csv")), 0);
  const CensoredSample s({{40.0, 1.0, true}, {42.0, 2.0, false}});
  const auto fit = latency_estimate(s, 41.0, 5.0);
  const auto times = uniform_grid(0.0, fit.t_max1, 3);
  std::ostringstream expected;
  expected << "x,h,incidence,t,latency,status\n";
  for (double t : times)
    expected << "41,5," << format_double(fit.incidence) << ',' << format_double(t) << ','
             << format_double(fit.latency(t)) << ",ok\n";
  EXPECT_EQ(slurp(path("e.csv")), expected.str());
}

TEST_F(Cli, EstimateThreeAgesWithGrouping)
{
  ASSERT_EQ(run("synth-data --seed 4 --out " + path("chuac.csv")), 0);
  ASSERT_EQ(run("estimate --data " + path("chuac.csv") +
                  " --col-group stage --group 1 --group 2 --x 35 --x 50 --x 80 --B 10 --grid 10:60:5 --seed 2 --out " +
                  path("curves.csv")),
            0);
  std::ifstream in(path("curves.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,h,incidence,t,latency,status");
  std::set<std::string> xs;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    xs.insert(line.substr(0, line.find(',')));
    ++rows;
  }
  EXPECT_EQ(xs, (std::set<std::string>{"35", "50", "80"}));
  EXPECT_EQ(rows, 600u);
  const auto err = slurp(path("err.txt"));
  EXPECT_NE(err.find("kept 229"), std::string::npos) << err;
  const auto meta = slurp(path("curves.csv.meta.json"));
  EXPECT_NE(meta.find("\"rows_kept\": 229"), std::string::npos);
}

TEST_F(Cli, CensoringPercentOfSyntheticFile)
{
  ASSERT_EQ(run("synth-data --seed 1 --out " + path("chuac.csv")), 0);
  ASSERT_EQ(run("estimate --data " + path("chuac.csv") + " --x 60 --h 20 --out " + path("o.csv")), 0);
  EXPECT_NE(slurp(path("err.txt")).find("read 414 rows, kept 414, censored 205 (49.52%)"), std::string::npos)
    << slurp(path("err.txt"));
}

TEST_F(Cli, MissingInputLeavesNoOutput)
{
  const int code = run("estimate --data " + path("nope.csv") + " --x 1 --h 2 --out " + path("out.csv"));
  EXPECT_EQ(code, 3);
  EXPECT_FALSE(fs::exists(path("out.csv")));
  EXPECT_FALSE(fs::exists(path("out.csv.meta.json")));
}

TEST_F(Cli, BadDeltaIsADataError)
{
  write("bad.csv", "age,time,delta\n40,1,1\n41,2,2\n");
  EXPECT_EQ(run("estimate --data " + path("bad.csv") + " --x 41 --h 5 --out " + path("o.csv")), 3);
  EXPECT_NE(slurp(path("err.txt")).find(":3:"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("o.csv")));
}

TEST_F(Cli, ConfigErrorsExitWithCode2)
{
  EXPECT_EQ(run("simulate --model 3 --out " + path("o.csv")), 2);
  EXPECT_EQ(run("simulate --bogus 1"), 2);
  EXPECT_EQ(run("selectbw --model 1 --n 50 --x 5 --grid 5:1:3 --out " + path("o.csv")), 2);
  EXPECT_NE(slurp(path("err.txt")).find("--grid"), std::string::npos);
  EXPECT_EQ(run("oracle --model 1 --t 1 --out " + path("o.csv")), 2);
}

TEST_F(Cli, NumericalFailureExitsWithCode4)
{
  // x far from every covariate: empty neighborhood at every requested value.
  write("toy.csv", "age,time,delta\n40,1,1\n42,2,0\n");
  EXPECT_EQ(run("estimate --data " + path("toy.csv") + " --x 90 --h 1 --out " + path("o.csv")), 4);
  EXPECT_EQ(run("oracle --model 1 --t inf --x 15 --h 5 --out " + path("o.csv")), 4);
}

TEST_F(Cli, EstimateKeepsGoingPastAFailingCovariate)
{
  write("toy.csv", "age,time,delta\n40,1,1\n42,2,0\n");
  ASSERT_EQ(run("estimate --data " + path("toy.csv") + " --x 90 --x 41 --h 5 --time-points 2 --out " + path("o.csv")), 0);
  const auto out = slurp(path("o.csv"));
  EXPECT_NE(out.find("90,nan,nan,nan,nan,empty neighborhood"), std::string::npos) << out;
  EXPECT_NE(out.find(",ok\n"), std::string::npos);
}

TEST_F(Cli, SelectbwReturnsGridMember)
{
  ASSERT_EQ(run("selectbw --model 1 --n 100 --x 5 --B 10 --grid 5:100:7 --seed 3 --out " + path("s.csv")), 0);
  const auto grid = log_grid(5.0, 100.0, 7);
  std::ifstream in(path("s.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,h,mise_star,failures,selected");
  int selected = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string x, h, v, f, sel;
    std::getline(ss, x, ',');
    std::getline(ss, h, ',');
    std::getline(ss, v, ',');
    std::getline(ss, f, ',');
    std::getline(ss, sel, ',');
    const double hv = *parse_double(h);
    EXPECT_NE(std::find(grid.begin(), grid.end(), hv), grid.end());
    selected += sel == "1";
  }
  EXPECT_EQ(selected, 1);
}

TEST_F(Cli, OracleRowRecomposes)
{
  ASSERT_EQ(run("oracle --model 1 --t 1 --x 5 --h 10 --n 100 --out " + path("o.csv")), 0);
  std::ifstream in(path("o.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::vector<std::string> names, values;
  for (std::stringstream ss(header); std::getline(ss, row, ',');)
    names.push_back(row);
  in.clear();
  in.seekg(0);
  std::getline(in, header);
  std::getline(in, row);
  std::stringstream ss(row);
  for (std::string f; std::getline(ss, f, ',');)
    values.push_back(f);
  ASSERT_EQ(names.size(), values.size());
  auto get = [&](const std::string& n) {
    return *parse_double(values[static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin())]);
  };
  EXPECT_EQ(get("amse"), get("bias_term") + get("variance_term"));
}

TEST_F(Cli, SidecarConfigReproducesOutput)
{
  ASSERT_EQ(run("mise --model 1 --n 60 --m 4 --x 5 --grid 5:50:4 --seed 9 --threads 2 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("mise --config " + path("a.csv.meta.json") + " --threads 1 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.csv.meta.json")), slurp(path("b.csv.meta.json")));
}

TEST_F(Cli, FlatConfigFileAndCommandLinePrecedence)
{
  write("cfg.json", R"({"model": 2, "n": 20, "seed": 5})");
  ASSERT_EQ(run("simulate --config " + path("cfg.json") + " --seed 6 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("simulate --model 2 --n 20 --seed 6 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(Cli, OutputDirectoryFromEnvironment)
{
  ASSERT_EQ(run("synth-data --seed 1 --format json", "NPCURE_OUTPUT_DIR=" + path("outdir")), 0);
  EXPECT_TRUE(fs::exists(path("outdir/synth-data.json")));
  EXPECT_TRUE(fs::exists(path("outdir/synth-data.json.meta.json")));
  EXPECT_EQ(slurp(path("outdir/synth-data.json")).substr(0, 1), "[");
}

TEST_F(Cli, FullScaleRecordsEffectiveValues)
{
  ASSERT_EQ(run("mise --model 1 --n 30 --m 2 --x 5 --grid 5:50:3 --full-scale --out " + path("a.csv")), 0);
  const auto meta = slurp(path("a.csv.meta.json"));
  EXPECT_NE(meta.find("\"B\": \"200\""), std::string::npos) << meta;
  EXPECT_NE(meta.find("\"m\": \"2\""), std::string::npos) << meta;
  EXPECT_EQ(meta.find("full-scale"), std::string::npos);
}
