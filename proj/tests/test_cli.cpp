#include <doctest.h>

#include "approx.hpp"

#include "bohmsim/cli.hpp"
#include "bohmsim/config_io.hpp"
#include "test_support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace bohmsim;
using bohmsim::testing::rel_approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir()
  {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("bohmsim_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir()
  {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args)
{
  args.insert(args.begin(), "bohmsim");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_cheap_config(const fs::path& dir, std::size_t trajectories)
{
  ExperimentConfig cfg = bohmsim::testing::cheap_config();
  cfg.sampling.trajectories = trajectories;
  cfg.sampling.export_trajectories = 5;
  const fs::path p = dir / "cheap.json";
  std::ofstream(p) << config_to_json(cfg).dump(2);
  return p;
}

} // namespace

TEST_CASE("config documents round trip")
{
  ExperimentConfig cfg = bohmsim::testing::cheap_config();
  cfg.scenario = ScenarioKind::BB;
  cfg.sampling.seed = 1234567890123ULL;
  cfg.integrator.near_field = NearField::Direct;
  const json doc = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(doc);
  CHECK(config_to_json(back) == doc);
  CHECK(back.scenario == ScenarioKind::BB);
  CHECK(back.sampling.seed == 1234567890123ULL);
  CHECK(back.layout.explicit_apertures->size() == 2);

  // defaults survive a round trip, and a manifest-shaped document is accepted
  const json defaults = config_to_json(ExperimentConfig{});
  CHECK(config_to_json(config_from_json(json{{"config", defaults}})) == defaults);
  CHECK(config_from_json(json::object()).layout.b_slits == 100);
  CHECK(config_from_json(json{{"species", "point"}}).species.diameter == 0.0);
}

TEST_CASE("config errors are reported")
{
  CHECK_THROWS_AS(config_from_json(json{{"bream", json::object()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"beam", {{"sigma", 1e-6}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"beam", {{"sigma0", "wide"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"beam", {{"sigma0", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"scenario", "sa9"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"apertures", json::array()}, {"slits", json::object()}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
}

TEST_CASE("set_config_path")
{
  json doc = json::object();
  set_config_path(doc, "beam.v_y", 150.0);
  set_config_path(doc, "scenario", "bb");
  CHECK(doc["beam"]["v_y"] == 150.0);
  CHECK(config_from_json(doc).beam.v_y == 150.0);
  CHECK_THROWS_AS(set_config_path(doc, "", 1), ConfigError);
  CHECK_THROWS_AS(set_config_path(doc, "beam..v_y", 1), ConfigError);
  CHECK_THROWS_AS(set_config_path(doc, "scenario.x", 1), ConfigError);
}

TEST_CASE("argument and scenario errors exit with status 2")
{
  TempDir tmp;
  const Outcome bad = run_cli({"simulate", "--scenario", "sa7", "--out", tmp.path.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("sa1") != std::string::npos);
  CHECK(run_cli({"simulate"}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"simulate", "--windows", "side", "--out", tmp.path.string()}).code == 2);
  CHECK(run_cli({"simulate", "--threads", "0", "--out", tmp.path.string()}).code == 2);
  CHECK(run_cli({"simulate", "--config", (tmp.path / "missing.json").string(), "--out",
                 tmp.path.string()})
            .code == 4);
}

TEST_CASE("an output path that cannot be created exits with status 4")
{
  TempDir tmp;
  const fs::path file = tmp.path / "plain_file";
  std::ofstream(file) << "x";
  const fs::path cfg = write_cheap_config(tmp.path, 4);
  const Outcome r = run_cli({"simulate", "--config", cfg.string(), "--out", (file / "sub").string()});
  CHECK(r.code == 4);
}

TEST_CASE("simulate writes the artifacts and a manifest that reproduces them")
{
  TempDir tmp;
  const fs::path cfg = write_cheap_config(tmp.path, 40);
  const fs::path a = tmp.path / "a";
  const Outcome r = run_cli({"simulate", "--config", cfg.string(), "--seed", "9", "--out", a.string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"wavefield_global.csv", "wavefield_zoom.csv", "trajectories.csv",
                        "histogram.csv", "manifest.json"})
    CHECK(fs::exists(a / f));
  const json m = read_json_file(a / "manifest.json");
  CHECK(m["seed"] == 9);
  CHECK(m["scenario"] == "sa1");
  CHECK(m["metrics"]["oracle_check"]["relative_l2"].get<double>() < 1e-6);
  CHECK(m["fates"].size() == 5);
  CHECK(slurp(a / "histogram.csv").rfind("# ", 0) == 0);

  const fs::path b = tmp.path / "b";
  const Outcome again =
      run_cli({"simulate", "--config", (a / "manifest.json").string(), "--out", b.string()});
  REQUIRE(again.code == 0);
  for (const char* f :
       {"wavefield_global.csv", "wavefield_zoom.csv", "trajectories.csv", "histogram.csv"})
    CHECK(slurp(a / f) == slurp(b / f));
  CHECK(read_json_file(b / "manifest.json")["config"] == m["config"]);

  const Outcome cmp = run_cli({"compare", "--run", a.string()});
  REQUIRE(cmp.code == 0);
  const json c = read_json_file(a / "compare.json");
  CHECK(c["tv_distance"].get<double>() >= 0.0);
  CHECK(c["tv_distance"].get<double>() < 0.3);
  CHECK(c.contains("peaks"));
}

TEST_CASE("seed precedence: flag over environment over config")
{
  TempDir tmp;
  const fs::path cfg = write_cheap_config(tmp.path, 2);
  ::setenv("BOHMSIM_SEED", "77", 1);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (tmp.path / "e").string()}).code == 0);
  CHECK(read_json_file(tmp.path / "e" / "manifest.json")["seed"] == 77);
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--seed", "5", "--out",
                   (tmp.path / "f").string()})
              .code == 0);
  CHECK(read_json_file(tmp.path / "f" / "manifest.json")["seed"] == 5);
  ::setenv("BOHMSIM_SEED", "seven", 1);
  CHECK(run_cli({"simulate", "--config", cfg.string(), "--out", (tmp.path / "g").string()}).code == 2);
  ::unsetenv("BOHMSIM_SEED");
  REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--out", (tmp.path / "h").string()}).code == 0);
  CHECK(read_json_file(tmp.path / "h" / "manifest.json")["seed"] == 1);
}

TEST_CASE("SA2 and BB runs on the default layout")
{
  TempDir tmp;
  const Outcome sa2 = run_cli({"simulate", "--scenario", "sa2", "--trajectories", "20", "--windows",
                               "global", "--out", (tmp.path / "sa2").string()});
  INFO(sa2.err);
  REQUIRE(sa2.code == 0);
  CHECK_FALSE(fs::exists(tmp.path / "sa2" / "wavefield_zoom.csv"));
  const json m2 = read_json_file(tmp.path / "sa2" / "manifest.json");
  CHECK(m2["fates"]["TransmittedB"] == 0);
  CHECK(m2["metrics"]["predicted_peak_count"] == 1);

  const Outcome bb = run_cli({"simulate", "--scenario", "bb", "--trajectories", "40", "--out",
                              (tmp.path / "bb").string()});
  REQUIRE(bb.code == 0);
  const json mb = read_json_file(tmp.path / "bb" / "manifest.json");
  CHECK(mb["fates"]["BlockedBySize"].get<int>() > 0);
  CHECK(mb["fates"]["TransmittedB"] == 0);
}

TEST_CASE("sweep writes one run per value")
{
  TempDir tmp;
  const fs::path cfg = write_cheap_config(tmp.path, 4);
  const Outcome r = run_cli({"sweep", "--config", cfg.string(), "--param", "beam.v_y", "--values",
                             "180,220", "--windows", "global", "--out", (tmp.path / "s").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const json idx = read_json_file(tmp.path / "s" / "sweep.json");
  REQUIRE(idx["runs"].size() == 2);
  const std::string d0 = idx["runs"][0]["directory"];
  CHECK(read_json_file(tmp.path / "s" / d0 / "manifest.json")["config"]["beam"]["v_y"] == 180.0);
}
