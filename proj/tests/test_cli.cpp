#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kTool = TAPE_LAB_EXECUTABLE;

int run(const std::string& args) {
  const std::string cmd = kTool.string() + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tapelab_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("generate -> simulate -> train -> evaluate") {
    const fs::path d = workdir("chain");
    const std::string p = (d / "p.csv").string(), c = (d / "d.csv").string();
    REQUIRE(run("generate --per-class 3 --points 500 --seed 2 --out " + p) == 0);
    REQUIRE(run("simulate --profiles " + p + " --out " + c + " --raw-out " + (d / "raw.csv").string()) == 0);
    REQUIRE(run("train --arch rrae --kmax 3 --epochs 4 --seed 2 --data " + p + " --dic " + c +
                " --out " + (d / "m.ckpt").string()) == 0);
    REQUIRE(run("evaluate --model " + (d / "m.ckpt").string() + " --data " + p + " --dic " + c +
                " --report " + (d / "r.json").string()) == 0);
    for (const char* f : {"raw.csv", "d.summary.json", "m.loss.csv", "r.samples.csv", "r.histogram.csv",
                          "r.boxplot.csv", "r.pairs.csv"})
      CHECK(fs::exists(d / f));

    // Every artifact names the tool, its version and the producing config.
    const auto report = nlohmann::json::parse(slurp(d / "r.json"));
    CHECK(report.at("tool") == "tape-lab");
    CHECK(report.contains("version"));
    CHECK(report.at("model").at("train_config").at("epochs") == 4);
    CHECK(slurp(p).rfind("# {", 0) == 0);
    CHECK(slurp(c).rfind("# {", 0) == 0);
    CHECK(slurp(d / "m.loss.csv").find("\"command\":\"train\"") != std::string::npos);
  }

  TEST_CASE("flags override the config file") {
    const fs::path d = workdir("config");
    {
      std::ofstream cfg(d / "gen.json");
      cfg << R"({"per_class": 2, "points": 100, "seed": 5})";
    }
    REQUIRE(run("generate --config " + (d / "gen.json").string() + " --points 120 --out " +
                (d / "p.csv").string()) == 0);
    const std::string text = slurp(d / "p.csv");
    const auto header = nlohmann::json::parse(text.substr(2, text.find('\n') - 2));
    CHECK(header.at("config").at("per_class") == 2);
    CHECK(header.at("config").at("points") == 120);
    CHECK(header.at("config").at("seed") == 5);
    {
      std::ofstream cfg(d / "bad.json");
      cfg << R"({"per_klass": 2})";
    }
    CHECK(run("generate --config " + (d / "bad.json").string() + " --out " + (d / "q.csv").string()) == 2);
  }

  TEST_CASE("worker count does not change outputs") {
    const fs::path d = workdir("jobs");
    REQUIRE(run("generate --per-class 2 --points 200 --seed 1 --out " + (d / "p.csv").string()) == 0);
    REQUIRE(run("simulate --jobs 1 --profiles " + (d / "p.csv").string() + " --out " + (d / "a.csv").string()) == 0);
    REQUIRE(run("simulate --jobs 3 --profiles " + (d / "p.csv").string() + " --out " + (d / "b.csv").string()) == 0);
    CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
    REQUIRE(std::system(("TAPE_LAB_JOBS=2 " + kTool.string() + " generate --per-class 2 --points 200 --seed 1 --out " +
                         (d / "q.csv").string())
                            .c_str()) == 0);
    CHECK(slurp(d / "p.csv") == slurp(d / "q.csv"));
  }

  TEST_CASE("exit codes") {
    const fs::path d = workdir("codes");
    CHECK(run("") == 2);
    CHECK(run("simulate --profiles " + (d / "missing.csv").string() + " --out " + (d / "x.csv").string()) == 3);
    CHECK(run("simulate --profiles x.csv --eps-z -1 --out y.csv") == 2);
    CHECK(run("train --arch nope --data a --dic b --out c") == 2);
    CHECK(run("generate --per-class 2 --eps-x 0 --out " + (d / "p.csv").string()) == 2);
    {
      std::ofstream bad(d / "bad.csv");
      bad << "id,label,spacing_um,h_0,h_1\nx,1,3,0.5,oops\n";
    }
    CHECK(run("simulate --profiles " + (d / "bad.csv").string() + " --out " + (d / "y.csv").string()) == 3);

    const std::string p = (d / "p.csv").string(), c = (d / "d.csv").string();
    REQUIRE(run("generate --per-class 2 --points 500 --out " + p) == 0);
    REQUIRE(run("simulate --profiles " + p + " --out " + c) == 0);
    CHECK(run("train --epochs 3 --optimizer gd --lr 1e300 --data " + p + " --dic " + c + " --out " +
              (d / "m.ckpt").string()) == 4);
  }
}
