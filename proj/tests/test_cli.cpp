#include "cli.hpp"
#include "emit.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>

using namespace critwalk;
using namespace critwalk::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("critwalk_cli_" + std::to_string(std::rand()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("cli_bench") {
  TEST_CASE("counterexample output") {
    const auto r = invoke({"counterexample", "--eps", "0.01"});
    REQUIRE(r.code == kOk);
    const auto doc = Json::parse(r.out);
    CHECK(doc["command"] == "counterexample");
    CHECK(std::regex_match(doc["config_digest"].get<std::string>(), std::regex("fnv1a64:[0-9a-f]{16}")));
    const auto& res = doc["results"];
    CHECK(res["p_b_gamma"] == "124971/125000");
    CHECK(res["p_sb_gamma"] == "329897/330000");
    CHECK(res["p_b_gamma_float"].get<double>() == doctest::Approx(0.999768).epsilon(1e-15));
    CHECK(res["sb_below_b"] == true);
    CHECK(res["bound_sb"] == "9997/10000");
    CHECK(r.out.find("0.99976799999999999") != std::string::npos);
  }

  TEST_CASE("chain report keys come first and in order") {
    const auto r = invoke({"thm42-check", "--profile", "const:2:2", "--law", "rademacher", "--target", "b0"});
    REQUIRE(r.code == kOk);
    const auto res = Json::parse(r.out)["results"];
    const std::vector<std::string> want{"p_b_gamma", "p_b_sgamma", "p_sb_sgamma", "cap_bound", "chain_holds",
                                        "swap_counterexample"};
    std::vector<std::string> keys;
    for (auto it = res.begin(); it != res.end(); ++it) keys.push_back(it.key());
    REQUIRE(keys.size() >= want.size());
    CHECK(std::vector<std::string>(keys.begin(), keys.begin() + 6) == want);
    CHECK(res["p_b_gamma_exact"] == "3/4");
  }

  TEST_CASE("csv schemas") {
    const auto w = invoke({"walk1d", "--law", "rademacher", "--boundary", "zero", "--grid", "4,16"});
    REQUIRE(w.code == kOk);
    CHECK(first_line(w.out) == "n,p_lower,p_upper,sqrt_n_p,stderr");
    CHECK(w.out.find("\n4,0.375,0.375,0.75,0\n") != std::string::npos);
    CHECK(w.out.find("# config_digest=fnv1a64:") != std::string::npos);
    const auto n = invoke({"network", "--profile", "const:2:4", "--law", "rademacher", "--environments", "3"});
    REQUIRE(n.code == kOk);
    CHECK(first_line(n.out) == "seed,C_eff,escape_p,bottleneck");
    const auto s = invoke({"stable", "--alpha", "1.5", "--drift", "1", "--grid", "2,4", "--episodes", "1000"});
    REQUIRE(s.code == kOk);
    CHECK(first_line(s.out) == "n,survivors,estimate,stderr,ci_low,ci_high");
    const auto rw = invoke({"rwre", "--profile", "const:1:16", "--law", "rademacher", "--depths", "4,16",
                            "--environments", "10"});
    REQUIRE(rw.code == kOk);
    CHECK(first_line(rw.out).rfind("depth,c_eff_q1", 0) == 0);
  }

  TEST_CASE("capacity report") {
    const auto r = invoke({"capacity", "--profile", "const:2:4", "--gauge", "exp:0.6931471805599453"});
    REQUIRE(r.code == kOk);
    const auto res = Json::parse(r.out)["results"];
    CHECK(res["cap_network"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(res["cap_energy"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(res["rp"].get<double>() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(res["content_by_min_level"].size() == 4);
  }

  TEST_CASE("exit codes name the offending parameter") {
    const auto unknown = invoke({"walk1d", "--bogus", "1"});
    CHECK(unknown.code == kConfigError);
    CHECK(unknown.err.find("--bogus") != std::string::npos);
    const auto bad_eps = invoke({"counterexample", "--eps", "0.5"});
    CHECK(bad_eps.code == kConfigError);
    CHECK(bad_eps.err.find("--eps") != std::string::npos);
    const auto bad_law = invoke({"walk1d", "--law", "cauchy"});
    CHECK(bad_law.code == kConfigError);
    CHECK(bad_law.err.find("--law") != std::string::npos);
    const auto bad_gauge = invoke({"capacity", "--profile", "const:2:3", "--gauge", "tab:0.5,0.9,0.4"});
    CHECK(bad_gauge.code == kConfigError);
    CHECK(bad_gauge.err.find("--gauge") != std::string::npos);
    CHECK(invoke({"nosuch"}).code == kConfigError);
    CHECK(invoke({}).code == kConfigError);
    const auto big = invoke({"rwre", "--profile", "const:2:40", "--depths", "40"});
    CHECK(big.code == kComputeError);
    CHECK(big.err.find("vertices") != std::string::npos);
  }

  TEST_CASE("strict config files") {
    TempDir dir;
    const auto good = dir.file("good.json");
    write_file(good, R"({"eps": "1/20", "format": "json"})");
    const auto r = invoke({"counterexample", "--config", good});
    REQUIRE(r.code == kOk);
    CHECK(Json::parse(r.out)["results"]["eps"] == "1/20");
    const auto over = invoke({"counterexample", "--config", good, "--eps", "1/10"});
    REQUIRE(over.code == kOk);
    CHECK(Json::parse(over.out)["results"]["eps"] == "1/10");
    const auto bad = dir.file("bad.json");
    write_file(bad, R"({"eps": "1/20", "epsilon": 3})");
    const auto b = invoke({"counterexample", "--config", bad});
    CHECK(b.code == kConfigError);
    CHECK(b.err.find("epsilon") != std::string::npos);
    CHECK(b.out.empty());
    const auto broken = dir.file("broken.json");
    write_file(broken, "{not json");
    CHECK(invoke({"counterexample", "--config", broken}).code == kConfigError);
    CHECK(invoke({"counterexample", "--config", dir.file("missing.json")}).code == kConfigError);
  }

  TEST_CASE("resolved config and digest") {
    const auto r = invoke({"network", "--profile", "const:2:3", "--environments", "2", "--format", "json", "--seed", "5"});
    REQUIRE(r.code == kOk);
    const auto doc = Json::parse(r.out);
    CHECK(doc["config"]["seed"] == 5);
    CHECK(doc["config_digest"] == config_digest(doc["config"]));
    const auto t = invoke({"network", "--profile", "const:2:3", "--environments", "2", "--format", "json", "--seed", "5",
                           "--threads", "3"});
    CHECK(Json::parse(t.out)["config_digest"] == doc["config_digest"]);
    const auto other = invoke({"network", "--profile", "const:2:3", "--environments", "2", "--format", "json", "--seed", "6"});
    CHECK(Json::parse(other.out)["config_digest"] != doc["config_digest"]);
  }

  TEST_CASE("seed from the environment") {
    ::setenv(kSeedEnv, "777", 1);
    const auto r = invoke({"stable", "--grid", "2", "--episodes", "100", "--format", "json"});
    ::unsetenv(kSeedEnv);
    REQUIRE(r.code == kOk);
    CHECK(Json::parse(r.out)["config"]["seed"] == 777);
    const auto d = invoke({"stable", "--grid", "2", "--episodes", "100", "--format", "json"});
    CHECK(Json::parse(d.out)["config"]["seed"] == kDefaultSeed);
  }

  TEST_CASE("outputs are byte identical across worker counts") {
    TempDir dir;
    const std::vector<std::vector<std::string>> cmds = {
        {"network", "--profile", "const:2:6", "--law", "gauss:0:1", "--environments", "20"},
        {"rwre", "--profile", "const:1:64", "--law", "rademacher", "--depths", "16,64", "--environments", "20"},
        {"rwre", "--mode", "walk", "--profile", "const:2:8", "--law", "rademacher", "--depths", "2,4", "--episodes", "3000"},
        {"stable", "--grid", "2,4,8", "--episodes", "20000"},
        {"walk1d", "--method", "mc", "--law", "logexp", "--grid", "8,32", "--episodes", "5000"},
        {"reinforced", "--degree", "2", "--length", "2", "--episodes", "5000"},
    };
    int idx = 0;
    for (const auto& base : cmds) {
      std::string first;
      for (const std::string threads : {"1", "3"}) {
        auto args = base;
        const auto path = dir.file(std::to_string(idx) + "_" + threads + ".out");
        args.insert(args.end(), {"--threads", threads, "--out", path});
        const auto r = invoke(args);
        REQUIRE(r.code == kOk);
        CHECK(r.out.empty());
        CHECK(fs::exists(path + ".manifest.json"));
        const auto bytes = read_file(path);
        if (first.empty()) {
          first = bytes;
        } else {
          CAPTURE(base[0]);
          CHECK(bytes == first);
        }
      }
      ++idx;
    }
  }

  TEST_CASE("manifest contents") {
    TempDir dir;
    const auto path = dir.file("c.json");
    REQUIRE(invoke({"counterexample", "--eps", "1/50", "--out", path}).code == kOk);
    const auto m = Json::parse(read_file(path + ".manifest.json"));
    CHECK(m["tool"] == "critwalk");
    CHECK(m["version"] == kToolVersion);
    const auto doc = Json::parse(read_file(path));
    CHECK(m["config_digest"] == doc["config_digest"]);
    CHECK(m.contains("wall_clock_seconds"));
  }

  TEST_CASE("number and json formatting") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(NAN) == "nan");
    Json j = Json::object();
    j["b"] = 1;
    j["a"] = std::vector<double>{0.5, INFINITY};
    CHECK(canonical_json(j) == R"({"a":[0.5,"inf"],"b":1})");
    CHECK(dump_json(j, 0) == R"({"b":1,"a":[0.5,"inf"]})");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("tables") {
    Table t{{"name", "value"}, {}};
    t.add({std::string("a,b"), 1.5});
    t.add({std::string("plain"), std::int64_t{3}});
    CHECK(t.to_csv() == "name,value\n\"a,b\",1.5\nplain,3\n");
    CHECK(t.to_json()[1]["value"] == 3);
    CHECK_THROWS(t.add({1.0}));
  }

  TEST_CASE("tree files and profiles") {
    const auto tree = build_explicit({{2}, {1, 3}});
    const auto j = tree_to_json(tree);
    CHECK(j["depth"] == 2);
    const auto back = tree_from_json(j);
    CHECK(back.level_counts() == tree.level_counts());
    CHECK_THROWS(tree_from_json(Json::parse(R"({"children": [[2]], "depth": 3})")));
    CHECK_THROWS(tree_from_json(Json::parse(R"({"children": [[2]], "extra": 1})")));
    CHECK(parse_profile("const:3:4").depth() == 4);
    CHECK(parse_profile("list:1,3/2,2").growth(2) == Rational(3, 2));
    CHECK(parse_profile("envelope:2:8").is_integral());
    CHECK_THROWS(parse_profile("const:3"));
    CHECK_THROWS(parse_profile("spiral:1:2"));
    CHECK(parse_int_list("1,2,30", "x") == std::vector<std::int64_t>{1, 2, 30});
    CHECK_THROWS(parse_int_list("1,2.5", "x"));
  }

  TEST_CASE("tree file input") {
    TempDir dir;
    const auto path = dir.file("t.json");
    write_file(path, R"({"children": [[2], [1, 2]], "depth": 2})");
    const auto r = invoke({"capacity", "--tree", path, "--gauge", "pow:0.5"});
    REQUIRE(r.code == kOk);
    const auto res = Json::parse(r.out)["results"];
    CHECK(res["vertices"] == 6);
    CHECK(res["rp"].is_null());
  }
}
