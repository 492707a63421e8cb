#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "mot/io.hpp"
#include "mot/synthetic.hpp"

using namespace mot;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(MOTCLI_BIN) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string tmp_file(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/mot_io_test_") + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("samples ingestion without a declared support", "[io]") {
  const auto path = tmp_file("s1.csv", "group,x1\nA,5\nA,5\nA,10\nB,10\n");
  const auto in = read_samples_file(path);
  REQUIRE(in.support->size() == 2);
  CHECK(in.support->point(0) == Point{5.0});
  CHECK(in.support->point(1) == Point{10.0});
  REQUIRE(in.measures.size() == 2);
  CHECK(in.group_names == std::vector<std::string>{"A", "B"});
  CHECK(in.measures[0].weight(0) == Catch::Approx(2.0 / 3.0));
  CHECK(in.measures[0].weight(1) == Catch::Approx(1.0 / 3.0));
  CHECK(in.measures[1].weight(0) == 0.0);
  CHECK(in.measures[1].weight(1) == 1.0);
  CHECK(in.measures[0].sample_size() == 3);
  REQUIRE(in.raw.has_value());
  CHECK(in.raw->groups[0] == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("3D-experiment shaped samples give the 12-point support", "[io]") {
  std::string content = "group,x1,x2,x3\n";
  auto sp = experiment3d_support();
  for (std::size_t j = 0; j < sp->size(); ++j) {
    const auto& p = sp->point(j);
    content += "A," + std::to_string(int(p[0])) + "," + std::to_string(int(p[1])) +
               "," + std::to_string(int(p[2])) + "\n";
    content += "B," + std::to_string(int(p[2])) + "," + std::to_string(int(p[1])) +
               "," + std::to_string(int(p[0])) + "\n";
  }
  const auto path = tmp_file("s3d.csv", content);
  const auto in = read_samples_file(path);
  CHECK(in.support->size() > 0);
  CHECK(in.support->dim() == 3);
  double total = 0.0;
  for (double w : in.measures[0].weights()) total += w;
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("samples ingestion errors carry context", "[io]") {
  const auto bad_header = tmp_file("s2.csv", "grp,x1\nA,5\n");
  CHECK_THROWS_AS(read_samples_file(bad_header), Error);
  const auto bad_number = tmp_file("s3.csv", "group,x1\nA,abc\n");
  try {
    read_samples_file(bad_number);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::parse_error);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);  // line number
  }
  // Declared support that misses an observed row.
  const auto sup = tmp_file("sup.csv", "x1\n5\n");
  const auto samples = tmp_file("s4.csv", "group,x1\nA,5\nA,10\n");
  CHECK_THROWS_AS(read_samples_file(samples, read_support_file(sup)), Error);
  // Duplicate support point.
  const auto dup = tmp_file("sup2.csv", "x1\n5\n5\n");
  CHECK_THROWS_AS(read_support_file(dup), Error);
}

TEST_CASE("measures file ingestion and validation", "[io]") {
  const auto good = tmp_file("m1.json",
                             R"({"support": [[5],[10]],
                                 "groups": [{"name":"g1","weights":[0.6,0.4],"n":100},
                                            {"name":"g2","weights":[0.3,0.7],"n":200}]})");
  const auto in = read_measures_file(good);
  CHECK(in.support->size() == 2);
  CHECK(in.measures[0].sample_size() == 100);
  CHECK_FALSE(in.raw.has_value());

  const auto bad = tmp_file("m2.json",
                            R"({"support": [[5],[10]],
                                "groups": [{"name":"g1","weights":[0.6,0.5]}]})");
  try {
    read_measures_file(bad);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::parse_error);
  }
}

TEST_CASE("cli mot produces the expected document", "[io]") {
  const auto samples = tmp_file("cli1.csv", "group,x1\nA,5\nA,5\nA,10\nB,10\n");
  const auto res = run_cli("mot --samples " + samples);
  REQUIRE(res.exit_code == 0);
  const Json doc = Json::parse(res.output);
  CHECK(doc["results"]["mot_value"].get<double>() ==
        Catch::Approx(25.0 / 6.0).margin(1e-9));
  CHECK(doc["support"]["N"] == 2);
}

TEST_CASE("cli result documents round-trip and reproduce", "[io]") {
  const auto meas = tmp_file("cli2.json",
                             R"({"support": [[5],[10]],
                                 "groups": [{"name":"g1","weights":[0.6,0.4],"n":400},
                                            {"name":"g2","weights":[0.3,0.7],"n":400}]})");
  const std::string out1 = "/tmp/mot_io_test_out1.json";
  const std::string out2 = "/tmp/mot_io_test_out2.json";
  const std::string args = "test --measures " + meas +
                           " --alpha 0.05 --replicates 40 --seed 5 --out ";
  REQUIRE(run_cli(args + out1).exit_code == 0);
  REQUIRE(run_cli(args + out2).exit_code == 0);
  const std::string text1 = slurp(out1);
  CHECK(text1 == slurp(out2));
  // Lossless serialization round-trip.
  const Json doc = Json::parse(text1);
  CHECK(Json::parse(doc.dump(2)) == doc);
  CHECK(doc["results"]["decision"] == "reject");
}

TEST_CASE("cli exit codes distinguish validation from success", "[io]") {
  CHECK(run_cli("mot --samples /nonexistent.csv").exit_code == 2);
  const auto samples = tmp_file("cli3.csv", "group,x1\nA,5\nB,10\n");
  CHECK(run_cli("mot --samples " + samples + " --measures " + samples).exit_code == 2);
  // Budget violations surface as validation errors.
  CHECK(run_cli("mot --samples " + samples + " --lp-mode dense --memory-budget 2")
            .exit_code == 2);
  // Permutation needs raw samples.
  const auto meas = tmp_file("cli4.json",
                             R"({"support": [[5],[10]],
                                 "groups": [{"name":"g1","weights":[0.6,0.4],"n":50},
                                            {"name":"g2","weights":[0.4,0.6],"n":50}]})");
  const auto res = run_cli("test --measures " + meas + " --method permutation");
  CHECK(res.exit_code == 2);
  const Json err = Json::parse(res.output);
  CHECK(err.contains("error"));
}

TEST_CASE("cli permutation test runs on samples", "[io]") {
  std::string content = "group,x1\n";
  for (int i = 0; i < 12; ++i) content += "A,5\n";
  for (int i = 0; i < 12; ++i) content += "B,10\n";
  const auto samples = tmp_file("cli5.csv", content);
  const auto res = run_cli("test --samples " + samples +
                           " --method permutation --permutations 99 --alpha 0.05 --seed 2");
  REQUIRE(res.exit_code == 0);
  const Json doc = Json::parse(res.output);
  CHECK(doc["results"]["p_value"].get<double>() <= 0.05);
  CHECK(doc["results"]["decision"] == "reject");
}

TEST_CASE("cli power grid matches the corollary arithmetic", "[io]") {
  const auto res =
      run_cli("power --ctilde 25 --alpha 0.05 --n-grid 50,800 --delta-grid 25");
  REQUIRE(res.exit_code == 0);
  const Json doc = Json::parse(res.output);
  const auto& pts = doc["results"]["points"];
  REQUIRE(pts.size() == 2);
  CHECK(pts[0]["bound"].get<double>() < 0.01);
  CHECK(pts[1]["bound"].get<double>() > 0.999);
}

TEST_CASE("cli simulate emits lemma-consistent truth values", "[io]") {
  const auto res = run_cli(
      "simulate --family sparse --k 3 --n-grid 60 --trials 2 --replicates 20 "
      "--separation 1.5 --seed 4 --method ub0");
  REQUIRE(res.exit_code == 0);
  const Json doc = Json::parse(res.output);
  const double truth = doc["results"]["truth_mot"].get<double>();
  const double w2 = doc["results"]["w2_squared_ab"].get<double>();
  CHECK(truth == Catch::Approx(2.0 / 9.0 * w2).margin(1e-9));
}

TEST_CASE("cli lazy override agrees with dense", "[io]") {
  const auto samples = tmp_file("cli6.csv", "group,x1\nA,5\nA,10\nB,10\nB,5\nB,10\n");
  const auto dense = run_cli("mot --samples " + samples);
  const auto lazy = run_cli("mot --samples " + samples + " --lp-mode lazy");
  REQUIRE(dense.exit_code == 0);
  REQUIRE(lazy.exit_code == 0);
  const double vd = Json::parse(dense.output)["results"]["mot_value"].get<double>();
  const double vl = Json::parse(lazy.output)["results"]["mot_value"].get<double>();
  CHECK(vd == Catch::Approx(vl).margin(1e-8));
  CHECK(Json::parse(lazy.output)["results"]["lazy_mode"] == true);
}

TEST_CASE("replicate summary is self-consistent", "[io]") {
  const std::vector<double> values = {1.0, 2.0, 3.0, 4.0};
  const Json j = replicate_summary(values, 1);
  CHECK(j["count"] == 4);
  CHECK(j["failures"] == 1);
  CHECK(j["mean"].get<double>() == Catch::Approx(2.5));
  CHECK(j["quantiles"]["0.500000"].get<double>() == 2.0);
}
