#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#ifndef PWAVE_CLI_PATH
#error "PWAVE_CLI_PATH must point at the built command line binary"
#endif

namespace {

namespace fs = std::filesystem;
using njson = nlohmann::json;

struct RunResult {
  int status = -1;
  std::string out;
};

// runs the binary with stderr dropped, captures stdout and the exit code
RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(PWAVE_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path write_config(const char* name, const char* text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << text;
  return p;
}

const std::string kM1 = write_config("pwave_cli_m1.json", R"({"family":"M1","f":"y^2"})").string();
const std::string kFlat =
    write_config("pwave_cli_flat.json", R"({"family":"M2","p":2,"psi":["0","0","0"]})").string();

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string& header) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  header = line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("info reports the manifold summary") {
  const auto r = run_cli("info --config " + kM1);
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["family"] == "M1");
  CHECK(j["dim"] == 6);
  CHECK(j["coords"].size() == 6);
  CHECK(j["signature"].size() == 2);
  CHECK(j["signature"][0].get<int>() + j["signature"][1].get<int>() == 6);
}

TEST_CASE("eval emits metric, connection and curvature") {
  const auto r = run_cli("eval --config " + kM1 + " --point 0.3,0.9,-0.4,0.7,0.2,-0.6");
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["g"].size() == 6);
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 6; ++k)
      CHECK(j["g"][i][k].get<double>() == doctest::Approx(j["g"][k][i].get<double>()));
  CHECK(!j["R"].empty());
  CHECK(!j["nablaR"].empty());
  for (const auto& e : j["gamma"]) {
    CHECK(e["i"].size() == 3);
    CHECK(e["v"].get<double>() != 0.0);
  }
}

TEST_CASE("invariant: scalar for one point, spread for several") {
  const auto one = run_cli("invariant --config " + kM1 + " --id alpha16 --point 0,1,0,1,0,0");
  CHECK(one.status == 0);
  CHECK(njson::parse(one.out)["alpha16"].get<double>() ==
        doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));

  const auto many = run_cli("invariant --config " + kM1 +
                            " --id alpha16 --point 0,0.2,0,1,0,0 --point 0,1,0,1,0,0");
  CHECK(many.status == 0);
  const njson j = njson::parse(many.out);
  CHECK(j["alpha16"].size() == 2);
  CHECK(j["spread"].get<double>() > 0.4);
}

TEST_CASE("boundary geodesic on a flat block is the straight line") {
  const auto r =
      run_cli("geodesic --config " + kFlat + " --from 0,0,0,0 --to 1,-0.5,0.25,2 --steps 400");
  CHECK(r.status == 0);
  std::string header;
  const auto rows = parse_csv(r.out, header);
  CHECK(header == "t,x1,x2,x3,x4,v1,v2,v3,v4");
  REQUIRE(rows.size() == 401);
  const std::vector<double> to = {1.0, -0.5, 0.25, 2.0};
  for (int k = 0; k < 4; ++k) {
    CHECK(rows.front()[1 + k] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rows.back()[1 + k] == doctest::Approx(to[k]).epsilon(1e-8));
    CHECK(rows[200][1 + k] == doctest::Approx(to[k] / 2.0).epsilon(1e-8));  // t = 1/2
  }
}

TEST_CASE("initial-value geodesic writes a file and a residual report") {
  const fs::path out = fs::temp_directory_path() / "pwave_cli_curve.csv";
  const auto r = run_cli("geodesic --config " + kM1 +
                         " --point 0.1,0.2,-0.3,0.4,0,0 --velocity 1,0.5,0,0,-0.2,0.3"
                         " --steps 500 --out " + out.string());
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["out"] == out.string());
  CHECK(j["nodes"] == 501);
  CHECK(j["residual"].get<double>() < 1e-5);

  std::ifstream in(out);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 502);  // header plus nodes
}

TEST_CASE("transport keeps the frame monic and the pairing intact") {
  const auto r = run_cli("transport --config " + kM1 +
                         " --from 0,0,0,0,0,0 --to 0.8,0.4,-0.2,0.6,0.1,-0.3"
                         " --vector 1,1,0,0,0,0 --steps 800");
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["triangular_residual"].get<double>() < 1e-7);
  CHECK(j["metric_drift"].get<double>() < 1e-7);
  CHECK(j["frame_final"].size() == 6);
  CHECK(j["vector_final"].size() == 6);
  // the transported frame rows keep a unit on the diagonal
  for (int i = 0; i < 6; ++i)
    CHECK(j["frame_final"][i][i].get<double>() == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("holonomy loops report unipotent elements") {
  const auto r = run_cli("holonomy --config " + kM1 + " --loops 3 --steps 1500 --seed 5");
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["loops"] == 3);
  CHECK(j["status"] == "pass");
  CHECK(j["max_unipotent_residual"].get<double>() <= 1e-7);
  CHECK(j["max_metric_residual"].get<double>() <= 1e-7);
  CHECK(j["matrix"].size() == 6);

  // an impossible tolerance flips the exit code
  const auto strict =
      run_cli("holonomy --config " + kM1 + " --loops 1 --steps 800 --seed 5 --tol 1e-18");
  CHECK(strict.status == 1);
  CHECK(njson::parse(strict.out)["status"] == "fail");
}

TEST_CASE("weyl evaluates builtin ids and explicit schemas") {
  const std::string at = " --point 0.3,0.9,-0.4,0.7,0.2,-0.6";
  const auto tau = run_cli("weyl --config " + kM1 + at + " --id tau");
  CHECK(tau.status == 0);
  CHECK(std::abs(njson::parse(tau.out)["value"].get<double>()) < 1e-10);

  const auto sch =
      run_cli("weyl --config " + kM1 + at + " --schema 'R[1](a,b,c,d|e);R[1](a,b,c,d|e)'");
  CHECK(sch.status == 0);
  CHECK(std::abs(njson::parse(sch.out)["value"].get<double>()) < 1e-8);

  CHECK(run_cli("weyl --config " + kM1 + at + " --id tau --schema 'R[0](a,a,b,b)'").status == 2);
  CHECK(run_cli("weyl --config " + kM1 + at + " --schema 'R[0](a,b,c)'").status == 2);
}

TEST_CASE("verify passes and its stdout is identical run to run") {
  const std::string cmd = "verify --config " + kM1 + " --suite ricci --seed 3";
  const auto first = run_cli(cmd);
  CHECK(first.status == 0);
  const njson j = njson::parse(first.out);
  CHECK(j["status"] == "pass");
  CHECK(j["checks"].size() == 2);
  CHECK(j["checks"][0]["name"] == "ricci.max_abs");
  CHECK(j["checks"][1]["name"] == "scalar.max_abs");

  const auto second = run_cli(cmd);
  CHECK(second.status == 0);
  CHECK(second.out == first.out);
}

TEST_CASE("verify runs every suite on the six-dimensional family") {
  const auto r = run_cli("verify --config " + kM1 + " --suite all --seed 11");
  CHECK(r.status == 0);
  const njson j = njson::parse(r.out);
  CHECK(j["status"] == "pass");
  CHECK(j["checks"].size() == 14);
  for (const auto& c : j["checks"]) CHECK(c["status"] == "pass");

  // forcing an unreachable tolerance must fail loudly, not silently pass
  const auto strict = run_cli("verify --config " + kM1 + " --suite oracle --tol 1e-18");
  CHECK(strict.status == 1);
  CHECK(njson::parse(strict.out)["status"] == "fail");
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("info --config /nonexistent/path.json").status == 2);
  CHECK(run_cli("eval --config " + kM1 + " --point 1,2,3").status == 2);
  CHECK(run_cli("verify --config " + kM1 + " --suite bogus").status == 2);
  CHECK(run_cli("info").status == 2);                       // missing required option
  CHECK(run_cli("geodesic --config " + kM1).status == 2);   // neither endpoint nor velocity
  CHECK(run_cli("transport --config " + kM1).status == 2);  // no curve and no endpoints
  CHECK(run_cli("geodesic --config " + kM1 +
                " --point 0,0,0,0,0,0 --velocity 1,0,0,0,0,0 --method euler")
            .status == 2);
}
