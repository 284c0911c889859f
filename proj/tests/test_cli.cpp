#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(PJF_TEST_WORK) / "cli";
const std::string kTool = PJF_TOOL;
const std::string kScenarios = PJF_SCENARIOS;

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the tool with the output root set to `root` under the work directory.
Result run(const std::string& args, const std::string& root = "default") {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = "cd '" + kWork.string() + "' && PJF_OUTPUT_ROOT='" + (kWork / root).string() + "' '" +
                          kTool + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string scenario(const std::string& name) { return "'" + kScenarios + "/" + name + ".json'"; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string header(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

struct Clean {
  Clean() { fs::remove_all(kWork); }
} clean;

}  // namespace

TEST_CASE("simulate writes one path and one event file per path plus a manifest") {
  const auto r = run("simulate " + scenario("ou_kalman") + " --paths 10", "sim10");
  REQUIRE(r.code == 0);
  const auto dir = kWork / "sim10" / "simulate";
  std::size_t paths = 0, events = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    paths += name.rfind("path_", 0) == 0;
    events += name.rfind("events_", 0) == 0;
  }
  CHECK(paths == 10);
  CHECK(events == 10);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "scenario.json"));
}

TEST_CASE("manifest hash matches the recorded scenario") {
  REQUIRE(run("simulate " + scenario("ou_kalman") + " --paths 1", "hash").code == 0);
  const auto dir = kWork / "hash" / "simulate";
  const auto text = slurp(dir / "scenario.json");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  const auto manifest = slurp(dir / "manifest.json");
  CHECK(manifest.find(hex) != std::string::npos);
  CHECK(manifest.find("\"seed\": 7") != std::string::npos);
  CHECK(manifest.find("\"version\": \"0.1.0\"") != std::string::npos);
  CHECK(manifest.find("events_0000.csv") != std::string::npos);
}

TEST_CASE("same seed gives byte-identical simulation output") {
  REQUIRE(run("simulate " + scenario("medical") + " --paths 3 --seed 99", "det_a").code == 0);
  REQUIRE(run("simulate " + scenario("medical") + " --paths 3 --seed 99", "det_b").code == 0);
  CHECK(tree(kWork / "det_a") == tree(kWork / "det_b"));
  REQUIRE(run("simulate " + scenario("medical") + " --paths 3 --seed 98", "det_c").code == 0);
  CHECK(slurp(kWork / "det_a/simulate/path_0000.csv") != slurp(kWork / "det_c/simulate/path_0000.csv"));
}

TEST_CASE("missing config file exits with 2 and reports on stderr") {
  const auto r = run("simulate does_not_exist.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("does_not_exist.json") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run("simulate").code == 2);
  CHECK(run("filter " + scenario("ou_kalman") + " --method bogus").code == 2);
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("validate reports violations") {
  CHECK(run("validate " + scenario("ou_kalman")).code == 0);
  auto text = slurp(kScenarios + "/ou_kalman.json");
  const auto at = text.find("\"times\": [");
  REQUIRE(at != std::string::npos);
  const auto end = text.find(']', at);
  text.replace(at, end - at + 1, "\"times\": [1.0, 0.5]");
  fs::create_directories(kWork);
  std::ofstream(kWork / "bad.json") << text;
  const auto r = run("validate bad.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("NonIncreasingTimes") != std::string::npos);
}

TEST_CASE("preset prints a scenario that validates") {
  const auto r = run("preset credit_risk --out credit.json");
  REQUIRE(r.code == 0);
  CHECK(run("validate credit.json").code == 0);
  CHECK(run("preset nothing").code == 2);
}

TEST_CASE("kalman filter trajectory has a pre and post row at each event") {
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method kalman --simulate", "kal").code == 0);
  const auto rows = read_csv(kWork / "kal/filter/kalman_trajectory.csv");
  REQUIRE(rows.size() > 1);
  std::map<std::string, int> pre, post;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] == "pre") ++pre[rows[i][4]];
    if (rows[i][1] == "post") {
      ++post[rows[i][4]];
      CHECK_FALSE(rows[i][5].empty());
    }
  }
  CHECK(pre == std::map<std::string, int>{{"1", 1}, {"2", 1}, {"3", 1}});
  CHECK(post == pre);
}

TEST_CASE("filter all: kalman and grid agree in the comparison table") {
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method all --particles 2000", "all").code == 0);
  const auto rows = read_csv(kWork / "all/filter/comparison.csv");
  REQUIRE(rows.size() > 20);
  double worst = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    worst = std::max(worst, std::abs(std::stod(rows[i][3]) - std::stod(rows[i][6])));
  CHECK(worst <= 1e-3);
}

TEST_CASE("events file gives the same filter output as simulating") {
  REQUIRE(run("simulate " + scenario("ou_kalman") + " --paths 1", "ev").code == 0);
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method kalman --simulate", "ev_sim").code == 0);
  const auto events = (kWork / "ev/simulate/events_0000.csv").string();
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method kalman --events '" + events + "'", "ev_file").code == 0);
  CHECK(slurp(kWork / "ev_sim/filter/kalman_trajectory.csv") == slurp(kWork / "ev_file/filter/kalman_trajectory.csv"));
  CHECK(run("filter " + scenario("ou_kalman") + " --method kalman --events missing.csv").code == 2);
}

TEST_CASE("incompatible methods exit with 3") {
  const auto r = run("filter " + scenario("medical") + " --method kalman");
  CHECK(r.code == 3);
  CHECK(r.err.find("IncompatibleMethod") != std::string::npos);
  CHECK(run("filter " + scenario("ou_2d") + " --method grid").code == 3);
}

TEST_CASE("output does not depend on the thread count") {
  const std::string base = "filter " + scenario("medical") + " --method ks-particle --particles 3000";
  REQUIRE(run(base + " --threads 1", "thr1").code == 0);
  REQUIRE(run(base + " --threads 3", "thr3").code == 0);
  for (const char* f : {"ks_particle_summary.csv", "ks_particle_resampling.csv", "events.csv"})
    CHECK(slurp(kWork / "thr1/filter" / f) == slurp(kWork / "thr3/filter" / f));
}

TEST_CASE("CSV headers are pinned") {
  REQUIRE(run("simulate " + scenario("ou_kalman") + " --paths 1", "hdr").code == 0);
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method all --particles 500 --snapshots", "hdr").code == 0);
  const auto s = kWork / "hdr/simulate", f = kWork / "hdr/filter";
  CHECK(header(s / "path_0000.csv") == "path_id,t,x_1,y_1,is_jump_time,event_index");
  CHECK(header(s / "events_0000.csv") == "path_id,i,T_i,dY_1");
  CHECK(header(f / "events.csv") == "path_id,i,T_i,dY_1");
  CHECK(header(f / "kalman_trajectory.csv") == "t,side,m_1,P_11,event_index,v_1,S_11,K_11");
  CHECK(header(f / "kalman_no_jump_comparison.csv") ==
        "t,side,event_index,m_jump_1,P_jump_11,m_nojump_1,P_nojump_11");
  for (const char* p : {"ks_particle_summary.csv", "zakai_particle_summary.csv"})
    CHECK(header(f / p) == "t,side,event_index,phi_name,estimate,bootstrap_se,ess,log_rho1");
  for (const char* p : {"ks_particle_resampling.csv", "zakai_particle_resampling.csv"})
    CHECK(header(f / p) == "event_index,ess,threshold,resampled");
  for (const char* p : {"ks_particle_snapshots.csv", "zakai_particle_snapshots.csv"})
    CHECK(header(f / p) == "t,side,particle_id,x_1,log_w");
  CHECK(header(f / "grid_summary.csv") == "t,side,event_index,mean,var,mass");
  CHECK(header(f / "grid_density.csv") == "t,side,node_x,p");
  CHECK(header(f / "comparison.csv") == "t,side,event_index,kalman_m,ks_m,zakai_m,grid_m");

  REQUIRE(run("filter " + scenario("ou_2d") + " --method kalman", "hdr2").code == 0);
  CHECK(header(kWork / "hdr2/filter/kalman_trajectory.csv") ==
        "t,side,m_1,m_2,P_11,P_12,P_21,P_22,event_index,v_1,S_11,K_11,K_21");
}

TEST_CASE("floats carry 17 significant digits") {
  REQUIRE(run("filter " + scenario("ou_kalman") + " --method kalman", "digits").code == 0);
  const auto rows = read_csv(kWork / "digits/filter/kalman_trajectory.csv");
  CHECK(rows[2][0] == "0.10000000000000001");
}

TEST_CASE("diagnose compensator and martingale on the linear preset") {
  const auto r = run("diagnose " + scenario("ou_kalman") + " --checks compensator,martingale", "diag");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  const auto json = slurp(kWork / "diag/diagnose/diagnostics.json");
  CHECK(json.find("\"pass\": false") == std::string::npos);
}

TEST_CASE("diagnose residual check on a two-dimensional scenario exits with 3") {
  const auto r = run("diagnose " + scenario("ou_2d") + " --checks ks-residual");
  CHECK(r.code == 3);
  CHECK(r.err.find("UnsupportedScenario") != std::string::npos);
}

TEST_CASE("diagnose negative control exits with 1 and flags failures") {
  const auto r = run("diagnose " + scenario("ou_kalman") +
                         " --checks zakai --negative-control --particles 5000 --runs 4 --paths 2000",
                     "neg");
  CHECK(r.code == 1);
  CHECK(r.out.find("FAIL") != std::string::npos);
  const auto json = slurp(kWork / "neg/diagnose/diagnostics.json");
  CHECK(json.find("\"pass\": false") != std::string::npos);
  CHECK(json.find("\"negative_control\": true") != std::string::npos);
}
