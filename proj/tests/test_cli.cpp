#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("qcd-eval-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  fs::path file(const std::string& name, const std::string& text) const {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
  }
  fs::path operator/(const std::string& name) const { return dir / name; }
};

int run(const std::string& args) {
  const std::string cmd = std::string(QCD_EVAL_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kHand =
    R"({"id":"a","nu":null,"values":[0,0,0,10,0,0,0,0,0,0]})"
    "\n"
    R"({"id":"b","nu":5,"values":[0,0,0,0,0,0,0,0,0,0]})"
    "\n"
    R"({"id":"c","nu":null,"values":[0,0,0,0,0,0]})"
    "\n";

const json* find_metric(const json& doc, const std::string& name) {
  for (const auto& m : doc["metrics"]) {
    if (m["name"] == name) return &m;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("evaluate on the hand dataset reports KM-ARL 5") {
  Sandbox sb;
  const auto data = sb.file("hand.jsonl", kHand);
  const auto out = sb / "metrics.json";
  REQUIRE(run("evaluate --data " + data.string() +
              " --detector gsr --model gaussian:0,1,1 --threshold 100 --out " + out.string()) == 0);
  const auto doc = json::parse(slurp(out));
  const auto* km = find_metric(doc, "KM_ARL");
  REQUIRE(km);
  CHECK(std::abs((*km)["value"].get<double>() - 5.0) < 1e-12);
  CHECK((*find_metric(doc, "LB_ARL"))["value"].get<double>() == 3.0);
  CHECK((*find_metric(doc, "KM_ADD"))["value"].get<double>() == 5.0);
  CHECK((*find_metric(doc, "LB_ADD"))["value"].is_null());
  CHECK(doc["metrics"].size() == 5);
  const auto manifest = json::parse(slurp(out.string() + ".manifest.json"));
  CHECK(manifest["command"] == "evaluate");
  CHECK(manifest["fingerprint"] == doc["fingerprint"]);
  CHECK(manifest["seed"] == 0);
}

TEST_CASE("evaluate with precomputed detections") {
  Sandbox sb;
  const auto data = sb.file("hand.jsonl", kHand);
  const auto det = sb.file("det.jsonl",
                           "{\"id\":\"a\",\"tau\":3}\n{\"id\":\"b\",\"tau\":null}\n"
                           "{\"id\":\"c\",\"tau\":null}\n");
  const auto out = sb / "m.json";
  REQUIRE(run("evaluate --data " + data.string() + " --detections " + det.string() +
              " --metrics km-arl --out " + out.string()) == 0);
  const auto doc = json::parse(slurp(out));
  REQUIRE(doc["metrics"].size() == 1);
  CHECK(doc["metrics"][0]["value"].get<double>() == doctest::Approx(5.0));

  const auto bad = sb.file("bad.jsonl", "{\"id\":\"zzz\",\"tau\":3}\n");
  CHECK(run("evaluate --data " + data.string() + " --detections " + bad.string()) == 2);
}

TEST_CASE("simulate then evaluate and curve") {
  Sandbox sb;
  const auto spec = sb.file("spec.json", R"({
    "model": {"kind": "gaussian", "mu0": 0, "mu1": 1, "sigma2": 1},
    "n_sequences": 100,
    "length_law": {"kind": "fixed", "T": 400},
    "changepoint_law": {"kind": "uniform"},
    "with_change_fraction": 0.5,
    "truncation": {"kind": "uniform", "lo": 20, "hi": 120}
  })");
  const auto data = sb / "d.jsonl";
  REQUIRE(run("simulate --spec " + spec.string() + " --seed 4 --out " + data.string()) == 0);
  CHECK(fs::exists(data.string() + ".meta.json"));
  CHECK(fs::exists(data.string() + ".manifest.json"));
  std::ifstream in(data);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto rec = json::parse(line);
    CHECK(rec["values"].size() >= 20);
    CHECK(rec["values"].size() <= 120);
    ++n;
  }
  CHECK(n == 100);

  // Same seed, same bytes.
  const auto again = sb / "d2.jsonl";
  REQUIRE(run("simulate --spec " + spec.string() + " --seed 4 --out " + again.string()) == 0);
  CHECK(slurp(data) == slurp(again));

  const auto c1 = sb / "c1.csv", c8 = sb / "c8.csv", svg = sb / "c.svg";
  REQUIRE(run("curve --data " + data.string() +
              " --detector gsr --model gaussian:0,1,1 --thresholds 1:1e4:9-log --workers 1 --out " +
              c1.string() + " --svg " + svg.string()) == 0);
  REQUIRE(run("curve --data " + data.string() +
              " --detector gsr --model gaussian:0,1,1 --thresholds 1:1e4:9-log --workers 8 --out " +
              c8.string()) == 0);
  CHECK(slurp(c1) == slurp(c8));
  CHECK(slurp(svg).find("<svg") == 0);

  const auto surv = sb / "s.csv";
  REQUIRE(run("survival --data " + data.string() +
              " --detector cusum --model gaussian:0,1,1 --threshold 3 --kind add --out " +
              surv.string()) == 0);
  CHECK(slurp(surv).rfind("t,S,n_at_risk,d\n0,1,", 0) == 0);
}

TEST_CASE("oracle subcommand on a deterministic statistic") {
  Sandbox sb;
  const auto out = sb / "o.json";
  REQUIRE(run("oracle --model gaussian:0,0,1 --detector gsr --threshold 13 --reps 50 --out " +
              out.string()) == 0);
  const auto doc = json::parse(slurp(out));
  CHECK(doc["value"] == 12.0);
  CHECK(doc["sem"] == 0.0);
  CHECK(doc["quantity"] == "ARL");
  CHECK(run("oracle --model gaussian:0,1,1 --detector cusum --threshold 1e9 --reps 20 "
            "--horizon-cap 100") == 1);
}

TEST_CASE("verify-bounds without censoring") {
  Sandbox sb;
  const auto out = sb / "b.csv";
  REQUIRE(run("verify-bounds --family exp:1,none --n 5,20 --a 1.0 --reps 2000 --out " +
              out.string()) == 0);
  const auto text = slurp(out);
  CHECK(text.find("\"exp:1 x none\",5,1,0,0,") != std::string::npos);
  CHECK(text.find("\"exp:1 x none\",20,1,0,0,") != std::string::npos);
  CHECK(text.find("false") == std::string::npos);
}

TEST_CASE("usage and validation errors exit with 2") {
  Sandbox sb;
  const auto data = sb.file("hand.jsonl", kHand);
  CHECK(run("curve --data " + data.string() + " --detector gsr --model gaussian:0,1,1 --thresholds '' --out " +
            (sb / "c.csv").string()) == 2);
  CHECK(run("evaluate --data " + data.string() + " --bogus-flag") == 2);
  CHECK(run("nosuchcommand") == 2);
  CHECK(run("evaluate --data " + data.string() + " --detector gsr --threshold 1") == 2);
  CHECK(run("evaluate --data " + data.string() + " --detector window-l1 --model poisson:1,2 --threshold 1") == 2);
  CHECK(run("verify-bounds --family exp:1 --n 5 --a 1") == 2);
  CHECK(run("--help") == 0);
}
