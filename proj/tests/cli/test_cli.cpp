#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

fs::path work() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / "qtat_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::string slurp(const fs::path& f) {
  std::ifstream is(f);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Run qtat(const std::string& args, const std::string& env = "") {
  const fs::path o = work() / "stdout.txt", e = work() / "stderr.txt";
  const std::string cmd = env + " " QTAT_BIN " " + args + " > " + o.string() + " 2> " + e.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

void write(const fs::path& f, const std::string& s) {
  std::ofstream os(f);
  os << s;
}

const char* kTiny = R"({
  "rng_seed": 77,
  "grid": {"n": 10},
  "medium": {"omega": 2.0, "sigma_background": 1.0, "bumps": [{"radius": 0.2, "dn": 0.05, "dsigma": 0.05}]},
  "illumination": {"kind": "family", "count": 2},
  "symbols": {"xi_samples": 32},
  "inversion": {"max_iter": 3, "noise_level": 0.01}
})";

}  // namespace

TEST_CASE("version and usage") {
  const Run v = qtat("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("qtat ") == 0);
  for (const char* f : {"medium", "vector_field", "scalar_field", "illumination", "config", "manifest"})
    CHECK(v.out.find(f) != std::string::npos);
  CHECK(qtat("").code == 1);
  CHECK(qtat("forward --medium x").code == 1);
  CHECK(qtat("--help").code == 0);
}

TEST_CASE("malformed config exits 1 with line and column") {
  const fs::path cfg = work() / "bad.json";
  write(cfg, "{\n  \"grid\": {\"n\": 10}\n  \"medium\": {}\n}\n");
  const Run r = qtat("pipeline --config " + cfg.string() + " --out " + (work() / "bad_out").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("bad.json:3:") != std::string::npos);
}

TEST_CASE("resonance-triggering s exits 3 with a hint") {
  const fs::path cfg = work() / "cgo_medium.json";
  write(cfg, R"({"grid": {"n": 13}, "medium": {"omega": 1.0, "bumps": [{"radius": 0.25, "dn": 0.2}]},
                 "symbols": {"enabled": false}, "inversion": {"enabled": false}})");
  const fs::path med = work() / "cgo_medium";
  REQUIRE(qtat("pipeline --config " + cfg.string() + " --out " + med.string()).code == 0);
  const Run r = qtat("cgo --medium " + (med / "medium_true").string() + " --s 1e7 --out " + (work() / "cg").string());
  CHECK(r.code == 3);
  CHECK(r.err.find("hint:") != std::string::npos);
  const Run ok = qtat("cgo --medium " + (med / "medium_true").string() + " --study-decay 20,40 --out " +
                      (work() / "cg_ok").string());
  CHECK(ok.code == 0);
  const std::string csv = slurp(work() / "cg_ok" / "decay.csv");
  CHECK(csv.find("s,zeta_norm,r_norm,slope") == 0);
}

TEST_CASE("pipeline reruns are bit-identical for a fixed seed and thread count") {
  const fs::path cfg = work() / "tiny.json";
  write(cfg, kTiny);
  const fs::path a = work() / "run_a", b = work() / "run_b", c = work() / "run_c";
  REQUIRE(qtat("--threads 1 pipeline --config " + cfg.string() + " --out " + a.string()).code == 0);
  REQUIRE(qtat("pipeline --config " + cfg.string() + " --out " + b.string(), "QTAT_THREADS=1").code == 0);
  const json ma = json::parse(slurp(a / "manifest.json"));
  const json mb = json::parse(slurp(b / "manifest.json"));
  CHECK(ma["threads"] == 1);
  CHECK(mb["threads"] == 1);
  CHECK(ma["outputs"] == mb["outputs"]);
  CHECK(ma["outputs"].size() > 20);
  // a different seed changes the noisy data
  std::string other = kTiny;
  other.replace(other.find("77"), 2, "78");
  write(work() / "tiny78.json", other);
  REQUIRE(qtat("--threads 1 pipeline --config " + (work() / "tiny78.json").string() + " --out " + c.string()).code ==
          0);
  CHECK(slurp(a / "data" / "H_0.bin") != slurp(c / "data" / "H_0.bin"));
  CHECK(slurp(a / "forward" / "H_0.bin") == slurp(c / "forward" / "H_0.bin"));
}

TEST_CASE("subcommands chain: illum, forward, check-symbols, invert") {
  const fs::path cfg = work() / "tiny_clean.json";
  std::string clean = kTiny;
  clean.replace(clean.find("\"noise_level\": 0.01"), 19, "\"noise_level\": 0.0");
  write(cfg, clean);
  const fs::path base = work() / "chain_base";
  REQUIRE(qtat("pipeline --config " + cfg.string() + " --out " + base.string()).code == 0);
  const std::string init = (base / "medium_init").string(), truth = (base / "medium_true").string();
  const fs::path d = work() / "chain";
  REQUIRE(qtat("illum --kind family --count 2 --medium " + init + " --out " + (d / "illum").string()).code == 0);
  REQUIRE(qtat("illum --kind plane --direction 1,0,0 --direction 0,1,0 --medium " + init + " --out " +
               (d / "plane").string())
              .code == 0);
  CHECK(json::parse(slurp(d / "plane" / "illum.json"))["count"] == 2);
  CHECK(qtat("illum --kind plane --medium " + init + " --out " + (d / "x").string()).code == 1);
  REQUIRE(qtat("forward --medium " + truth + " --illum " + (d / "illum").string() + " --tol 1e-10 --out " +
               (d / "fwd").string())
              .code == 0);
  CHECK(slurp(d / "fwd" / "H_1.bin") == slurp(base / "forward" / "H_1.bin"));
  const Run s = qtat("check-symbols --fields " + (d / "fwd").string() + " --medium " + truth +
                     " --xi-samples 32 --min-distance 2 --report " + (d / "sym.json").string());
  CHECK(s.code == 0);
  const json rep = json::parse(slurp(d / "sym.json"));
  for (const char* k : {"min_margin", "argmin", "points", "lopatinskii"}) CHECK(rep.contains(k));
  CHECK(rep["points"].size() > 0);
  const Run inv = qtat("invert --data " + (d / "fwd").string() + " --init " + init + " --illum " +
                       (d / "illum").string() + " --traces " + (d / "fwd").string() + " --truth " + truth +
                       " --mode newton --max-iter 4 --out " + (d / "inv").string());
  CHECK(inv.code == 0);
  for (const char* f : {"residual.csv", "stability.json", "summary.json", "medium/sigma.bin", "E_0.bin",
                        "manifest.json"})
    CHECK_MESSAGE(fs::exists(d / "inv" / f), f);
  const json sum = json::parse(slurp(d / "inv" / "summary.json"));
  CHECK(sum["relative_error"].get<double>() < 1e-6);
  CHECK(json::parse(slurp(d / "inv" / "stability.json"))["rows"].size() == 3);
  const Run lin = qtat("invert --data " + (d / "fwd").string() + " --init " + init + " --illum " +
                       (d / "illum").string() + " --mode linear --reg 1e-6 --out " + (d / "lin").string());
  CHECK(lin.code == 0);
  CHECK(fs::exists(d / "lin" / "delta_sigma.bin"));
  // inconsistent data/illumination counts are a configuration error
  REQUIRE(qtat("illum --kind plane --direction 0,0,1 --medium " + init + " --out " + (d / "plane1").string()).code ==
          0);
  CHECK(qtat("invert --data " + (d / "fwd").string() + " --init " + init + " --illum " + (d / "plane1").string() +
             " --mode linear --out " + (d / "bad").string())
            .code == 1);
}

TEST_CASE("bundled elliptic_recon example completes and reports the reconstruction error") {
  const fs::path out = work() / "elliptic_recon";
  const Run r = qtat("pipeline --config " QTAT_SOURCE_DIR "/examples/elliptic_recon.json --out " + out.string());
  REQUIRE(r.code == 0);
  const json m = json::parse(slurp(out / "manifest.json"));
  bool listed = false;
  for (const auto& o : m["outputs"]) listed = listed || o["path"] == "recon/medium/sigma.bin";
  CHECK(listed);
  const json& rec = m["metrics"]["reconstruction"];
  REQUIRE(rec.contains("relative_error"));
  CHECK(rec["relative_error"].get<double>() <= 0.02);
  CHECK(rec["perturbation_relative_error"].get<double>() <= 0.02);
  CHECK(m["metrics"]["symbols"]["pass"] == true);
}
