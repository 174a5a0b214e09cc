#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aat/audio.hpp"
#include "aat/config.hpp"
#include "aat/rng.hpp"

namespace fs = std::filesystem;
using namespace aat;

namespace {

const char* kCli = AAT_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("--definitely-not-a-flag") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("") == 2);  // a subcommand is required
}

TEST_CASE("invalid config exits with code 3") {
  const fs::path dir = fresh_dir("aat_cli_badcfg");
  std::ofstream(dir / "bad.cfg") << "attack.nonsense = 1\n";
  CHECK(run("rir-gen --config " + (dir / "bad.cfg").string() + " --out " +
            (dir / "o").string()) == 3);
  std::ofstream(dir / "bad2.cfg") << "attack.alpha_factor = 0.5\n";
  CHECK(run("rir-gen --config " + (dir / "bad2.cfg").string() + " --out " +
            (dir / "o").string()) == 3);
}

TEST_CASE("missing files exit with code 1") {
  CHECK(run("mask-analyze --input /nonexistent.wav --out /tmp/aat_cli_m") == 1);
  CHECK(run("report --dir /tmp/definitely-empty-aat-dir") == 1);
}

TEST_CASE("rir-gen writes deterministic artifacts") {
  const fs::path a = fresh_dir("aat_cli_rir_a");
  const fs::path b = fresh_dir("aat_cli_rir_b");
  REQUIRE(run("rir-gen --count 3 --seed 42 --out " + a.string()) == 0);
  REQUIRE(run("rir-gen --count 3 --seed 42 --out " + b.string()) == 0);
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "rir_%03d.wav", i);
    REQUIRE(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
    std::snprintf(name, sizeof(name), "rir_%03d.json", i);
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(fs::exists(a / "run_config.txt"));
}

TEST_CASE("mask-analyze emits CSVs deterministically") {
  const fs::path dir = fresh_dir("aat_cli_mask");
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(4096);
  Rng rng(7);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] = 0.4 * std::sin(2.0 * M_PI * 800.0 * i / 16000.0) +
                      rng.normal(0.0, 0.005);
  write_wav((dir / "in.wav").string(), clip);

  REQUIRE(run("mask-analyze --input " + (dir / "in.wav").string() + " --out " +
              (dir / "o1").string()) == 0);
  REQUIRE(run("mask-analyze --input " + (dir / "in.wav").string() + " --out " +
              (dir / "o2").string()) == 0);
  for (const char* f :
       {"thresholds.csv", "maskers.csv", "frame0_psd_threshold.csv"}) {
    REQUIRE(fs::exists(dir / "o1" / f));
    CHECK(slurp(dir / "o1" / f) == slurp(dir / "o2" / f));
  }
}

TEST_CASE("config round trip is byte-identical") {
  RunConfig run_cfg;
  run_cfg.target_text = "please open the door";
  run_cfg.attack.learning_rate = 0.00125;
  const fs::path dir = fresh_dir("aat_cli_cfg");
  run_cfg.to_kv().save((dir / "a.cfg").string());
  RunConfig reload;
  reload.apply(KeyValueConfig::load((dir / "a.cfg").string()));
  reload.to_kv().save((dir / "b.cfg").string());
  CHECK(slurp(dir / "a.cfg") == slurp(dir / "b.cfg"));
  CHECK(reload.attack.learning_rate == run_cfg.attack.learning_rate);
  CHECK(reload.target_text == run_cfg.target_text);
}
