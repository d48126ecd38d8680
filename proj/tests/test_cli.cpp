// Drives the installed-style binary; links nothing from the library.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kDemo = fs::path(THUMBTRUTH_SOURCE_DIR) / "config" / "demo";

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("thumbtruth-cli-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args, const fs::path& scratch) {
  auto out_file = scratch / "stdout.txt";
  std::string cmd = quote(THUMBTRUTH_CLI) + " " + args + " > " + quote(out_file.string()) + " 2> " +
                    quote((scratch / "stderr.txt").string());
  int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string demo_config() { return "--config " + quote((kDemo / "demo.json").string()); }
std::string demo_manifest() { return quote((kDemo / "manifest.jsonl").string()); }

std::vector<fs::path> results_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl" && e.path().filename().string().find("usage") == std::string::npos &&
        e.path().filename().string().find("__") != std::string::npos &&
        e.path().filename().string().rfind("describe", 0) != 0) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("ingest exit codes") {
  Scratch s;
  CHECK(cli("ingest --manifest " + demo_manifest(), s.dir).code == 0);

  std::ofstream(s.dir / "bad.jsonl") << R"({"video_id":"a","country":"US","category":"x","label":"maybe","duration_seconds":1,"subtitle_status":"absent"})"
                                     << "\n";
  CHECK(cli("ingest --manifest " + quote((s.dir / "bad.jsonl").string()), s.dir).code == 2);
  auto err = slurp(s.dir / "stderr.txt");
  CHECK(err.find("line 1") != std::string::npos);
  CHECK(err.find("label") != std::string::npos);

  CHECK(cli("ingest", s.dir).code == 3);  // missing required flag
  CHECK(cli("--config /nonexistent.json ingest --manifest " + demo_manifest(), s.dir).code == 3);
}

TEST_CASE("configuration errors") {
  Scratch s;
  auto out = quote((s.dir / "r").string());
  auto cache = quote((s.dir / "cache").string());
  CHECK(cli(demo_config() + " classify --manifest " + demo_manifest() + " --backend nobody --out " + out +
                " --cache-dir " + cache,
            s.dir)
            .code == 3);
  auto r = cli(demo_config() + " classify --manifest " + demo_manifest() +
                   " --backend demo --strategy dynamic-few-shot --out " + out + " --cache-dir " + cache,
               s.dir);
  CHECK(r.code == 3);
  CHECK(slurp(s.dir / "stderr.txt").find("exemplars") != std::string::npos);
  CHECK(cli(demo_config() + " classify --manifest " + demo_manifest() +
                " --backend demo --strategy fixed-few-shot --ablation abl-ns --out " + out + " --cache-dir " + cache,
            s.dir)
            .code == 3);
}

TEST_CASE("classify, evaluate and rerun byte-identically") {
  Scratch s;
  auto results = s.dir / "results";
  auto base = demo_config() + " classify --manifest " + demo_manifest() + " --backend demo --out " +
              quote(results.string()) + " --cache-dir " + quote((s.dir / "cache").string()) + " --seed 3";
  REQUIRE(cli(base, s.dir).code == 0);
  auto files = results_files(results);
  REQUIRE(files.size() == 1);
  auto first = slurp(files[0]);

  REQUIRE(cli(base, s.dir).code == 0);
  CHECK(results_files(results).size() == 1);
  CHECK(slurp(files[0]) == first);

  auto eval = cli(demo_config() + " evaluate --results " + quote(results.string()) + " --manifest " + demo_manifest(),
                  s.dir);
  CHECK(eval.code == 0);
  CHECK(eval.out.find("1.0000") != std::string::npos);
  auto eval2 = cli(demo_config() + " evaluate --results " + quote(results.string()) + " --manifest " + demo_manifest(),
                   s.dir);
  CHECK(eval2.out == eval.out);

  // results that name videos the manifest lacks
  std::ofstream(s.dir / "short.jsonl") << slurp(kDemo / "manifest.jsonl").substr(0, slurp(kDemo / "manifest.jsonl").find('\n') + 1);
  CHECK(cli(demo_config() + " evaluate --results " + quote(results.string()) + " --manifest " +
                quote((s.dir / "short.jsonl").string()),
            s.dir)
            .code == 4);

  auto cost = cli(demo_config() + " cost --results " + quote(results.string()), s.dir);
  CHECK(cost.code == 0);
  CHECK(cost.out.find("classify") != std::string::npos);
}

TEST_CASE("dynamic few-shot with an exemplar store") {
  Scratch s;
  auto cache = quote((s.dir / "cache").string());
  auto store = quote((s.dir / "store.jsonl").string());
  REQUIRE(cli(demo_config() + " exemplars --manifest " + demo_manifest() + " --store " + store + " --cache-dir " + cache,
              s.dir)
              .code == 0);
  auto results = quote((s.dir / "dyn").string());
  REQUIRE(cli(demo_config() + " classify --manifest " + demo_manifest() +
                  " --backend demo --strategy dynamic-few-shot --exemplars " + store + " --out " + results +
                  " --cache-dir " + cache,
              s.dir)
              .code == 0);
  auto files = results_files(s.dir / "dyn");
  REQUIRE(files.size() == 1);
  auto text = slurp(files[0]);
  CHECK(text.find("\"exemplar_ids\":[\"d0") != std::string::npos);
  auto rep = cli(demo_config() + " report --results " + results + " --manifest " + demo_manifest() +
                     " --min-support 2",
                 s.dir);
  CHECK(rep.code == 0);
}
