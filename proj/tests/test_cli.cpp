// Exit-code and output contract of the respscan binary. The binary path
// arrives via the RESPSCAN_BIN environment variable (set by ctest).

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "resp/net.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void expect(bool ok, const std::string& what) {
  std::printf("[%s] %s\n", ok ? "ok" : "FAILED", what.c_str());
  if (!ok) ++g_failures;
}

int run(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return status < 0 ? status : WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> trace_values(const fs::path& path) {
  std::ifstream in(path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    double t = 0.0, v = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &t, &v) == 2) values.push_back(v);
  }
  return values;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

int main() {
  const char* bin_env = std::getenv("RESPSCAN_BIN");
  if (!bin_env) {
    std::fprintf(stderr, "RESPSCAN_BIN not set\n");
    return 1;
  }
  const std::string bin = "\"" + std::string(bin_env) + "\"";
  testutil::TempDir dir("cli");

  // usage errors -> exit 2
  expect(run(bin + " extract --in " + (dir.path / "nowhere").string() + " --out " +
             (dir.path / "t.csv").string() + " 2> /dev/null") == 2,
         "extract on a missing directory exits 2");
  expect(run(bin + " analyze --mode sideways --out " + (dir.path / "s.csv").string() +
             " 2> /dev/null") == 2,
         "unknown analyze mode exits 2");
  expect(run(bin + " 2> /dev/null") == 2, "missing subcommand exits 2");

  {
    std::ofstream cfg(dir.path / "bad.cfg");
    cfg << "mode=dataset\nn_weird=3\n";
  }
  expect(run(bin + " synth --config " + (dir.path / "bad.cfg").string() + " --out " +
             (dir.path / "x").string() + " 2> " + (dir.path / "stderr.txt").string()) == 2,
         "unknown config key exits 2");
  expect(slurp(dir.path / "stderr.txt").find("n_weird") != std::string::npos,
         "unknown config key is named on stderr");

  // flat sequence -> normalization failure -> exit 1
  {
    std::ofstream cfg(dir.path / "flat.cfg");
    cfg << "mode=sequence\ngain=0\npixel_noise=0\nseed=3\n";
  }
  expect(run(bin + " synth --config " + (dir.path / "flat.cfg").string() + " --out " +
             (dir.path / "flat").string() + " > /dev/null") == 0,
         "flat scene renders fine");
  expect(run(bin + " extract --in " + (dir.path / "flat").string() + " --out " +
             (dir.path / "flat.csv").string() + " 2> /dev/null") == 1,
         "flat sequence fails normalization with exit 1");

  // a noise-free scene extracts with r >= 0.99 against the stored ground truth
  {
    std::ofstream cfg(dir.path / "scene.cfg");
    cfg << "mode=sequence\nseed=4\npixel_noise=0\nnoise_sigma=0\n";
  }
  expect(run(bin + " synth --config " + (dir.path / "scene.cfg").string() + " --out " +
             (dir.path / "scene").string() + " > /dev/null") == 0,
         "clean scene renders");
  expect(run(bin + " extract --in " + (dir.path / "scene").string() + " --out " +
             (dir.path / "trace.csv").string() + " > /dev/null") == 0,
         "clean scene extracts");
  {
    std::vector<double> got = trace_values(dir.path / "trace.csv");
    std::vector<double> want = trace_values(dir.path / "scene" / "ground_truth.csv");
    double r = pearson(got, want);
    expect(got.size() == 100 && want.size() == 100 && std::abs(r) >= 0.99,
           "extracted trace correlates with the stored ground truth");
  }

  // dataset + training contracts
  {
    std::ofstream cfg(dir.path / "data.cfg");
    cfg << "mode=dataset\nn_normal=20\nn_abnormal=20\nsegment_len=80\nseed=11\n";
  }
  expect(run(bin + " synth --config " + (dir.path / "data.cfg").string() + " --out " +
             (dir.path / "data").string() + " > /dev/null") == 0,
         "dataset generation succeeds");

  const std::string manifest = (dir.path / "data" / "index.csv").string();
  expect(run(bin + " train --manifest " + manifest +
             " --variant bilstm-at --hidden 3 --attn 2 --lr 0 --epochs 2 --batch 8" +
             " --seed 21 --out " + (dir.path / "zero.bin").string() + " > /dev/null") == 0,
         "lr 0 training runs");
  {
    resp::net::ModelParams trained = resp::net::load_model(dir.path / "zero.bin");
    resp::net::ModelParams fresh =
        resp::net::init_model(resp::net::Variant::kBiLstmAt, 3, 2, 1, 21);
    auto vt = resp::net::param_views(trained);
    auto vf = resp::net::param_views(fresh);
    bool same = vt.size() == vf.size();
    for (std::size_t b = 0; same && b < vt.size(); ++b)
      for (long k = 0; same && k < vt[b].size(); ++k)
        same = vt[b].data[k] == vf[b].data[k];
    expect(same, "lr 0 leaves the checkpoint equal to the seeded initialization");
  }

  expect(run(bin + " train --manifest " + manifest +
             " --variant gru-at --hidden 3 --attn 2 --lr 1e300 --epochs 3 --batch 8" +
             " --seed 21 --out " + (dir.path / "diverged.bin").string() +
             " 2> /dev/null > /dev/null") == 3,
         "exploding learning rate exits 3");

  expect(run(bin + " train --manifest " + (dir.path / "nothing.csv").string() +
             " --out " + (dir.path / "m.bin").string() + " 2> /dev/null") == 1,
         "missing manifest exits 1");

  std::printf("%s\n", g_failures == 0 ? "all CLI contract checks passed" : "FAILURES");
  return g_failures == 0 ? 0 : 1;
}
