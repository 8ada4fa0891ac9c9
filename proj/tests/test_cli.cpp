#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bsgd/errors.hpp"
#include "bsgd/experiment.hpp"
#include "bsgd/io.hpp"

using namespace bsgd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsgd_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Exec {
  int code;
  std::string out;
};

Exec cli(const std::string& args) {
  const std::string cmd = std::string(BSGD_CLI) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("matrix csv round trip and errors") {
  const fs::path dir = scratch("csv");
  Matrix m(2, 3);
  m << 1, -2.5, 1.0 / 3.0, 4e-12, 5, 6;
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_matrix_csv(dir / "m.csv") == m);
  spit(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_matrix_csv(dir / "ragged.csv"), ParseError);
  spit(dir / "word.csv", "1,abc\n");
  CHECK_THROWS_AS(read_matrix_csv(dir / "word.csv"), ParseError);
  CHECK_THROWS_AS(read_matrix_csv(dir / "missing.csv"), IoError);
  const Vector v = Eigen::Vector3d(1, 2, 3);
  write_vector_csv(dir / "v.csv", v);
  CHECK(read_vector_csv(dir / "v.csv") == v);
}

TEST_CASE("record csv and pgm") {
  ConvergenceRecord rec;
  rec.rows.push_back({0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0});
  rec.rows.push_back({1, 0.5, 1.0, 1.5, 2.0, 2.5, 0.1});
  const std::string text = record_csv(rec);
  CHECK(text.rfind("epoch,objective,residual,bregman,delta1,delta2,step\n", 0) == 0);
  CHECK(line_count(text) == 3);

  const fs::path dir = scratch("pgm");
  write_pgm(dir / "img.pgm", Vector::LinSpaced(12, 0, 1), 4, 3);
  const std::string pgm = slurp(dir / "img.pgm");
  CHECK(pgm.rfind("P5\n4 3\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n4 3\n255\n").size() + 12);
  CHECK(static_cast<unsigned char>(pgm.back()) == 255);
}

TEST_CASE("strict config parsing") {
  const fs::path dir = scratch("config");
  spit(dir / "min.json", R"({"preset": "integral"})");
  const ExperimentConfig c = parse_config(dir / "min.json");
  CHECK(c.n == 1000);
  CHECK(c.n_batches == 100);
  CHECK(c.epochs == 250);
  CHECK(c.r_x == 2.0);

  spit(dir / "unknown.json", R"({"preset": "integral", "colour": 3})");
  CHECK_THROWS_WITH_AS(parse_config(dir / "unknown.json"), doctest::Contains("colour"), ConfigurationError);
  spit(dir / "nested.json", R"({"noise": {"type": "gaussian", "sigma": 0.1, "extra": 1}})");
  CHECK_THROWS_AS(parse_config(dir / "nested.json"), ConfigurationError);
  spit(dir / "bad.json", R"({"preset": )");
  CHECK_THROWS_AS(parse_config(dir / "bad.json"), ParseError);
  CHECK_THROWS_AS(parse_config(dir / "none.json"), IoError);

  ExperimentConfig r = ExperimentConfig::defaults(Preset::integral);
  r.r_x = 1.0;
  CHECK_THROWS_WITH_AS(r.validate(), doctest::Contains("smooth"), ConfigurationError);
  ExperimentConfig nb = ExperimentConfig::defaults(Preset::integral);
  nb.n_batches = 30;
  CHECK_THROWS_AS(nb.validate(), ConfigurationError);

  // to_json feeds back into the parser unchanged.
  ExperimentConfig rt = ExperimentConfig::defaults(Preset::ct);
  rt.r_x = 1.1;
  rt.noise = NoiseSpec{GaussianNoise{0.01}, 3};
  CHECK(config_from_json(rt.to_json()).to_json() == rt.to_json());
}

TEST_CASE("experiment outputs") {
  const fs::path dir = scratch("integral");
  ExperimentConfig cfg = ExperimentConfig::defaults(Preset::integral);
  cfg.n = 100;
  cfg.n_batches = 10;
  cfg.epochs = 6;
  cfg.seeds = 2;
  cfg.r_x = 1.5;
  cfg.output_dir = dir / "a";
  const ExperimentOutput out = run_experiment(cfg);
  std::size_t csv = 0, svg = 0, manifest = 0;
  for (const auto& e : fs::directory_iterator(cfg.output_dir)) {
    const auto ext = e.path().extension();
    csv += ext == ".csv";
    svg += ext == ".svg";
    manifest += e.path().filename() == "manifest.json";
  }
  CHECK(csv == 4);
  CHECK(svg == 1);
  CHECK(manifest == 1);
  for (const char* f : {"trace_seed_0.csv", "trace_seed_1.csv", "mean.csv"}) {
    CHECK(line_count(slurp(cfg.output_dir / f)) == 1 + cfg.epochs + 1);  // header + epochs 0..E
  }
  const auto m = nlohmann::json::parse(slurp(cfg.output_dir / "manifest.json"));
  CHECK(m.at("config").at("n") == 100);
  CHECK(m.at("runs").size() == 2);

  cfg.output_dir = dir / "b";
  run_experiment(cfg);
  for (const char* f : {"trace_seed_0.csv", "trace_seed_1.csv", "mean.csv", "reconstruction.csv", "convergence.svg"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("ct output is a 64x64 pgm") {
  const fs::path dir = scratch("ct");
  ExperimentConfig cfg = ExperimentConfig::defaults(Preset::ct);
  cfg.epochs = 1;
  cfg.output_dir = dir;
  run_experiment(cfg);
  const std::string pgm = slurp(dir / "reconstruction.pgm");
  CHECK(pgm.rfind("P5\n64 64\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n64 64\n255\n").size() + 64 * 64);
}

TEST_CASE("cli norm-estimate") {
  const fs::path dir = scratch("cli_norm");
  spit(dir / "d.csv", "3,0\n0,1\n");
  Exec e = cli("norm-estimate " + (dir / "d.csv").string() + " --rx 2 --ry 2");
  CHECK(e.code == 0);
  CHECK(e.out.find("norm 3\n") != std::string::npos);
  CHECK(e.out.find("iterations") != std::string::npos);
  CHECK(e.out.find("converged true") != std::string::npos);

  e = cli("norm-estimate " + (dir / "d.csv").string() + " --rx 1.5 --ry 3 --max-iter 1 --tol 1e-300 --restarts 0");
  CHECK(e.code == 0);
  CHECK(e.out.find("converged false") != std::string::npos);

  spit(dir / "bad.csv", "1,2\n3,x\n");
  CHECK(cli("norm-estimate " + (dir / "bad.csv").string() + " --rx 2 --ry 2").code == 1);
  CHECK(cli("norm-estimate " + (dir / "none.csv").string() + " --rx 2 --ry 2").code == 3);
  CHECK(cli("norm-estimate " + (dir / "d.csv").string()).code == 1);
}

TEST_CASE("cli experiment and solve exit codes") {
  const fs::path dir = scratch("cli_run");
  Exec e = cli("experiment integral n=100 n_batches=10 r_x=1.5 --epochs 3 --seeds 2 --out-dir " + (dir / "ok").string());
  CHECK(e.code == 0);
  CHECK(fs::exists(dir / "ok" / "manifest.json"));
  CHECK(line_count(slurp(dir / "ok" / "mean.csv")) == 5);

  CHECK(cli("experiment integral r_x=1 --out-dir " + (dir / "bad").string()).code == 1);
  CHECK(cli("experiment integral n=100 n_batches=30 --out-dir " + (dir / "bad").string()).code == 1);
  CHECK(cli("experiment nonsense").code == 1);
  // a step far beyond the stable range
  CHECK(cli("experiment integral n=100 n_batches=10 'schedule={\"type\":\"constant\",\"mu0\":1000}' --epochs 5 --out-dir " +
            (dir / "div").string())
            .code == 2);

  spit(dir / "cfg.json", R"({"preset": "integral", "n": 100, "n_batches": 10, "epochs": 2})");
  e = cli("solve " + (dir / "cfg.json").string() + " --out-dir " + (dir / "solve").string());
  CHECK(e.code == 0);
  CHECK(line_count(slurp(dir / "solve" / "trace_seed_0.csv")) == 4);
  spit(dir / "typo.json", R"({"preset": "integral", "epoch": 2})");
  CHECK(cli("solve " + (dir / "typo.json").string()).code == 1);
  CHECK(cli("solve " + (dir / "missing.json").string()).code == 3);
  CHECK(cli("--help").code == 0);
}
