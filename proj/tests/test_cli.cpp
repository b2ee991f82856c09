#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "doctest.h"
#include "fastknock/io.hpp"
#include "fastknock/synth.hpp"
#include "support/oracles.hpp"

using namespace fastknock;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;  // stdout and stderr
};

Result run(const std::string& args) {
  const std::string cmd = std::string(FASTKNOCK_BIN) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& tag) : dir(fs::temp_directory_path() / ("fk_cli_" + tag)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json load_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

double printed(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + " ");
  REQUIRE(pos != std::string::npos);
  return std::stod(out.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("usage errors exit nonzero") {
  CHECK(run("").status != 0);
  CHECK(run("frobnicate").status != 0);
  CHECK(run("solve --solver equi").status != 0);
  CHECK(run("--help").status == 0);
}

TEST_CASE("estimate") {
  Workspace ws("estimate");
  Matrix H(4, 8);
  H << 1, 1, 1, 1, -1, -1, -1, -1,
       1, 1, -1, -1, 1, 1, -1, -1,
       1, -1, 1, -1, 1, -1, 1, -1,
       1, -1, -1, 1, 1, -1, -1, 1;
  write_matrix_csv(ws("id.csv"), H);
  auto r = run("estimate --data " + ws("id.csv") + " -k 1 --out-d " + ws("d.csv") + " --out-u " + ws("u.csv"));
  CHECK(r.status == 0);
  CHECK(read_matrix_csv(ws("u.csv")).norm() < 1e-10);
  CHECK((read_vector_csv(ws("d.csv")).array() - 1.0).abs().maxCoeff() < 1e-10);

  // Planted model: the fitted residual is below the sampling noise of the empirical correlation.
  Rng rng(91);
  const FactorModel m = random_factor_correlation(20, 2, rng);
  const Matrix X = sample_factor_data(m, 2000, rng);
  write_matrix_csv(ws("x.csv"), X);
  r = run("estimate --data " + ws("x.csv") + " -k 2 --out-d " + ws("d.csv") + " --out-u " + ws("u.csv"));
  REQUIRE(r.status == 0);
  const Matrix S = empirical_correlation(DataMatrix::standardize(X));
  CHECK(printed(r.out, "residual") <= (S - m.dense()).norm());
  CHECK(read_matrix_csv(ws("u.csv")).cols() == 2);

  r = run("estimate --data " + ws("nope.csv") + " --out-d " + ws("d.csv") + " --out-u " + ws("u.csv"));
  CHECK(r.status != 0);
  CHECK(r.out.find("nope.csv") != std::string::npos);

  std::ofstream(ws("bad.csv")) << "1,2,3\n4,five,6\n";
  r = run("estimate --data " + ws("bad.csv") + " --out-d " + ws("d.csv") + " --out-u " + ws("u.csv"));
  CHECK(r.status != 0);
  CHECK(r.out.find("bad.csv:2") != std::string::npos);
}

TEST_CASE("solve") {
  Workspace ws("solve");
  write_matrix_csv(ws("id.csv"), Matrix::Identity(3, 3));
  auto r = run("solve --cov " + ws("id.csv") + " --solver full -o " + ws("s.csv"));
  REQUIRE(r.status == 0);
  CHECK((read_vector_csv(ws("s.csv")).array() - 1.0).abs().maxCoeff() < 1e-12);
  const auto metrics = load_json(ws("s.csv.json"));
  for (const char* key : {"objective", "feasibility_margin", "cycles", "wall_seconds"}) CHECK(metrics.contains(key));

  write_matrix_csv(ws("rho.csv"), oracle::equicorrelated(2, 0.8));
  for (const char* solver : {"full", "full-naive", "equi"}) {
    r = run("solve --cov " + ws("rho.csv") + " --solver " + solver + " -o " + ws("s.csv"));
    REQUIRE(r.status == 0);
    CHECK((read_vector_csv(ws("s.csv")).array() - 0.4).abs().maxCoeff() <= 1e-4);
  }

  Rng rng(92);
  const FactorModel m = random_factor_correlation(200, 5, rng);
  write_vector_csv(ws("d.csv"), m.d);
  write_matrix_csv(ws("u.csv"), m.U);
  r = run("solve --model-d " + ws("d.csv") + " --model-u " + ws("u.csv") + " --solver factor -o " + ws("s.csv"));
  REQUIRE(r.status == 0);
  const int cycles = load_json(ws("s.csv.json"))["cycles"];
  CHECK(cycles >= 1);
  CHECK(cycles <= 50);

  write_matrix_csv(ws("ns.csv"), 2.0 * Matrix::Identity(2, 2));
  r = run("solve --cov " + ws("ns.csv") + " --solver full -o " + ws("s.csv"));
  CHECK(r.status != 0);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("sample") {
  Workspace ws("sample");
  Rng rng(93);
  const FactorModel m = random_factor_correlation(10, 2, rng);
  write_vector_csv(ws("d.csv"), m.d);
  write_matrix_csv(ws("u.csv"), m.U);
  write_matrix_csv(ws("x.csv"), sample_factor_data(m, 30, rng));
  write_vector_csv(ws("zero.csv"), Vector::Zero(10));
  const std::string model = " --model-d " + ws("d.csv") + " --model-u " + ws("u.csv");
  auto r = run("sample --data " + ws("x.csv") + model + " --s " + ws("zero.csv") + " -o " + ws("xt.csv"));
  REQUIRE(r.status == 0);
  CHECK(read_matrix_csv(ws("xt.csv")) == read_matrix_csv(ws("x.csv")));

  write_vector_csv(ws("s.csv"), Vector::Constant(10, 0.1));
  run("sample --data " + ws("x.csv") + model + " --s " + ws("s.csv") + " --seed 7 -o " + ws("a.csv"));
  run("sample --data " + ws("x.csv") + model + " --s " + ws("s.csv") + " --seed 7 -o " + ws("b.csv"));
  CHECK(slurp(ws("a.csv")) == slurp(ws("b.csv")));
  CHECK(!slurp(ws("a.csv")).empty());

  write_vector_csv(ws("big.csv"), Vector::Constant(10, 5.0));
  write_matrix_csv(ws("cov.csv"), m.dense());
  r = run("sample --data " + ws("x.csv") + " --cov " + ws("cov.csv") + " --s " + ws("big.csv") + " -o " + ws("c.csv"));
  CHECK(r.status != 0);
  CHECK(r.out.find("hybrid") != std::string::npos);
}

TEST_CASE("filter") {
  Workspace ws("filter");
  Rng rng(94);
  const Index p = 12;
  const Index n = 60;
  Matrix X = rng.normal_matrix(p, n);
  const Matrix Xt = rng.normal_matrix(p, n);
  Vector labels(n);
  for (Index i = 0; i < n; ++i) labels(i) = i % 2 == 0 ? 1.0 : -1.0;
  for (Index j = 0; j < 6; ++j) X.row(j) += 3.0 * labels.transpose();  // separable signals
  write_matrix_csv(ws("x.csv"), X);
  write_matrix_csv(ws("xt.csv"), Xt);
  write_vector_csv(ws("y.csv"), labels);
  write_index_csv(ws("truth.csv"), {0, 1, 2, 3, 4, 5});
  const std::string base = "filter --data " + ws("x.csv") + " --knockoffs " + ws("xt.csv");
  auto r = run(base + " -y " + ws("y.csv") + " --statistic centroid --q 0.2 --truth " + ws("truth.csv") + " -o " +
               ws("f"));
  REQUIRE(r.status == 0);
  const auto summary = load_json(ws("f.json"));
  CHECK(std::isfinite(printed(r.out, "threshold")));
  const auto selected = read_index_csv(ws("f.selected.csv"));
  CHECK(std::find(selected.begin(), selected.end(), 0) != selected.end());
  CHECK(read_vector_csv(ws("f.W.csv")).size() == p);
  CHECK(summary.contains("threshold"));

  write_vector_csv(ws("null.csv"), rng.normal_vector(n));
  write_matrix_csv(ws("xn.csv"), rng.normal_matrix(p, n));
  r = run("filter --data " + ws("xn.csv") + " --knockoffs " + ws("xt.csv") + " -y " + ws("null.csv") +
          " --q 0.001 -o " + ws("g"));
  REQUIRE(r.status == 0);
  CHECK(read_index_csv(ws("g.selected.csv")).empty());

  write_vector_csv(ws("short.csv"), Vector::Ones(n - 1));
  r = run(base + " -y " + ws("short.csv") + " -o " + ws("h"));
  CHECK(r.status != 0);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("synth") {
  Workspace ws("synth");
  auto r = run("synth -n 50 -p 20 -k 3 --sparsity 4 --amplitude 0 --seed 5 -o " + ws("a"));
  REQUIRE(r.status == 0);
  CHECK(read_vector_csv(ws("a/beta.csv")).isZero());
  CHECK(read_index_csv(ws("a/support.csv")).size() == 4);
  run("synth -n 50 -p 20 -k 3 --sparsity 4 --amplitude 0 --seed 5 -o " + ws("b"));
  for (const char* f : {"X.csv", "y.csv", "beta.csv", "support.csv", "d.csv", "U.csv"})
    CHECK(slurp(ws(std::string("a/") + f)) == slurp(ws(std::string("b/") + f)));

  r = run("synth --seed 1 -o " + ws("paper"));
  REQUIRE(r.status == 0);
  const Matrix X = read_matrix_csv(ws("paper/X.csv"));
  CHECK(X.rows() == 500);
  CHECK(X.cols() == 1000);
  CHECK(read_matrix_csv(ws("paper/U.csv")).cols() == 50);
  CHECK(read_index_csv(ws("paper/support.csv")).size() == 50);
}

TEST_CASE("bench") {
  Workspace ws("bench");
  auto r = run("bench --mode solver-scaling -o " + ws("empty.csv"));
  REQUIRE(r.status == 0);
  CHECK(slurp(ws("empty.csv")) == "p,k,solver,cycles,wall_seconds,objective,feasibility_margin,fdp,power,amplitude,trial\n");

  r = run("bench --mode sampler-scaling --p-grid 500,1000,2000 -k 5 -o " + ws("s.csv"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("slope") != std::string::npos);
  CHECK(load_json(ws("s.csv.slope.json")).contains("slope"));

  r = run("bench --mode fdr-power -n 100 -p 20 -k 2 --sparsity 4 --amplitudes 5,10 --trials 2 --seed 3 -o " +
          ws("f.csv"));
  REQUIRE(r.status == 0);
  const std::string csv = slurp(ws("f.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 2);  // header, amplitudes x trials x solvers
}

TEST_CASE("pipeline") {
  Workspace ws("pipeline");
  REQUIRE(run("synth -n 300 -p 40 -k 4 --sparsity 8 --amplitude 12 --seed 8 -o " + ws("data")).status == 0);
  const std::string common = "pipeline --data " + ws("data/X.csv") + " -y " + ws("data/y.csv") + " --truth " +
                             ws("data/support.csv") + " --seed 2";
  auto r = run(common + " --model-d " + ws("data/d.csv") + " --model-u " + ws("data/U.csv") + " -o " + ws("exact"));
  REQUIRE(r.status == 0);
  const auto summary = load_json(ws("exact/summary.json"));
  CHECK(summary.contains("fdp"));
  CHECK(summary.contains("power"));
  for (const char* f : {"s.csv", "knockoffs.csv", "W.csv", "selected.csv"}) CHECK(fs::exists(ws(std::string("exact/") + f)));

  r = run(common + " -k 4 --shrink --solver hybrid -o " + ws("est"));
  REQUIRE(r.status == 0);
  CHECK(fs::exists(ws("est/d.csv")));
  for (const char* out : {"est2", "est3"}) REQUIRE(run(common + " -k 4 --solver full -o " + ws(out)).status == 0);
  CHECK(slurp(ws("est2/knockoffs.csv")) == slurp(ws("est3/knockoffs.csv")));

  // Flags override the JSON config.
  std::ofstream(ws("cfg.json")) << R"({"solver": "equi", "q": 0.2})";
  r = run(common + " -k 4 --config " + ws("cfg.json") + " --q 0.3 -o " + ws("cfg"));
  REQUIRE(r.status == 0);
  const auto s2 = load_json(ws("cfg/summary.json"));
  CHECK(s2["solver"] == "equi");
  CHECK(s2["q"] == 0.3);
}
