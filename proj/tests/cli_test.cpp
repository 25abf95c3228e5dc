// End-to-end tests of the command-line binary, run as a subprocess. They pin
// the exit-code contract (0 ok / 2 config / 3 runtime), byte-determinism of
// outputs, flag overrides, the sweep resume protocol, and small exact
// spectral examples.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    char tmpl[] = "/tmp/reconcliXXXXXX";
    ASSERT_NE(mkdtemp(tmpl), nullptr);
    dir_ = tmpl;
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string path(const std::string& name) const { return dir_ + "/" + name; }

  std::string write_file(const std::string& name, const std::string& text) const {
    const auto p = path(name);
    std::ofstream os(p);
    os << text;
    return p;
  }

  static std::string read_file(const std::string& p) {
    std::ifstream is(p);
    EXPECT_TRUE(is.good()) << "missing file: " << p;
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  CliResult run(const std::string& args) const {
    CliResult res;
    const auto errfile = path("stderr.txt");
    const std::string cmd =
        std::string("\"") + RECON_CLI_PATH + "\" " + args + " 2>" + errfile;
    FILE* pipe = popen(cmd.c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    char buf[4096];
    std::size_t got = 0;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, got);
    const int status = pclose(pipe);
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    res.err = read_file(errfile);
    return res;
  }

  std::string dir_;
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

const char* kAttackCfg =
    "mechanism = boolean-count\n"
    "f = and2\n"
    "n = 8\n"
    "d = 12\n"
    "noise = bounded-uniform\n"
    "beta = 0.25\n"
    "decoder = ls\n"
    "trials = 3\n"
    "seed = 7\n";

TEST_F(CliTest, SelftestPasses) {
  const auto res = run("selftest");
  EXPECT_EQ(res.code, 0) << res.out << res.err;
  EXPECT_NE(res.out.find("[ok] rng reference stream"), std::string::npos);
  EXPECT_EQ(res.out.find("[fail]"), std::string::npos) << res.out;
}

TEST_F(CliTest, HelpAndMissingFlags) {
  EXPECT_EQ(run("--help").code, 0);
  const auto res = run("attack");  // --config is required
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.err.find("--config"), std::string::npos) << res.err;
  EXPECT_EQ(run("").code, 2);  // a subcommand is required
}

TEST_F(CliTest, AttackRunsAreByteIdentical) {
  const auto cfg = write_file("a.cfg", kAttackCfg);
  const auto r1 = run("attack --config " + cfg + " --out " + path("r1.csv"));
  const auto r2 = run("attack --config " + cfg + " --out " + path("r2.csv"));
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  const auto f1 = read_file(path("r1.csv"));
  EXPECT_EQ(f1, read_file(path("r2.csv")));

  // stdout output is the same bytes as the file output
  const auto rs = run("attack --config " + cfg);
  ASSERT_EQ(rs.code, 0);
  EXPECT_EQ(rs.out, f1);

  // shape: schema line, header, one row per trial, summary row
  const auto lines = split_lines(f1);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "#schema=1");
  EXPECT_EQ(lines[1],
            "mechanism,decoder,n,d,k,beta,gamma,seed,hamming_fraction,sigma_min,"
            "wall_ms");
  EXPECT_EQ(lines[2].rfind("boolean-count,ls,8,12,1,0.25,0,", 0), 0u);
  EXPECT_EQ(lines[5].rfind("summary,ls,8,12,1,0.25,0,3,", 0), 0u);
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const auto cfg = write_file("a.cfg", kAttackCfg);
  const auto base = run("attack --config " + cfg);
  const auto reseeded = run("attack --config " + cfg + " --seed 99");
  ASSERT_EQ(base.code, 0);
  ASSERT_EQ(reseeded.code, 0);
  EXPECT_NE(base.out, reseeded.out);

  const auto cfg99 = write_file(
      "a99.cfg", std::string(kAttackCfg).replace(
                     std::string(kAttackCfg).find("seed = 7"), 8, "seed = 99"));
  const auto from_config = run("attack --config " + cfg99);
  ASSERT_EQ(from_config.code, 0);
  EXPECT_EQ(from_config.out, reseeded.out);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  const auto unknown = write_file("u.cfg",
                                  "mechanism = linreg\nn = 5\nd = 20\nbogus = 1\n");
  auto res = run("attack --config " + unknown);
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.err.find("unknown key 'bogus'"), std::string::npos) << res.err;

  const auto cap = write_file(
      "cap.cfg", "mechanism = boolean-count\nf = maj3\nn = 5\nd = 2000\n");
  res = run("attack --config " + cap);
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.err.find("row cap of 1000000"), std::string::npos) << res.err;

  const auto mest_lp = write_file(
      "m.cfg", "mechanism = mest\nloss = squared\nn = 5\nd = 20\ndecoder = lp\n");
  res = run("attack --config " + mest_lp);
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.err.find("decoder=ls"), std::string::npos) << res.err;

  res = run("attack --config " + path("missing.cfg"));
  EXPECT_EQ(res.code, 2);
}

TEST_F(CliTest, RuntimeFailuresExitThree) {
  // d < n passes validation but the decode stage cannot identify n bits.
  const auto underdetermined = write_file(
      "r.cfg", "mechanism = boolean-count\nf = and2\nn = 10\nd = 3\n");
  const auto res = run("attack --config " + underdetermined);
  EXPECT_EQ(res.code, 3);
  EXPECT_NE(res.err.find("decode"), std::string::npos) << res.err;
}

TEST_F(CliTest, SpectralIdentityIsPinned) {
  const auto cfg = write_file("s.cfg", "family = identity\nd = 5\nn = 5\nseeds = 1\n");
  const auto res = run("spectral --config " + cfg);
  ASSERT_EQ(res.code, 0) << res.err;
  const auto lines = split_lines(res.out);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "#schema=1");
  EXPECT_EQ(lines[1],
            "family,h,d,n,k,seed,sigma_min,op_norm,euclid_ratio,probes");
  // identity: both singular values 1; the canonical-basis probe attains
  // ||e_j||_1 / sqrt(5) = 0.4472...
  EXPECT_EQ(lines[2].rfind("identity,-,5,5,1,", 0), 0u);
  EXPECT_NE(lines[2].find(",1,1,0.4472135955,"), std::string::npos) << lines[2];
}

TEST_F(CliTest, PerturbedAtZeroScaleMatchesRademacher) {
  const auto pcfg = write_file(
      "p.cfg",
      "family = perturbed\nd = 20,30\nn = 5\nseeds = 3\nrank1_scale = 0\nseed = 11\n");
  const auto rcfg = write_file(
      "r.cfg", "family = rademacher\nd = 20,30\nn = 5\nseeds = 3\nseed = 11\n");
  const auto pr = run("spectral --config " + pcfg);
  const auto rr = run("spectral --config " + rcfg);
  ASSERT_EQ(pr.code, 0);
  ASSERT_EQ(rr.code, 0);
  auto pl = split_lines(pr.out);
  auto rl = split_lines(rr.out);
  ASSERT_EQ(pl.size(), rl.size());
  ASSERT_EQ(pl.size(), 8u);
  for (std::size_t i = 2; i < pl.size(); ++i) {
    // identical except the family label
    EXPECT_EQ(pl[i].substr(pl[i].find(',')), rl[i].substr(rl[i].find(',')));
  }
}

TEST_F(CliTest, RowfuncSpectralShape) {
  const auto cfg = write_file(
      "rf.cfg", "family = rowfunc\nh = f2:maj3\nd = 8,10\nn = 6\nseeds = 2\nseed = 2\n");
  const auto res = run("spectral --config " + cfg);
  ASSERT_EQ(res.code, 0) << res.err;
  const auto lines = split_lines(res.out);
  ASSERT_EQ(lines.size(), 6u);  // schema + header + 2 d-values x 2 seeds
  for (std::size_t i = 2; i < lines.size(); ++i)
    EXPECT_EQ(lines[i].rfind("rowfunc,f2:maj3,", 0), 0u) << lines[i];
  // k is inferred from the release function's arity
  EXPECT_NE(lines[2].find(",8,6,2,"), std::string::npos) << lines[2];
  EXPECT_NE(lines[4].find(",10,6,2,"), std::string::npos) << lines[4];

  const auto bad = write_file(
      "bad.cfg",
      "family = rowfunc\nh = f2:maj3\nentries = rademacher\nd = 8\nn = 6\n");
  const auto rb = run("spectral --config " + bad);
  EXPECT_EQ(rb.code, 2);
  EXPECT_NE(rb.err.find("domain"), std::string::npos) << rb.err;
}

const char* kSweepCfg =
    "mechanism = linreg\n"
    "n = 8,10\n"
    "d = 30,40\n"
    "noise = bounded-uniform\n"
    "beta = 0.05\n"
    "trials = 2\n"
    "seed = 3\n";

TEST_F(CliTest, SweepCoversTheGridAndResumes) {
  const auto out = path("sweep.csv");
  const auto cfg = write_file("w.cfg", std::string(kSweepCfg) + "out = " + out + "\n");
  ASSERT_EQ(run("sweep --config " + cfg).code, 0);
  const auto fresh = read_file(out);
  const auto lines = split_lines(fresh);
  // schema + header + 4 cells x (2 trials + summary)
  ASSERT_EQ(lines.size(), 14u);
  EXPECT_EQ(lines[0], "#schema=1");
  EXPECT_EQ(lines[1],
            "cell,mechanism,decoder,n,d,k,beta,gamma,seed,hamming_fraction,"
            "sigma_min,wall_ms");
  for (int cell = 0; cell < 4; ++cell) {
    const auto prefix = std::to_string(cell) + ",";
    EXPECT_EQ(lines[2 + 3 * cell].rfind(prefix + "linreg,", 0), 0u);
    EXPECT_EQ(lines[4 + 3 * cell].rfind(prefix + "summary,", 0), 0u);
  }

  // Truncate to one complete cell plus a partial second cell, then resume:
  // the result must be byte-identical to the fresh run.
  {
    std::ofstream os(out);
    for (int i = 0; i < 6; ++i) os << lines[i] << "\n";  // cell 0 + 1 row of cell 1
  }
  ASSERT_EQ(run("sweep --config " + cfg).code, 0);
  EXPECT_EQ(read_file(out), fresh);

  // Resume over a complete file is a byte-identical rewrite too.
  ASSERT_EQ(run("sweep --config " + cfg).code, 0);
  EXPECT_EQ(read_file(out), fresh);
}

TEST_F(CliTest, SingleCellSweepMatchesAttack) {
  const auto acfg = write_file("a.cfg", kAttackCfg);
  const auto wcfg = write_file("w.cfg", kAttackCfg);  // scalar grids = one cell
  const auto attack = run("attack --config " + acfg);
  const auto sweep = run("sweep --config " + wcfg);
  ASSERT_EQ(attack.code, 0);
  ASSERT_EQ(sweep.code, 0);
  const auto al = split_lines(attack.out);
  const auto wl = split_lines(sweep.out);
  ASSERT_EQ(al.size(), wl.size());
  EXPECT_EQ(wl[1], "cell," + al[1]);
  for (std::size_t i = 2; i < al.size(); ++i) EXPECT_EQ(wl[i], "0," + al[i]);
}

TEST_F(CliTest, OversizedGridExitsTwo) {
  std::string n_list = "1";
  for (int i = 0; i < 24; ++i) n_list += ",1";  // 25 values
  std::string d_list = "20";
  for (int i = 0; i < 19; ++i) d_list += ",20";  // 20 values
  std::string beta_list = "0.1";
  for (int i = 0; i < 20; ++i) beta_list += ",0.1";  // 21 values
  const auto cfg = write_file("g.cfg",
                              "mechanism = linreg\nnoise = bounded-uniform\n"
                              "n = " + n_list + "\nd = " + d_list +
                              "\nbeta = " + beta_list + "\n");
  const auto res = run("sweep --config " + cfg);
  EXPECT_EQ(res.code, 2);
  EXPECT_NE(res.err.find("grid too large"), std::string::npos) << res.err;
}

}  // namespace
