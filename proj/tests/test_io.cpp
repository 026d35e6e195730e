#include "hmsh/gibbs.hpp"
#include "hmsh/io.hpp"
#include "hmsh/simulate.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace hmsh;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hmsh_test_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

bool same_state(const ParameterState& a, const ParameterState& b) {
  if (a.b0 != b.b0 || a.a != b.a || a.variances != b.variances || a.process_of_shock != b.process_of_shock ||
      a.paths != b.paths || a.transitions != b.transitions || a.initials != b.initials)
    return false;
  for (auto pair : {&ParameterState::shrinkage_a, &ParameterState::shrinkage_b}) {
    const auto& x = a.*pair;
    const auto& y = b.*pair;
    if (x.gamma != y.gamma || x.local != y.local || x.global != y.global) return false;
  }
  if (a.variance_posterior.size() != b.variance_posterior.size()) return false;
  for (std::size_t i = 0; i < a.variance_posterior.size(); ++i)
    if (a.variance_posterior[i].scales != b.variance_posterior[i].scales ||
        a.variance_posterior[i].shapes != b.variance_posterior[i].shapes)
      return false;
  return true;
}

}  // namespace

TEST(Csv, ReadWithDateColumn) {
  const auto p = scratch("a.csv");
  write_text(p, "date,y1,y2\n2000-01,1.5,2\n\n2000-02,-3e-2,4\n");
  const auto t = read_csv(p.string());
  EXPECT_EQ(t.columns, (std::vector<std::string>{"y1", "y2"}));
  ASSERT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.values(1, 0), -3e-2);
  EXPECT_EQ(t.values(1, 1), 4.0);
}

TEST(Csv, Errors) {
  const auto p = scratch("bad.csv");
  write_text(p, "y1,y2\n1,2\n3,abc\n");
  try {
    read_csv(p.string());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
  write_text(p, "y1,y2\n1\n");
  EXPECT_THROW(read_csv(p.string()), DataError);
  write_text(p, "y1,y2\n");
  EXPECT_THROW(read_csv(p.string()), DataError);
  EXPECT_THROW(read_csv((p.string() + ".missing")), DataError);
}

TEST(Csv, WriteReadRoundTrip) {
  const auto p = scratch("rt.csv");
  const Matrix m = Matrix::Random(5, 3);
  write_csv(p.string(), {"a", "b", "c"}, m);
  EXPECT_EQ(read_csv(p.string()).values, m);
}

TEST(Config, ParseOverridesAndTypes) {
  Config c = Config::parse("# comment\nsampler.draws = 100\nmodel.volatility = HMSH(20) # trailing\nflag = yes\n");
  c.set_assignment("sampler.draws=250");
  EXPECT_EQ(c.get_int("sampler.draws", 1), 250);
  EXPECT_EQ(c.get("model.volatility", ""), "HMSH(20)");
  EXPECT_TRUE(c.get_bool("flag", false));
  EXPECT_EQ(c.get_double("missing", 0.25), 0.25);
  EXPECT_THROW(Config::parse("no equals sign"), ConfigError);
  EXPECT_THROW(c.set_assignment("=3"), ConfigError);
  c.set("bad", "12x");
  try {
    c.get_int("bad", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "bad");
  }
}

TEST(Config, ListsRespectParentheses) {
  Config c = Config::parse("m = HMSH(20), HMSH(3,stationary) ,EXH\nt = 260, 780\n");
  EXPECT_EQ(c.get_list("m", ""), (std::vector<std::string>{"HMSH(20)", "HMSH(3,stationary)", "EXH"}));
  EXPECT_EQ(c.get_int_list("t", ""), (std::vector<int>{260, 780}));
  c.set("u", "HMSH(2");
  EXPECT_THROW(c.get_list("u", ""), ConfigError);
}

TEST(Config, CanonicalIsOrderIndependentAndTracksDefaults) {
  Config a = Config::parse("x = 1\ny = 2\n");
  Config b = Config::parse("y = 2\nx = 1\nunused = 5\nmeta.version = old\n");
  for (const Config* c : {&a, &b}) {
    c->get_int("x", 0);
    c->get_int("y", 0);
    c->get_int("z", 7);
  }
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.canonical(), "x = 1\ny = 2\nz = 7\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(b.unused_keys(), std::vector<std::string>{"unused"});
}

TEST(Config, PathsResolveAgainstConfigDirectory) {
  const auto p = scratch("sub/run.cfg");
  fs::create_directories(p.parent_path());
  write_text(p, "data.path = ../data.csv\n");
  const Config c = Config::load(p.string());
  EXPECT_EQ(fs::path(c.get_path("data.path", "")), (p.parent_path().parent_path() / "data.csv").lexically_normal());
}

TEST(Manifest, IsARerunnableConfig) {
  const auto dir = scratch("manifest_dir");
  fs::create_directories(dir);
  Config c = Config::parse("sampler.seed = 9\n");
  c.get_u64("sampler.seed", 1);
  c.get_int("sampler.draws", 100);
  write_manifest(dir.string(), "estimate", c, "test", 1.5, {"posterior.bin"});
  const Config back = Config::load((dir / "manifest.cfg").string());
  EXPECT_EQ(back.get_u64("sampler.seed", 0), 9u);
  EXPECT_EQ(back.get_int("sampler.draws", 0), 100);
  EXPECT_EQ(back.get("meta.command", ""), "estimate");
  EXPECT_TRUE(back.unused_keys().empty());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(Posterior, BinaryRoundTripIsExact) {
  for (const char* model : {"HMSH(3)", "MSH(2)", "EXH"}) {
    const auto sim = generate(DgpSpec::scenario(DgpKind::HMSH2, "none", 120, 5));
    Matrix raw(121, 2);
    raw.row(0).setZero();
    raw.bottomRows(120) = sim.y;
    const TimeSeriesData data = build_regressors(raw, 1, constant_term(121));
    VolatilitySpec v = VolatilitySpec::parse(model);
    if (v.variant == VolatilityVariant::Exh) v = VolatilitySpec::exh({40, 80});
    const auto post = run_sampler(data, v, PriorSpec::defaults(2, 1, 1), SamplerConfig{60, 20, 4, 3, 100, true});
    const auto p = scratch(std::string("post_") + model[0] + ".bin");
    write_posterior(p.string(), post);
    const auto back = read_posterior(p.string());
    ASSERT_EQ(back.size(), post.size());
    EXPECT_EQ(back.volatility.name(), post.volatility.name());
    EXPECT_EQ(back.volatility.breakpoints, post.volatility.breakpoints);
    EXPECT_EQ(back.volatility.sparse, post.volatility.sparse);
    EXPECT_EQ(back.lag_order, 1);
    EXPECT_EQ(back.deterministic_count, 1);
    EXPECT_EQ(back.burn_in, 20);
    EXPECT_EQ(back.thinning, 4);
    EXPECT_EQ(back.diagnostics.sweeps, post.diagnostics.sweeps);
    for (std::size_t i = 0; i < post.size(); ++i) EXPECT_TRUE(same_state(post.draws[i], back.draws[i])) << model << " draw " << i;
  }
}

TEST(Posterior, CorruptFilesRejected) {
  const auto p = scratch("junk.bin");
  write_text(p, "not a posterior");
  EXPECT_THROW(read_posterior(p.string()), DataError);
  write_text(p, "HMSHPOS1");
  EXPECT_THROW(read_posterior(p.string()), DataError);
}
