#include "hmsh/simulate.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace hmsh;

TEST(Generate, RoundTripThroughB0) {
  for (DgpKind k : {DgpKind::SV, DgpKind::GARCH, DgpKind::MSH2, DgpKind::HMSH2, DgpKind::Homoskedastic}) {
    const auto sim = generate(DgpSpec::scenario(k, "none", 300, 7));
    const Matrix u = (sim.b0 * sim.y.transpose()).transpose();
    EXPECT_LT((u - sim.u).cwiseAbs().maxCoeff(), 1e-10) << dgp_name(k);
    EXPECT_EQ(sim.b0, monte_carlo_b0());
  }
}

TEST(Generate, RegimeVariancesSumToTwo) {
  for (const auto& v : dgp_regime_variances()) EXPECT_DOUBLE_EQ(v.sum(), 2.0);
  const auto sim = generate(DgpSpec::scenario(DgpKind::HMSH2, "none", 500, 3));
  const auto v = dgp_regime_variances();
  for (int n = 0; n < 2; ++n)
    for (int t = 0; t < 500; ++t) EXPECT_EQ(sim.sigma2(t, n), v[n](sim.paths[n][t]));
}

TEST(Generate, HomoskedasticShocksPinnedAtOne) {
  for (DgpKind k : {DgpKind::SV, DgpKind::GARCH, DgpKind::MSH2, DgpKind::HMSH2}) {
    const auto both = generate(DgpSpec::scenario(k, "1&2", 200, 11));
    EXPECT_TRUE((both.sigma2.array() == 1.0).all());
    const auto first = generate(DgpSpec::scenario(k, "1", 200, 11));
    EXPECT_TRUE((first.sigma2.col(0).array() == 1.0).all());
    EXPECT_FALSE((first.sigma2.col(1).array() == 1.0).all());
    const auto second = generate(DgpSpec::scenario(k, "2", 200, 11));
    EXPECT_TRUE((second.sigma2.col(1).array() == 1.0).all());
  }
  const auto h = generate(DgpSpec::scenario(DgpKind::Homoskedastic, "none", 100, 1));
  EXPECT_TRUE((h.sigma2.array() == 1.0).all());
}

TEST(Generate, Deterministic) {
  const auto spec = DgpSpec::scenario(DgpKind::GARCH, "none", 250, 99);
  EXPECT_EQ(generate(spec).y, generate(spec).y);
  auto other = spec;
  other.seed = 100;
  EXPECT_NE(generate(spec).y, generate(other).y);
}

TEST(Generate, SingleSwitchingShockSameUnderMshAndHmsh) {
  for (const char* label : {"1", "2"}) {
    const auto a = generate(DgpSpec::scenario(DgpKind::MSH2, label, 400, 5));
    const auto b = generate(DgpSpec::scenario(DgpKind::HMSH2, label, 400, 5));
    EXPECT_EQ(a.y, b.y);
  }
}

TEST(Generate, SwitchDatesCommonUnderMshIndependentUnderHmsh) {
  const int t_len = 100000;
  const auto msh = generate(DgpSpec::scenario(DgpKind::MSH2, "none", t_len, 21));
  EXPECT_EQ(msh.paths[0], msh.paths[1]);
  const auto hmsh = generate(DgpSpec::scenario(DgpKind::HMSH2, "none", t_len, 21));
  int s0 = 0, s1 = 0, both = 0;
  for (int t = 1; t < t_len; ++t) {
    const bool a = hmsh.paths[0][t] != hmsh.paths[0][t - 1];
    const bool b = hmsh.paths[1][t] != hmsh.paths[1][t - 1];
    s0 += a;
    s1 += b;
    both += a && b;
  }
  const double expected = double(s0) * s1 / (t_len - 1);
  EXPECT_NEAR(s0 / double(t_len - 1), 0.02, 0.003);
  EXPECT_NEAR(both, expected, 4.0 * std::sqrt(expected));
}

// E sigma2_t = 0.02 + 0.98 E sigma2_{t-1} with sigma2_0 = 1, so the mean is 1
// at every t. Short series keep the variance finite; the fourth moment of
// this GARCH does not exist in the long run.
TEST(Generate, GarchLongRunVarianceNearOne) {
  const int reps = 20000;
  std::vector<double> per_rep;
  for (int rep = 0; rep < reps; ++rep) {
    const auto sim = generate(DgpSpec::scenario(DgpKind::GARCH, "none", 40, 1000 + rep));
    per_rep.push_back(sim.sigma2.mean());
  }
  double mean = 0.0;
  for (double v : per_rep) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : per_rep) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (reps - 1) / reps);
  EXPECT_NEAR(mean, 0.02 / (1.0 - 0.98), 3.0 * se);
}

TEST(Generate, SvLogVarianceAr1) {
  const auto sim = generate(DgpSpec::scenario(DgpKind::SV, "none", 200000, 8));
  const Vector h = 2.0 * sim.sigma2.col(0).array().log();
  const double var = (h.array() - h.mean()).square().mean();
  EXPECT_NEAR(h.mean(), 0.0, 0.1);
  EXPECT_NEAR(var, 1.0 / (1.0 - 0.92 * 0.92), 0.35);
}

TEST(Generate, Validation) {
  auto spec = DgpSpec::scenario(DgpKind::SV, "none", 100, 1);
  spec.b0 = Matrix::Zero(2, 2);
  EXPECT_THROW(generate(spec), ConfigError);
  EXPECT_THROW(heteroskedastic_flags("3"), ConfigError);
  EXPECT_THROW(parse_dgp("ARCH"), ConfigError);
  EXPECT_EQ(parse_dgp("hmsh(2)"), DgpKind::HMSH2);
}

namespace {
ExperimentSettings tiny(bool rejection) {
  ExperimentSettings s = ExperimentSettings::desk(rejection);
  s.sampler.total_draws = 300;
  s.sampler.burn_in = 100;
  s.sampler.thinning = 1;
  return s;
}
}  // namespace

TEST(RmseExperiment, SelfRatioOneAndShape) {
  ExperimentSettings s = tiny(false);
  s.dgps = {"HMSH", "SV"};
  s.models = {"EXH", "HMSH(20)", "HMSH(2)"};
  s.replications = 2;
  const McReport r = run_rmse_experiment(s);
  ASSERT_EQ(r.rmse.size(), 6u);
  for (const auto& c : r.rmse) {
    EXPECT_EQ(c.ok, 2);
    EXPECT_GE(c.b0_rmse, 0.0);
    EXPECT_GE(c.sigma_rmse, 0.0);
    if (c.model == "HMSH(20)") {
      EXPECT_EQ(c.b0_ratio, 1.0);
      EXPECT_EQ(c.sigma_ratio, 1.0);
    }
  }
  std::ostringstream os;
  write_rmse_table(os, r, s, false);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "T,DGP,EXH,HMSH(20),HMSH(2),SV");
  EXPECT_NE(os.str().find("260,HMSH,"), std::string::npos);
}

TEST(RmseExperiment, IndependentOfThreadCount) {
  ExperimentSettings s = tiny(false);
  s.dgps = {"MSH"};
  s.models = {"HMSH(20)", "MSH(2)"};
  s.replications = 2;
  s.threads = 1;
  const McReport a = run_rmse_experiment(s);
  s.threads = 3;
  const McReport b = run_rmse_experiment(s);
  ASSERT_EQ(a.rmse.size(), b.rmse.size());
  for (std::size_t i = 0; i < a.rmse.size(); ++i) {
    EXPECT_EQ(a.rmse[i].b0_sq_error, b.rmse[i].b0_sq_error);
    EXPECT_EQ(a.rmse[i].sigma_sq_error, b.rmse[i].sigma_sq_error);
  }
}

TEST(RejectionExperiment, NullRowSharedAndQValueFive) {
  ExperimentSettings s = tiny(true);
  s.dgps = {"MSH", "HMSH"};
  s.models = {"HMSH(2)"};
  s.scenarios = {"1&2", "1"};
  s.sampler.total_draws = 200;
  const McReport r = run_rejection_experiment(s);
  ASSERT_EQ(r.rejection.size(), 4u);
  const RejectionCell* null_msh = nullptr;
  const RejectionCell* null_hmsh = nullptr;
  const RejectionCell* one_msh = nullptr;
  const RejectionCell* one_hmsh = nullptr;
  for (const auto& c : r.rejection) {
    EXPECT_GE(c.l_rate, 0.0);
    EXPECT_LE(c.l_rate, 1.0);
    if (c.scenario == "1&2") (c.dgp == "MSH" ? null_msh : null_hmsh) = &c;
    if (c.scenario == "1") (c.dgp == "MSH" ? one_msh : one_hmsh) = &c;
  }
  ASSERT_TRUE(null_msh && null_hmsh && one_msh && one_hmsh);
  EXPECT_EQ(null_msh->log_sddr, null_hmsh->log_sddr);
  EXPECT_EQ(one_msh->log_sddr, one_hmsh->log_sddr);
  ASSERT_EQ(null_msh->ok, 20);
  EXPECT_EQ(null_msh->q_rate, 0.05);
  std::ostringstream os;
  write_rejection_table(os, r, s);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "panel,T,homoskedastic_shocks,HMSH(2):MSH,HMSH(2):HMSH,SV:MSH,SV:HMSH");
  EXPECT_NE(text.find("q-value,260,1&2,0.05,0.05,NA,NA"), std::string::npos);
}

TEST(Recovery, HighVarianceRegimeClassified) {
  const auto sim = generate(DgpSpec::scenario(DgpKind::HMSH2, "none", 780, 4242));
  SamplerConfig cfg{3000, 1000, 2, 17, 100, true};
  const auto post = normalize_draws(run_sampler(mc_data(sim.y), VolatilitySpec::hmsh(2, false), mc_prior(), cfg), sim.b0);
  // shock 1: regime 0 has variance 1.99, regime 1 has 0.01
  int correct = 0;
  for (int t = 0; t < 780; ++t) {
    double prob_high = 0.0;
    for (const auto& d : post.draws) {
      const auto& v = d.variances[0];
      const int high = v(0) > v(1) ? 0 : 1;
      prob_high += d.path_of(0)[t] == high;
    }
    prob_high /= static_cast<double>(post.size());
    correct += (prob_high > 0.5) == (sim.paths[0][t] == 0);
  }
  EXPECT_GE(correct, static_cast<int>(0.9 * 780));
}
