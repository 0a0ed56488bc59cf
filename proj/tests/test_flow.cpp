#include <gtest/gtest.h>

#include "oracles.hpp"
#include "yamabe/flow.hpp"
#include "yamabe/multiplicity.hpp"

using namespace yamabe;

namespace {

Problem<double> round_s3(int N, double c = 1.0) {
  auto dom = build_cohomogeneity_one_sphere<double>(2, 2, N);
  dom.c.setConstant(c);
  return make_problem(dom);
}

FlowConfig<double> tight() {
  FlowConfig<double> cfg;
  cfg.grad_tol = 1e-9;
  return cfg;
}

}  // namespace

TEST(Flow, ZeroGradientStepIsIdentity) {
  const auto pb = round_s3(64, 0.75);
  FlowConfig<double> cfg;
  auto s = start_flow(pb, Field<double>(Field<double>::Ones(pb.ops.size())), cfg);
  s.grad.setZero();
  s.grad_norm_A = 0;
  const auto next = step(pb, s, cfg);
  EXPECT_EQ(next.step, s.step + 1);
  EXPECT_EQ(next.u, s.u);
  EXPECT_EQ(next.energy, s.energy);
}

TEST(Flow, StartProjectsOntoNehariSet) {
  const auto pb = round_s3(128);
  const Field<double> u0 = sample(pb.dom, [](double t) { return 5.0 + std::cos(2 * t); });
  const auto s = start_flow(pb, u0, FlowConfig<double>{});
  EXPECT_LE(nehari_residual(pb.ops, s.u, pb.exponent()), 1e-12);
  EXPECT_THROW(start_flow(pb, Field<double>(Field<double>::Zero(pb.ops.size())), FlowConfig<double>{}),
               InvalidField);
  EXPECT_THROW(start_flow(pb, Field<double>(Field<double>::Ones(5)), FlowConfig<double>{}), InvalidField);
}

TEST(Flow, PositiveSeedReachesConstantSolution) {
  // With c = b on the round S^3 the only positive invariant solution is u = 1.
  const auto pb = round_s3(256, 0.75);
  const Field<double> bump = sample(pb.dom, [](double t) { return 0.2 + cutoff((t - 0.4) / 0.3); });
  const auto r = run_to_critical(pb, bump, tight());
  EXPECT_EQ(r.classification, Classification::Positive);
  EXPECT_EQ(r.nodal_count, 1);
  EXPECT_LE((r.u.array() - 1.0).abs().maxCoeff(), 1e-6);
  const double constant = energy(pb, Field<double>(Field<double>::Ones(pb.ops.size())));
  EXPECT_NEAR(r.energy, constant, 1e-9 * constant);
}

TEST(Flow, NodalSeedMatchesShootingSolution) {
  const auto pb = round_s3(512);
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t); });
  const auto r = run_to_critical(pb, seed, tight());
  EXPECT_EQ(r.classification, Classification::Nodal);
  EXPECT_EQ(r.nodal_count, 2);
  EXPECT_LE(r.piece_nehari_residual, 1e-6);
  const oracle::ReducedOde ode{2, 2, 0.75, 1.0};
  const auto shot = oracle::solve_shooting(ode, r.u(0), r.u(r.u.size() - 1));
  ASSERT_TRUE(shot.converged);
  EXPECT_EQ(shot.nodal_domains, 2);
  EXPECT_NEAR(r.energy / shot.energy, 1.0, 5e-4);
  EXPECT_NEAR(r.u(0) / shot.left, 1.0, 5e-3);
}

TEST(Flow, OddSeedStaysOdd) {
  // t -> pi/2 - t is a symmetry of the O(2) x O(2) quotient of S^3.
  const auto pb = round_s3(256);
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t) + 0.2 * std::cos(6 * t); });
  const auto r = run_to_critical(pb, seed, tight());
  const Field<double> mirrored = r.u.reverse();
  EXPECT_LE((r.u + mirrored).cwiseAbs().maxCoeff(), 1e-8 * r.u.cwiseAbs().maxCoeff());
}

TEST(Flow, NegativeSeedMirrorsPositive) {
  const auto pb = round_s3(128);
  const Field<double> seed = sample(pb.dom, [](double t) { return 1.0 + 0.3 * std::cos(2 * t); });
  const auto plus = run_to_critical(pb, seed, tight());
  const auto minus = run_to_critical(pb, Field<double>(-seed), tight());
  EXPECT_EQ(minus.classification, Classification::Negative);
  EXPECT_NEAR(minus.energy, plus.energy, 1e-12 * plus.energy);
  EXPECT_LE((minus.u + plus.u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Flow, TraceDescendsWithArmijoDecrease) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(3, 2, 256));
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t) + 0.5 * std::sin(5 * t); });
  const auto cfg = tight();
  const auto r = run_to_critical(pb, seed, cfg);
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    const auto& a = r.trace[i];
    const auto& b = r.trace[i + 1];
    const double rounding = 1e-13 * std::abs(a.energy);
    const double s = b.flow_time - a.flow_time;
    EXPECT_GT(s, 0.0);
    EXPECT_LE(b.energy, a.energy - cfg.armijo_c * s * a.grad_norm * a.grad_norm + rounding) << "step " << i;
    EXPECT_LE(b.nehari_residual, 1e-9);
  }
  EXPECT_EQ(r.steps, r.trace.back().step);
}

TEST(Flow, NonConvergenceCarriesTrace) {
  const auto pb = round_s3(128);
  FlowConfig<double> cfg = tight();
  cfg.max_steps = 2;
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t) + 0.4; });
  try {
    run_to_critical(pb, seed, cfg);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.trace.size(), 3u);
    EXPECT_EQ(e.last_u.size(), static_cast<std::size_t>(pb.ops.size()));
  }
}

TEST(FlowConfig, Validation) {
  FlowConfig<double> cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.grad_tol = 0;
  EXPECT_THROW(cfg.validate(), InvalidAction);
  cfg = FlowConfig<double>{};
  cfg.armijo_c = 1;
  EXPECT_THROW(cfg.validate(), InvalidAction);
  cfg = FlowConfig<double>{};
  cfg.rho = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidAction);
  const auto pb = round_s3(32);
  EXPECT_THROW(run_to_critical(pb, Field<double>(Field<double>::Ones(pb.ops.size())), cfg), InvalidAction);
}

TEST(Invariance, SyntheticTrace) {
  auto row = [](double plus, double minus) {
    TraceRow r;
    r.dist_plus = plus;
    r.dist_minus = minus;
    return r;
  };
  const std::vector<TraceRow> trace = {row(0.5, 0.9), row(0.3, 0.9), row(0.6, 0.2), row(0.35, 0.1)};
  const auto rep = monitor_invariance(trace, 0.4);
  EXPECT_EQ(rep.violations_plus, 1);
  EXPECT_EQ(rep.violations_minus, 0);
  EXPECT_EQ(rep.inside_plus, 2);
  EXPECT_EQ(rep.inside_minus, 2);
  EXPECT_DOUBLE_EQ(rep.min_dist_plus, 0.3);
  EXPECT_DOUBLE_EQ(rep.min_dist_minus, 0.1);
  EXPECT_EQ(monitor_invariance(trace, 0.4, 2).violations_plus, 0);
}

TEST(Invariance, FlowsStayOnTheirSideOfTheCones) {
  const auto pb = round_s3(512);
  const auto bumps = build_invariant_bumps(pb.dom, pb.ops, 3);
  const double rho = estimate_cone_radius(pb, bumps).rho;
  ASSERT_GT(rho, 0.0);
  const auto positive = run_to_critical(pb, Field<double>(bumps[0].cwiseAbs()), tight());
  const auto pos = monitor_invariance(positive.trace, rho);
  EXPECT_EQ(pos.violations_plus, 0);
  EXPECT_EQ(pos.inside_plus, static_cast<long>(positive.trace.size()));
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t); });
  const auto nodal = run_to_critical(pb, seed, tight());
  const auto nod = monitor_invariance(nodal.trace, rho);
  EXPECT_EQ(nod.inside_plus + nod.inside_minus, 0);
  EXPECT_GE(std::min(nod.min_dist_plus, nod.min_dist_minus), rho);
}

TEST(ConeRadius, Formula) {
  InnerProductSpec<double> spec{1.0, 2.0, 1.0 / 3.0};
  // nu = 2/3, ((nu - mu_bar)/C^p)^{1/(p-2)} with C = 2, p = 6
  EXPECT_NEAR(cone_radius(spec, 2.0, 6.0, 10.0), std::pow((1.0 / 3.0) / 64.0, 0.25), 1e-15);
  EXPECT_DOUBLE_EQ(cone_radius(spec, 2.0, 6.0, 0.01), 0.01);
  EXPECT_THROW(cone_radius(spec, 0.0, 6.0, 1.0), InvalidAction);
}

TEST(Classification, Strings) {
  EXPECT_STREQ(to_string(Classification::Positive), "positive");
  EXPECT_STREQ(to_string(Classification::Nodal), "nodal");
}
