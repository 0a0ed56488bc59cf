#include <gtest/gtest.h>

#include "yamabe/multiplicity.hpp"

using namespace yamabe;

namespace {

double level_sum(const ReducedDomain<double>& dom, const EllipticOperatorSet<double>& ops,
                 const BumpLayout<double>& layout) {
  double sum = 0;
  for (std::size_t i = 0; i < layout.size(); ++i)
    sum += detail::nehari_level(dom, ops, bump_field(dom, layout.left[i], layout.right[i]));
  return sum;
}

FlowConfig<double> tight() {
  FlowConfig<double> cfg;
  cfg.grad_tol = 1e-9;
  return cfg;
}

}  // namespace

TEST(Bumps, DisjointAndOnNehariSet) {
  const auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 256);
  const auto ops = assemble_operators(dom);
  const auto bumps = build_invariant_bumps(dom, ops, 4);
  ASSERT_EQ(bumps.size(), 4u);
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    EXPECT_GE(bumps[i].minCoeff(), 0.0);
    EXPECT_LE(nehari_residual(ops, bumps[i], dom.exponent()), 1e-12);
    for (std::size_t j = i + 1; j < bumps.size(); ++j) {
      EXPECT_EQ(bumps[i].cwiseProduct(bumps[j]).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_EQ(inner_ab(ops, bumps[i], bumps[j]), 0.0);
    }
  }
}

TEST(Bumps, OptimizedLayoutDoesNotRaiseLevels) {
  for (int k : {1, 2, 3, 5}) {
    const auto dom = build_cohomogeneity_one_sphere<double>(3, 2, 256);
    const auto ops = assemble_operators(dom);
    const auto start = default_layout(dom, k);
    const auto best = optimize_layout(dom, ops, start);
    EXPECT_LE(level_sum(dom, ops, best), level_sum(dom, ops, start)) << "k = " << k;
    EXPECT_TRUE(detail::layout_admissible(dom, best));
  }
}

TEST(Bumps, RejectsCoarseGrids) {
  const auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 16);
  EXPECT_THROW(default_layout(dom, 5), InvalidAction);
  EXPECT_THROW(default_layout(dom, 0), InvalidAction);
}

TEST(Ladder, AdditiveAndIncreasing) {
  const auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 256);
  const auto ops = assemble_operators(dom);
  const auto bumps = build_invariant_bumps(dom, ops, 3);
  const auto ladder = tau_ell_ladder(dom, ops, bumps);
  const double S_pow = std::pow(sobolev_constant_closed_form<double>(3), 1.5);
  double tau = 0;
  for (std::size_t j = 0; j < bumps.size(); ++j) {
    tau += energy(dom, ops, bumps[j]);
    EXPECT_NEAR(ladder.tau[j], tau, 1e-12 * tau);
    EXPECT_NEAR(ladder.ell[j], 3 * ladder.tau[j] / S_pow, 1e-12 * ladder.ell[j]);
    if (j > 0) EXPECT_GT(ladder.tau[j], ladder.tau[j - 1]);
  }
  // The alternating seed starts exactly at the top of the ladder.
  const auto seeds = census_seeds(bumps);
  EXPECT_NEAR(energy(dom, ops, seeds[2]), ladder.tau[2], 1e-12 * ladder.tau[2]);
}

TEST(Ladder, ScalesWithOrbitWeighting) {
  const auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 256);
  const auto ops = assemble_operators(dom);
  const auto heavy = apply_finite_orbit_weighting(dom, 6);
  const auto heavy_ops = assemble_operators(heavy);
  const auto layout = default_layout(dom, 2);
  const auto a = tau_ell_ladder(dom, ops, layout_bumps(dom, ops, layout));
  const auto b = tau_ell_ladder(heavy, heavy_ops, layout_bumps(heavy, heavy_ops, layout));
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(b.tau[j], 6 * a.tau[j], 1e-11 * b.tau[j]);
}

TEST(Threshold, Examples) {
  auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 64);
  EXPECT_TRUE(std::isinf(threshold(dom)));
  EXPECT_DOUBLE_EQ(threshold(with_orbit_cardinality(dom, 5)), 5.0);
  // m = 4: n a^2 / c with a = 1, c = 4.
  auto s4 = build_cohomogeneity_one_sphere<double>(3, 2, 64);
  s4.c.setConstant(4.0);
  for (int n : {1, 2, 7}) EXPECT_DOUBLE_EQ(threshold(with_orbit_cardinality(s4, n)), n / 4.0);
  // Only finite orbits count: a zonal pole has one point.
  const auto zonal = build_zonal_sphere<double>(3, 64);
  EXPECT_DOUBLE_EQ(threshold(zonal), 1.0);
}

TEST(Threshold, ReportHypothesis) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(2, 2, 256));
  const auto bumps = build_invariant_bumps(pb.dom, pb.ops, 2);
  const auto rep = threshold_report(pb, bumps);
  EXPECT_TRUE(rep.hypothesis);
  EXPECT_EQ(rep.tau_k.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.A, pb.spec.A);
  EXPECT_NEAR(rep.S_pow, std::pow(rep.S, 1.5), 1e-14 * rep.S_pow);
  const auto low = make_problem(with_orbit_cardinality(pb.dom, 1));
  EXPECT_FALSE(threshold_report(low, layout_bumps(low.dom, low.ops, default_layout(low.dom, 2))).hypothesis);
}

TEST(Census, SeedsAlternate) {
  const auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 128);
  const auto bumps = build_invariant_bumps(dom, assemble_operators(dom), 3);
  const auto seeds = census_seeds(bumps);
  ASSERT_EQ(seeds.size(), 3u);
  EXPECT_EQ(seeds[0], bumps[0]);
  EXPECT_EQ(seeds[2], Field<double>(bumps[0] - bumps[1] + bumps[2]));
  EXPECT_EQ(count_nodal_domains(seeds[2]), 3);
}

TEST(Census, SingleSolutionIsConstant) {
  auto dom = build_cohomogeneity_one_sphere<double>(2, 2, 256);
  dom.c.setConstant(0.75);
  const auto pb = make_problem(dom);
  const auto census = find_solutions(pb, 1, tight());
  ASSERT_EQ(census.entries.size(), 1u);
  EXPECT_FALSE(census.partial());
  EXPECT_EQ(census.entries[0].report.classification, Classification::Positive);
  EXPECT_LE((census.entries[0].report.u.array() - 1.0).abs().maxCoeff(), 1e-6);
  EXPECT_TRUE(std::isinf(census.cone.rho_cap));
}

TEST(Census, ThreeSolutionsBelowTheirLevels) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(2, 2, 512));
  const auto census = find_solutions(pb, 3, tight(), 3);
  ASSERT_EQ(census.entries.size(), 3u);
  const auto& th = census.thresholds;
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& e = census.entries[j];
    EXPECT_EQ(e.seed, static_cast<int>(j + 1));
    EXPECT_EQ(e.report.nodal_count, static_cast<int>(j + 1));
    EXPECT_LE(e.report.energy, th.tau_k[j] * (1 + 1e-12));
    EXPECT_TRUE(e.bound_holds);
    EXPECT_NEAR(e.bound, th.ell_k[j] * th.S_pow, 1e-12 * e.bound);
    EXPECT_LE(e.report.pde_residual, 1e-4);
    if (j > 0) EXPECT_GT(e.report.energy, census.entries[j - 1].report.energy);
  }
  EXPECT_DOUBLE_EQ(th.tau_gamma, census.entries[0].report.energy);
  EXPECT_LT(th.tau_gamma, th.tau_k[0]);
  EXPECT_GT(census.cone.rho, 0.0);
}

TEST(Census, ThreadCountDoesNotChangeResult) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(3, 2, 256));
  const auto one = find_solutions(pb, 3, tight(), 1);
  const auto many = find_solutions(pb, 3, tight(), 4);
  ASSERT_EQ(one.entries.size(), many.entries.size());
  for (std::size_t j = 0; j < one.entries.size(); ++j) {
    EXPECT_EQ(one.entries[j].report.u, many.entries[j].report.u);
    EXPECT_EQ(one.entries[j].report.energy, many.entries[j].report.energy);
  }
}

TEST(Census, PartialWhenFlowsStopEarly) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(2, 2, 256));
  FlowConfig<double> cfg = tight();
  cfg.max_steps = 1;
  const auto census = find_solutions(pb, 3, cfg);
  EXPECT_TRUE(census.partial());
  ASSERT_FALSE(census.warnings.empty());
  EXPECT_NE(census.warnings.back().find("partial census"), std::string::npos);
  EXPECT_THROW(find_solutions(pb, 0, cfg), InvalidAction);
}

TEST(Census, SameSolutionUpToSign) {
  const auto pb = make_problem(build_cohomogeneity_one_sphere<double>(2, 2, 256));
  const Field<double> seed = sample(pb.dom, [](double t) { return std::cos(2 * t); });
  const auto a = run_to_critical(pb, seed, tight());
  const auto b = run_to_critical(pb, Field<double>(-seed), tight());
  const auto c = run_to_critical(pb, Field<double>(Field<double>::Ones(pb.ops.size())), tight());
  EXPECT_TRUE(same_solution(pb, a, b));
  EXPECT_TRUE(same_solution(pb, a, a));
  EXPECT_FALSE(same_solution(pb, a, c));
}
