#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "pidcert/errors.hpp"
#include "pidcert/gain_sets.hpp"

using namespace pidcert;

namespace {

const UncertaintyBounds kUnit = UncertaintyBounds::second_order(1, 1, 1);
const UncertaintyBounds kUnitFirst = UncertaintyBounds::first_order(1, 1);

}  // namespace

TEST(Kbar, Formula) {
  EXPECT_DOUBLE_EQ(coupling_kbar(7, 7, kUnit), 28.0);
  EXPECT_DOUBLE_EQ(coupling_kbar(2, 3, UncertaintyBounds::second_order(1, 2, 0.5)), 30.0);
}

TEST(OmegaPid, Examples) {
  const auto r = omega_pid_membership(GainVector::pid(7, 1, 7), kUnit);
  EXPECT_TRUE(r.member);
  EXPECT_DOUBLE_EQ(r.kbar, 28.0);
  EXPECT_DOUBLE_EQ(r.slack("kp^2-2ki*kd-kbar"), 49.0 - 14.0 - 28.0);
  EXPECT_DOUBLE_EQ(r.slack("kd^2-kp/b-kbar"), 49.0 - 7.0 - 28.0);

  const auto bad = omega_pid_membership(GainVector::pid(1, 1, 1), kUnit);
  EXPECT_FALSE(bad.member);
  EXPECT_DOUBLE_EQ(bad.kbar, 4.0);
  EXPECT_LT(bad.slack("kp^2-2ki*kd-kbar"), 0.0);

  const auto scaled = omega_pid_membership(GainVector::pid(7, 1, 7).scaled(2), kUnit);
  EXPECT_TRUE(scaled.member);
  EXPECT_DOUBLE_EQ(scaled.kbar, 56.0);
  EXPECT_DOUBLE_EQ(scaled.slack("kp^2-2ki*kd-kbar"), 196.0 - 56.0 - 56.0);
  EXPECT_DOUBLE_EQ(scaled.slack("kd^2-kp/b-kbar"), 196.0 - 14.0 - 56.0);
}

TEST(OmegaPid, RequiresPositiveGains) {
  EXPECT_FALSE(omega_pid_membership(GainVector::pid(7, 0, 7), kUnit).member);
  EXPECT_FALSE(omega_pid_membership(GainVector::pid(7, -1, 7), kUnit).member);
}

TEST(OmegaPid, WrongKindOrOrderThrows) {
  EXPECT_THROW(omega_pid_membership(GainVector::pd(7, 7), kUnit), UsageError);
  EXPECT_THROW(omega_pid_membership(GainVector::pid(7, 1, 7), kUnitFirst), UsageError);
}

TEST(OmegaPd, Examples) {
  const auto r = omega_pd_membership(GainVector::pd(6, 6), kUnit);
  EXPECT_TRUE(r.member);
  EXPECT_DOUBLE_EQ(r.kbar, 24.0);
  EXPECT_DOUBLE_EQ(r.slack("kp^2-kbar"), 12.0);
  EXPECT_DOUBLE_EQ(r.slack("kd^2-kp/b-kbar"), 6.0);
  EXPECT_FALSE(omega_pd_membership(GainVector::pd(2, 2), kUnit).member);
  // k = (2(L1+L2)+1)/b exactly sits on the boundary of the second inequality.
  const auto edge = omega_pd_membership(GainVector::pd(5, 5), kUnit);
  EXPECT_FALSE(edge.member);
  EXPECT_DOUBLE_EQ(edge.slack("kd^2-kp/b-kbar"), 0.0);
  EXPECT_THROW(omega_pd_membership(GainVector::pid(6, 1, 6), kUnit), UsageError);
}

TEST(OmegaPi, Examples) {
  const auto r = omega_pi_membership(GainVector::pi(3, 1), kUnitFirst);
  EXPECT_TRUE(r.member);
  EXPECT_DOUBLE_EQ(r.slack("kp^2*b-kp*L-ki-L^2/(4b)"), 9.0 - 4.25);
  EXPECT_FALSE(omega_pi_membership(GainVector::pi(1, 1), kUnitFirst).member);
  const auto L0 = UncertaintyBounds::first_order(0, 2);
  EXPECT_TRUE(omega_pi_membership(GainVector::pi(1, 1.9), L0).member);
  EXPECT_FALSE(omega_pi_membership(GainVector::pi(1, 2.0), L0).member);
  EXPECT_FALSE(omega_pi_membership(GainVector::pi(-3, 1), kUnitFirst).member);
  EXPECT_THROW(omega_pi_membership(GainVector::pi(3, 1), kUnit), UsageError);
}

TEST(OmegaPiPrime, Examples) {
  EXPECT_TRUE(omega_pi_prime_membership(GainVector::pi(2, 1), kUnitFirst).member);
  EXPECT_FALSE(omega_pi_prime_membership(GainVector::pi(1, 1), kUnitFirst).member);
  EXPECT_FALSE(omega_pi_prime_membership(GainVector::pi(2, 0), kUnitFirst).member);
}

TEST(OmegaPiPrime, ContainsOmegaPi) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gain(0.0, 10.0), L(0.0, 5.0), b(0.05, 5.0);
  int members = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto ub = UncertaintyBounds::first_order(L(rng), b(rng));
    const auto g = GainVector::pi(gain(rng), gain(rng));
    if (omega_pi_membership(g, ub).member) {
      ++members;
      ASSERT_TRUE(omega_pi_prime_membership(g, ub).member);
    }
  }
  EXPECT_GT(members, 1000);
}

TEST(MembershipReport, MemberIffAllSlacksPositive) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> gain(-1.0, 20.0), L(0.0, 3.0), b(0.1, 3.0);
  for (int t = 0; t < 3000; ++t) {
    const auto ub = UncertaintyBounds::second_order(L(rng), L(rng), b(rng));
    const auto r = membership(GainVector::pid(gain(rng), gain(rng), gain(rng)), ub);
    bool all = true;
    for (const auto& m : r.margins) all = all && m.slack > 0.0;
    ASSERT_EQ(r.member, all);
  }
}

TEST(Membership, BoundaryFlipsExactlyAtSlackSignChange) {
  // Lower kp from a member until the first inequality is violated.
  const auto ub = kUnit;
  double prev_slack = omega_pid_membership(GainVector::pid(7, 1, 7), ub).slack("kp^2-2ki*kd-kbar");
  bool prev_member = true;
  for (double kp = 7.0; kp > 0.0; kp -= 1.0 / 64.0) {
    const auto r = omega_pid_membership(GainVector::pid(kp, 1, 7), ub);
    bool all = true;
    for (const auto& m : r.margins) all = all && m.slack > 0.0;
    ASSERT_EQ(r.member, all);
    if (prev_member && !r.member) {
      EXPECT_GT(prev_slack, 0.0);
      EXPECT_LE(std::min(r.slack("kp^2-2ki*kd-kbar"), r.slack("kd^2-kp/b-kbar")), 0.0);
      return;
    }
    prev_member = r.member;
    prev_slack = r.slack("kp^2-2ki*kd-kbar");
  }
  FAIL() << "membership never flipped";
}

TEST(Membership, WorseBoundsNeverCreateMembers) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> gain(0.0, 15.0), L(0.0, 3.0), b(0.1, 3.0), grow(1.0, 2.0);
  for (int t = 0; t < 5000; ++t) {
    const auto ub = UncertaintyBounds::second_order(L(rng), L(rng), b(rng));
    const auto worse = UncertaintyBounds::second_order(ub.L1 * grow(rng), ub.L2 * grow(rng), ub.b_lower / grow(rng));
    const auto g = GainVector::pid(gain(rng), gain(rng) * 0.2, gain(rng));
    if (!omega_pid_membership(g, ub).member) ASSERT_FALSE(omega_pid_membership(g, worse).member);
    const auto gd = GainVector::pd(g.kp, g.kd);
    if (!omega_pd_membership(gd, ub).member) ASSERT_FALSE(omega_pd_membership(gd, worse).member);
  }
}

TEST(SuggestGains, Examples) {
  EXPECT_EQ(suggest_gains(ControllerKind::PID, kUnit, {1.0, 0.0}), GainVector::pid(7, 1, 7));
  EXPECT_EQ(suggest_gains(ControllerKind::PD, kUnit, {1.0, 0.2}), GainVector::pd(6, 6));
  EXPECT_EQ(suggest_gains(ControllerKind::PI, kUnitFirst, {1.0, 0.0}), GainVector::pi(3, 1));
  const auto d = suggest_gains(ControllerKind::PID, kUnit);
  EXPECT_DOUBLE_EQ(d.kp, 7.0 * 1.1);
  EXPECT_DOUBLE_EQ(d.kd, 7.0 * 1.1);
}

TEST(SuggestGains, PdBoundaryWithoutMarginIsRejected) {
  EXPECT_THROW(suggest_gains(ControllerKind::PD, kUnit, {1.0, 0.0}), InternalError);
}

TEST(SuggestGains, PiWithZeroL) {
  const auto ub = UncertaintyBounds::first_order(0.0, 2.0);
  for (double m : {0.0, 0.1, 1.0}) {
    const auto g = suggest_gains(ControllerKind::PI, ub, {1.0, m});
    EXPECT_TRUE(omega_pi_membership(g, ub).member) << "margin " << m;
  }
}

TEST(SuggestGains, AlwaysMembersOnRandomBounds) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> L(0.0, 10.0), b(0.01, 10.0), ki(0.01, 5.0);
  for (int t = 0; t < 1000; ++t) {
    const auto ub2 = UncertaintyBounds::second_order(L(rng), L(rng), b(rng));
    const auto ub1 = UncertaintyBounds::first_order(L(rng), b(rng));
    const SuggestOptions so{ki(rng), 0.1};
    ASSERT_TRUE(membership(suggest_gains(ControllerKind::PID, ub2, so), ub2).member);
    ASSERT_TRUE(membership(suggest_gains(ControllerKind::PD, ub2, so), ub2).member);
    ASSERT_TRUE(membership(suggest_gains(ControllerKind::PI, ub1, so), ub1).member);
  }
}

TEST(SemiCone, Examples) {
  const std::vector<double> alphas{1, 2, 10, 100};
  EXPECT_TRUE(semi_cone_check(GainVector::pid(7, 1, 7), kUnit, alphas));
  const std::vector<double> one{1.0};
  EXPECT_TRUE(semi_cone_check(GainVector::pid(9, 0.5, 8), kUnit, one));
  EXPECT_THROW(semi_cone_check(GainVector::pid(1, 1, 1), kUnit, alphas), PreconditionError);
  const std::vector<double> shrink{0.5};
  EXPECT_THROW(semi_cone_check(GainVector::pid(7, 1, 7), kUnit, shrink), UsageError);
}

TEST(SemiCone, RandomMembersAndScalings) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> L(0.0, 5.0), b(0.1, 5.0), ki(0.01, 3.0), m(0.0, 2.0), alpha(1.0, 1e3);
  for (int t = 0; t < 10000; ++t) {
    const auto ub = UncertaintyBounds::second_order(L(rng), L(rng), b(rng));
    const auto g = suggest_gains(ControllerKind::PID, ub, {ki(rng), m(rng) + 1e-3});
    const double a = alpha(rng);
    ASSERT_TRUE(semi_cone_check(g, ub, std::vector<double>{a})) << "alpha=" << a;
  }
}

TEST(Bounds, Validation) {
  EXPECT_THROW(UncertaintyBounds::second_order(1, 1, 0).validate(), UsageError);
  EXPECT_THROW(UncertaintyBounds::second_order(-1, 1, 1).validate(), UsageError);
  EXPECT_NO_THROW(UncertaintyBounds::first_order(0, 1).validate());
}

TEST(Parsing, RoundTrip) {
  for (auto k : {ControllerKind::PID, ControllerKind::PD, ControllerKind::PI})
    EXPECT_EQ(parse_controller_kind(to_string(k)), k);
  EXPECT_THROW(parse_controller_kind("PIDD"), UsageError);
  EXPECT_EQ(parse_plant_order("first_order"), PlantOrder::first_order);
}
