#include <gtest/gtest.h>

#include "oranlab/domain.hpp"

using namespace oranlab;

TEST(Violation, SpecExamples) {
  EXPECT_NEAR(violation(15, 8.67), 6.33, 1e-12);
  EXPECT_EQ(violation(5, 8.67), 0.0);
  EXPECT_EQ(violation(10, 10), 0.0);
}

TEST(Violation, MonotoneAndNonNegative) {
  double prev = violation(12.0, 0.0);
  for (int i = 1; i <= 400; ++i) {
    const double v = violation(12.0, i * 0.05);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(RequiredPrbs, SpecExamples) {
  EXPECT_EQ(required_prbs(15, 0.4), 38);
  EXPECT_EQ(required_prbs(10, 0.4), 25);
  EXPECT_EQ(required_prbs(0, 0.4), 0);
  EXPECT_EQ(required_prbs(5, 0.4), 13);
}

TEST(RequiredPrbs, ZeroEtaIsTypedError) {
  EXPECT_THROW(required_prbs(5, 0.0), UnsatisfiableDemand);
  EXPECT_EQ(required_prbs(0, 0.0), 0);
}

TEST(RequiredPrbs, BracketsTheSla) {
  for (int s = 1; s <= 200; ++s) {
    for (int e = 1; e <= 100; e += 3) {
      const double sla = s / 10.0;
      const double eta = e / 100.0;
      const int p = required_prbs(sla, eta);
      EXPECT_TRUE(p * eta >= sla || approx_equal(p * eta, sla))
          << sla << " " << eta;
      EXPECT_LT((p - 1) * eta, sla) << sla << " " << eta;
    }
  }
}

TEST(Tolerance, Helpers) {
  EXPECT_TRUE(approx_equal(0.1 + 0.2, 0.3));
  EXPECT_FALSE(approx_equal(1.0, 1.0 + 1e-6));
  EXPECT_TRUE(approx_less(1.0, 1.0 + 1e-6));
  EXPECT_FALSE(approx_less(0.3, 0.1 + 0.2));
}

TEST(Validate, RejectsBadProfilesAndCells) {
  EXPECT_THROW(validate(UeProfile{1, -1.0, 1.0}), DomainError);
  EXPECT_THROW(validate(UeProfile{1, 1.0, 0.0}), DomainError);
  EXPECT_NO_THROW(validate(UeProfile{1, 0.0, 1.0}));
  CellConfig cell;
  EXPECT_NO_THROW(validate(cell));
  cell.total_prbs = 0;
  EXPECT_THROW(validate(cell), DomainError);
  cell = CellConfig{};
  cell.report_period_ms = 1;
  cell.slot_duration_us = 300;
  EXPECT_THROW(validate(cell), DomainError);
}

TEST(PolicySolution, Totals) {
  PolicySolution s{{{1, 37, 0.2, true}, {2, 25, 0.0, true}, {3, 3, 3.8, true}}};
  EXPECT_EQ(s.total_prbs(), 65);
  EXPECT_NEAR(s.total_violation(), 4.0, 1e-12);
  ASSERT_NE(s.find(3), nullptr);
  EXPECT_EQ(s.find(3)->prbs, 3);
  EXPECT_EQ(s.find(9), nullptr);
}
