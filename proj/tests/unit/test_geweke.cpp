#include <gtest/gtest.h>

#include "support/geweke.hpp"

using pietl::testing::GewekeResult;

TEST(Geweke, PriorReproduction) {
  const pietl::testing::GewekeFixture f;
  const auto r = pietl::testing::run_geweke(f, 5000, 2024);
  const double z_rem = GewekeResult::z(r.forward_remainder, r.gibbs_remainder);
  const double z_pers = GewekeResult::z(r.forward_personal, r.gibbs_personal);
  const double z_top = GewekeResult::z(r.forward_topics, r.gibbs_topics);
  EXPECT_LT(std::fabs(z_rem), 3.0) << r.forward_remainder.mean << " vs " << r.gibbs_remainder.mean;
  EXPECT_LT(std::fabs(z_pers), 3.0) << r.forward_personal.mean << " vs " << r.gibbs_personal.mean;
  EXPECT_LT(std::fabs(z_top), 3.0) << r.forward_topics.mean << " vs " << r.gibbs_topics.mean;
}
