#include <gtest/gtest.h>

#include "echo/config.hpp"

using namespace echo;

TEST(RunConfig, DefaultsAreTyped) {
  RunConfig c;
  EXPECT_EQ(c.integer("window_frames"), 21);
  EXPECT_EQ(c.str("solver"), "midpoint");
  EXPECT_TRUE(c.flag("clamp_observed"));
  EXPECT_DOUBLE_EQ(c.real("beta2"), 0.95);
}

TEST(RunConfig, ParsesOverridesAndComments) {
  auto c = RunConfig::parse("# comment\n  steps = 25  # trailing\n\nsolver=rk4\nclamp_observed=off\n");
  EXPECT_EQ(c.integer("steps"), 25);
  EXPECT_EQ(c.str("solver"), "rk4");
  EXPECT_FALSE(c.flag("clamp_observed"));
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::parse("stepz=5\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("no equals sign\n"), ConfigError);
  auto c = RunConfig::parse("steps=five\nclamp_observed=maybe\n");
  EXPECT_THROW(c.integer("steps"), ConfigError);
  EXPECT_THROW(c.flag("clamp_observed"), ConfigError);
}

TEST(RunConfig, CanonicalRoundTrip) {
  auto c = RunConfig::parse("steps=7\nseed=11\n");
  EXPECT_EQ(RunConfig::parse(c.canonical()), c);
  EXPECT_NE(c, RunConfig());
}
