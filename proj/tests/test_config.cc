#include <gtest/gtest.h>

#include <string>

#include "prfrl/config.h"
#include "prfrl/error.h"

namespace prfrl {
namespace {

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  const RunConfig back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, EveryKeyRoundTrips) {
  RunConfig c;
  c.set("seed", "17");
  c.set("bm25.k1", "0.9");
  c.set("encoder.d", "48");
  c.set("train.gamma", "0.125");
  c.set("train.reward_baseline", "true");
  c.set("selector.mode", "gumbel");
  c.set("selector.rule_top_m", "-1");
  const RunConfig back = RunConfig::parse(c.to_text());
  for (const std::string& key : RunConfig::keys()) EXPECT_EQ(back.get(key), c.get(key)) << key;
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.encoder.d, 48u);
  EXPECT_EQ(back.train.gamma, 0.125);
  EXPECT_TRUE(back.train.reward_baseline);
  EXPECT_EQ(back.selector.mode, SelectionMode::kGumbel);
}

TEST(Config, CommentsAndBlankLines) {
  const RunConfig c = RunConfig::parse("# comment\n\n  seed = 3  \ntrain.episodes=4\n");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.train.episodes, 4u);
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    RunConfig::parse("seed = 1\n\nencoder.d = many\n", "run.conf");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("run.conf:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RunConfig::parse("no equals sign\n"), InvalidArgument);
  EXPECT_THROW(RunConfig::parse("unknown.key = 1\n"), InvalidArgument);
  EXPECT_THROW(RunConfig::parse("train.reward_baseline = maybe\n"), InvalidArgument);
  EXPECT_THROW(RunConfig::parse("encoder.layers = -2\n"), InvalidArgument);
}

TEST(Config, ValidationRejectsInconsistentLimits) {
  RunConfig c;
  c.limits.max_len = c.encoder.max_len + 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, Assignments) {
  EXPECT_EQ(split_assignment("a.b=3"), (std::pair<std::string, std::string>{"a.b", "3"}));
  EXPECT_THROW(split_assignment("a.b"), InvalidArgument);
  EXPECT_THROW(RunConfig::load("/nonexistent/prfrl.conf"), IoError);
}

}  // namespace
}  // namespace prfrl
