#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "prfrl/error.h"
#include "prfrl/optim.h"
#include "prfrl/tensor.h"

namespace prfrl {
namespace {

ParameterStore scalar_store(double value) {
  ParameterStore p;
  p.add("x", 1, 1)(0, 0) = value;
  return p;
}

GradStore scalar_grad(double g) {
  GradStore grads;
  grads.at("x", 1, 1)(0, 0) = g;
  return grads;
}

TEST(Adam, ZeroGradientOnlyAdvancesStep) {
  ParameterStore p = scalar_store(2.0);
  Optimizer opt({});
  opt.step(p, scalar_grad(0.0));
  EXPECT_EQ(p.get("x")(0, 0), 2.0);
  EXPECT_EQ(p.step, 1u);
  EXPECT_EQ(opt.steps_taken(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore p = scalar_store(1.0);
  OptimizerConfig c;
  c.learning_rate = 0.1;
  Optimizer opt(c);
  opt.step(p, scalar_grad(3.0));
  // m_hat = 3, v_hat = 9, step = 0.1 * 3 / (3 + 1e-8)
  EXPECT_NEAR(p.get("x")(0, 0), 1.0 - 0.1 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Adam, UnitGradientStrictlyDecreases) {
  ParameterStore p = scalar_store(0.0);
  Optimizer opt({});
  double prev = 0.0;
  for (int i = 0; i < 20; ++i) {
    opt.step(p, scalar_grad(1.0));
    EXPECT_LT(p.get("x")(0, 0), prev);
    prev = p.get("x")(0, 0);
  }
}

TEST(Adam, AscendFlipsDirection) {
  ParameterStore p = scalar_store(0.0);
  Optimizer opt({});
  opt.step(p, scalar_grad(1.0), true);
  EXPECT_GT(p.get("x")(0, 0), 0.0);
}

TEST(Adam, LinearDecayReachesZero) {
  OptimizerConfig c;
  c.learning_rate = 0.5;
  c.linear_decay = true;
  c.total_steps = 4;
  EXPECT_DOUBLE_EQ(c.rate_at(0), 0.5);
  EXPECT_DOUBLE_EQ(c.rate_at(2), 0.25);
  EXPECT_DOUBLE_EQ(c.rate_at(4), 0.0);
  EXPECT_DOUBLE_EQ(c.rate_at(9), 0.0);
  ParameterStore p = scalar_store(1.0);
  Optimizer opt(c);
  for (int i = 0; i < 4; ++i) opt.step(p, scalar_grad(1.0));
  const double before = p.get("x")(0, 0);
  opt.step(p, scalar_grad(1.0));
  EXPECT_EQ(p.get("x")(0, 0), before);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  OptimizerConfig c;
  c.learning_rate = 0.0;
  ParameterStore p = scalar_store(1.5);
  Optimizer opt(c);
  opt.step(p, scalar_grad(4.0));
  EXPECT_EQ(p.get("x")(0, 0), 1.5);
}

TEST(Adam, NonFiniteGradientRejected) {
  ParameterStore p = scalar_store(1.0);
  Optimizer opt({});
  try {
    opt.step(p, scalar_grad(std::numeric_limits<double>::quiet_NaN()));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "non-finite gradient");
  }
  EXPECT_EQ(p.get("x")(0, 0), 1.0);
  EXPECT_EQ(p.step, 0u);
}

TEST(Adam, UntouchedTensorsKeepValues) {
  ParameterStore p = scalar_store(1.0);
  p.add("y", 2, 2);
  p.get("y").fill(3.0);
  Optimizer opt({});
  opt.step(p, scalar_grad(1.0));
  for (double v : p.get("y").values()) EXPECT_EQ(v, 3.0);
}

TEST(Sgd, PlainStep) {
  OptimizerConfig c;
  c.algorithm = OptimizerAlgorithm::kSgd;
  c.learning_rate = 0.1;
  ParameterStore p = scalar_store(1.0);
  Optimizer opt(c);
  opt.step(p, scalar_grad(2.0));
  EXPECT_NEAR(p.get("x")(0, 0), 0.8, 1e-15);
}

TEST(GradStore, ScaleAndAdd) {
  GradStore a, b;
  a.at("w", 1, 2)(0, 1) = 2.0;
  b.at("w", 1, 2)(0, 1) = 1.0;
  b.at("v", 1, 1)(0, 0) = 5.0;
  a.add(b, 2.0);
  a.scale(0.5);
  EXPECT_DOUBLE_EQ(a.find("w")->operator()(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(a.find("v")->operator()(0, 0), 5.0);
  EXPECT_EQ(a.find("missing"), nullptr);
  EXPECT_THROW(a.at("w", 2, 2), InvalidArgument);
}

TEST(Checkpoint, ExactRoundTrip) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  ParameterStore p;
  for (const char* name : {"a", "b.c", "embed.token"}) {
    Matrix& m = p.add(name, 1 + rng() % 5, 1 + rng() % 7);
    for (double& v : m.values()) v = n(rng);
  }
  p.get("a")(0, 0) = std::numeric_limits<double>::denorm_min();
  p.metadata["config"] = "seed = 3\nencoder.d = 8";
  p.metadata["vocab"] = "[PAD]\n[UNK]";
  p.seed = 42;
  p.step = 17;
  const auto path = std::filesystem::temp_directory_path() / "prfrl_ckpt_roundtrip.bin";
  save_checkpoint(p, path);
  const ParameterStore back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == p);
}

TEST(Checkpoint, RejectsTruncatedFile) {
  ParameterStore p = scalar_store(1.0);
  const auto path = std::filesystem::temp_directory_path() / "prfrl_ckpt_trunc.bin";
  save_checkpoint(p, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_checkpoint(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

}  // namespace
}  // namespace prfrl
