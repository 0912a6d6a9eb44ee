//*****************************************************************************
// Copyright 2026 The hegraph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************

#include <gtest/gtest.h>

#include "heg/eval.hpp"
#include "heg/graph.hpp"
#include "heg/passes.hpp"
#include "test_util.hpp"

namespace {

using namespace heg;
using testutil::make_const;
using testutil::make_op;
using testutil::make_param;
using testutil::max_relative_error;
using testutil::random_tensor;

TEST(ParsePasses, TokensAndAll) {
  auto passes = parse_passes("constant-fold,depth");
  ASSERT_EQ(passes.size(), 2u);
  EXPECT_EQ(passes[0], PassId::ConstantFold);
  EXPECT_EQ(passes[1], PassId::Depth);

  auto all = parse_passes("all");
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0], PassId::ConstantFold);
  EXPECT_EQ(all[1], PassId::AvgPoolFold);
  EXPECT_EQ(all[2], PassId::ActivationFold);
  EXPECT_EQ(all[3], PassId::BatchNormFold);

  EXPECT_THROW(parse_passes("no-such-pass"), Error);
}

TEST(ConstantFold, FoldsConstantChainAndSweepsDead) {
  Graph g("fold");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("c1", Tensor(TensorShape({1, 2}), {2.0, 3.0})));
  g.add_node(make_const("c2", Tensor(TensorShape({1, 2}), {5.0, 7.0})));
  g.add_node(make_op("add", OpKind::Add, {"c1", "c2"}));
  g.add_node(make_op("neg", OpKind::Negate, {"add"}));
  g.add_node(make_op("out", OpKind::Multiply, {"x", "neg"}));
  g.set_outputs({"out"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 2}), {1.0, 2.0})}};
  Tensor before = evaluate(g, inputs)[0];

  Graph folded = constant_fold(g);
  EXPECT_EQ(folded.node("neg").op, OpKind::Constant);
  EXPECT_EQ(folded.node("neg").data.value().values(), (std::vector<double>{-7.0, -10.0}));
  EXPECT_FALSE(folded.has_node("add"));
  EXPECT_FALSE(folded.has_node("c1"));
  EXPECT_FALSE(folded.has_node("c2"));
  EXPECT_EQ(evaluate(folded, inputs)[0], before);
}

TEST(ConstantFold, KeepsBatchDependentBroadcast) {
  Graph g("bcast");
  g.add_node(make_param("x", {1, 3}));
  g.add_node(make_const("bias", Tensor(TensorShape({3}), {1.0, 2.0, 3.0})));
  g.add_node(make_op("bcast", OpKind::Broadcast, {"bias"},
                     {{"shape", std::vector<int64_t>{-1, 3}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("out", OpKind::Add, {"x", "bcast"}));
  g.set_outputs({"out"});

  Graph folded = constant_fold(g);
  EXPECT_EQ(folded.node("bcast").op, OpKind::Broadcast);
}

TEST(ConstantFold, PolynomialOnConstant) {
  Graph g("poly");
  g.add_node(make_const("c", Tensor(TensorShape({1}), {2.5})));
  g.add_node(make_op("act", OpKind::PolyAct, {"c"}, {{"a", 2.0}, {"b", 4.0}, {"c", 6.0}}));
  g.set_outputs({"act"});

  Graph folded = constant_fold(g);
  EXPECT_EQ(folded.node("act").op, OpKind::Constant);
  EXPECT_DOUBLE_EQ(folded.node("act").data.value().at(0), 28.5);
}

//-----------------------------------------------------------------------------
// AvgPool folding.
//-----------------------------------------------------------------------------

Graph pool_conv_graph() {
  std::vector<double> xv(16);
  for (size_t i = 0; i < xv.size(); ++i) xv[i] = static_cast<double>(i + 1);
  Graph g("poolconv");
  g.add_node(make_param("x", {1, 1, 4, 4}));
  g.add_node(make_op("pool", OpKind::AvgPool, {"x"},
                     {{"window", std::vector<int64_t>{2, 2}}, {"stride", int64_t{2}}}));
  g.add_node(make_const("w", Tensor(TensorShape({1, 1, 2, 2}), {1.0, 2.0, 3.0, 4.0})));
  g.add_node(make_op("conv", OpKind::Convolution, {"pool", "w"}, {{"stride", int64_t{1}}}));
  g.set_outputs({"conv"});
  return g;
}

TEST(AvgPoolFold, FoldsDivisorIntoConvWeights) {
  Graph g = pool_conv_graph();
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 1, 4, 4}),
                                                    {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16})}};
  Tensor before = evaluate(g, inputs)[0];
  EXPECT_DOUBLE_EQ(before.at(0), 103.0);  // window means 3.5, 5.5, 11.5, 13.5 against 1..4

  Graph folded = avgpool_fold(g);
  EXPECT_EQ(folded.node("pool").op, OpKind::ScaledMeanPool);
  const Tensor& w = folded.node(folded.node("conv").inputs[1]).data.value();
  EXPECT_EQ(w.values(), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  EXPECT_DOUBLE_EQ(evaluate(folded, inputs)[0].at(0), 103.0);

  EXPECT_EQ(depth_analysis(g).total, 2);
  EXPECT_EQ(depth_analysis(folded).total, 1);
}

TEST(AvgPoolFold, BlockedWhenPoolIsAnOutput) {
  Graph g = pool_conv_graph();
  g.set_outputs({"conv", "pool"});
  Graph folded = avgpool_fold(g);
  EXPECT_EQ(folded, g);
}

//-----------------------------------------------------------------------------
// Activation folding.
//-----------------------------------------------------------------------------

Graph act_dot_graph(double a, double b, double c) {
  Graph g("actdot");
  g.add_node(make_param("x", {1, 1}));
  g.add_node(make_op("act", OpKind::PolyAct, {"x"}, {{"a", a}, {"b", b}, {"c", c}}));
  g.add_node(make_const("w", Tensor(TensorShape({1, 1}), {3.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"act", "w"}));
  g.set_outputs({"dot"});
  return g;
}

TEST(ActivationFold, MovesSquareCoefficientDownstream) {
  Graph g = act_dot_graph(2.0, 4.0, 6.0);
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 1}), {1.5})}};
  Tensor before = evaluate(g, inputs)[0];
  EXPECT_DOUBLE_EQ(before.at(0), 49.5);  // (2*2.25 + 4*1.5 + 6) * 3

  Graph folded = activation_fold(g);
  const Node& act = folded.node("act");
  EXPECT_DOUBLE_EQ(attr_f64(act, "a"), 1.0);
  EXPECT_DOUBLE_EQ(attr_f64(act, "b"), 2.0);
  EXPECT_DOUBLE_EQ(attr_f64(act, "c"), 3.0);
  const Tensor& w = folded.node(folded.node("dot").inputs[1]).data.value();
  EXPECT_EQ(w.values(), (std::vector<double>{6.0}));
  EXPECT_DOUBLE_EQ(evaluate(folded, inputs)[0].at(0), 49.5);

  EXPECT_EQ(depth_analysis(g).total, 3);
  EXPECT_EQ(depth_analysis(folded).total, 2);
}

TEST(ActivationFold, SkipsMultiplyFreeCoefficients) {
  for (double a : {0.0, 1.0, -1.0}) {
    Graph g = act_dot_graph(a, 4.0, 6.0);
    EXPECT_EQ(activation_fold(g), g);
  }
}

TEST(ActivationFold, BlockedWhenActivationIsAnOutput) {
  Graph g = act_dot_graph(2.0, 4.0, 6.0);
  g.set_outputs({"dot", "act"});
  EXPECT_EQ(activation_fold(g), g);
}

//-----------------------------------------------------------------------------
// Batch-norm folding.
//-----------------------------------------------------------------------------

Graph conv_bn_graph() {
  Graph g("convbn");
  g.add_node(make_param("x", {1, 1, 4, 4}));
  g.add_node(make_const("w", Tensor(TensorShape({1, 1, 3, 3}), std::vector<double>(9, 1.0))));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "w"}, {{"stride", int64_t{1}}}));
  g.add_node(make_const("gamma", Tensor(TensorShape({1}), {3.0})));
  g.add_node(make_const("beta", Tensor(TensorShape({1}), {1.0})));
  g.add_node(make_const("mean", Tensor(TensorShape({1}), {1.5})));
  g.add_node(make_const("variance", Tensor(TensorShape({1}), {8.99})));
  g.add_node(make_op("bn", OpKind::BatchNormInference, {"conv", "gamma", "beta", "mean", "variance"},
                     {{"epsilon", 0.01}}));
  g.set_outputs({"bn"});
  return g;
}

TEST(BatchNormFold, FoldsIntoWeightsAndBias) {
  // gamma/sqrt(var+eps) = 3/sqrt(9) = 1; bias = beta - 1*mean = -0.5.
  Graph g = conv_bn_graph();
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 1, 4, 4}),
                                                    {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16})}};
  Tensor before = evaluate(g, inputs)[0];
  EXPECT_DOUBLE_EQ(before.at(0), 53.5);  // 3x3 window sum 54, then 1*54 - 0.5

  Graph folded = bn_fold(g);
  for (const auto& [id, node] : folded.nodes()) EXPECT_NE(node.op, OpKind::BatchNormInference) << id;
  ASSERT_TRUE(folded.has_node("conv/bn_add"));
  ASSERT_TRUE(folded.has_node("conv/bn_bias"));
  EXPECT_DOUBLE_EQ(folded.node("conv/bn_bias").data.value().at(0), -0.5);
  EXPECT_EQ(folded.outputs(), (std::vector<std::string>{"conv/bn_add"}));

  Tensor after = evaluate(folded, inputs)[0];
  EXPECT_LE(max_relative_error(before, after), 1e-12);

  EXPECT_EQ(depth_analysis(g).total, 2);
  EXPECT_EQ(depth_analysis(folded).total, 1);
}

TEST(BatchNormFold, ScalesDotColumns) {
  Graph g("dotbn");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("w", Tensor(TensorShape({2, 2}), {1.0, 2.0, 3.0, 4.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "w"}));
  g.add_node(make_const("gamma", Tensor(TensorShape({2}), {2.0, 4.0})));
  g.add_node(make_const("beta", Tensor(TensorShape({2}), {1.0, 1.0})));
  g.add_node(make_const("mean", Tensor(TensorShape({2}), {0.0, 0.0})));
  g.add_node(make_const("variance", Tensor(TensorShape({2}), {0.99, 3.99})));
  g.add_node(make_op("bn", OpKind::BatchNormInference, {"dot", "gamma", "beta", "mean", "variance"},
                     {{"epsilon", 0.01}}));
  g.set_outputs({"bn"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 2}), {1.0, 1.0})}};
  Tensor before = evaluate(g, inputs)[0];
  EXPECT_DOUBLE_EQ(before.at(0), 9.0);
  EXPECT_DOUBLE_EQ(before.at(1), 13.0);

  Graph folded = bn_fold(g);
  const Tensor& w = folded.node(folded.node("dot").inputs[1]).data.value();
  EXPECT_LE(max_relative_error(w, Tensor(TensorShape({2, 2}), {2.0, 4.0, 6.0, 8.0})), 1e-12);
  Tensor after = evaluate(folded, inputs)[0];
  EXPECT_LE(max_relative_error(before, after), 1e-12);
}

TEST(BatchNormFold, BlockedByProducerFanOut) {
  Graph g = conv_bn_graph();
  g.add_node(make_op("extra", OpKind::Negate, {"conv"}));
  g.set_outputs({"bn", "extra"});
  EXPECT_EQ(bn_fold(g), g);
}

//-----------------------------------------------------------------------------
// Depth analysis.
//-----------------------------------------------------------------------------

Tensor sign_tensor(Rng& rng, TensorShape shape) {
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (double& v : values) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return Tensor(std::move(shape), std::move(values));
}

TEST(Depth, FiveLevelInferenceChain) {
  Graph g("net");
  g.add_node(make_param("x", {1, 1, 6, 6}));
  g.add_node(make_const("w1", Tensor(TensorShape({2, 1, 3, 3}))));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "w1"}, {{"stride", int64_t{1}}}));
  g.add_node(make_op("act1", OpKind::PolyAct, {"conv"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_op("rs", OpKind::Reshape, {"act1"}, {{"shape", std::vector<int64_t>{-1, 32}}}));
  g.add_node(make_const("w2", Tensor(TensorShape({32, 4}))));
  g.add_node(make_op("dot1", OpKind::Dot, {"rs", "w2"}));
  g.add_node(make_op("act2", OpKind::PolyAct, {"dot1"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_const("w3", Tensor(TensorShape({4, 2}))));
  g.add_node(make_op("dot2", OpKind::Dot, {"act2", "w3"}));
  g.set_outputs({"dot2"});

  DepthReport report = depth_analysis(g);
  EXPECT_EQ(report.total, 5);
  EXPECT_EQ(report.per_node.at("rs"), 0);
  ASSERT_FALSE(report.critical_path.empty());
  EXPECT_EQ(report.critical_path.front(), "x");
  EXPECT_EQ(report.critical_path.back(), "dot2");
  EXPECT_EQ(report.critical_path,
            (std::vector<std::string>{"x", "conv", "act1", "rs", "dot1", "act2", "dot2"}));
}

TEST(Depth, SignWeightsBypassReducesLevels) {
  Rng rng(7);
  Graph g("bin");
  g.add_node(make_param("x", {1, 1, 6, 6}));
  g.add_node(make_const("w1", sign_tensor(rng, TensorShape({2, 1, 3, 3}))));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "w1"}, {{"stride", int64_t{1}}}));
  auto add_bn = [&](const std::string& id, const std::string& input, int64_t channels) {
    g.add_node(make_const(id + "/g", Tensor(TensorShape({channels}), std::vector<double>(channels, 1.0))));
    g.add_node(make_const(id + "/b", Tensor(TensorShape({channels}), std::vector<double>(channels, 0.0))));
    g.add_node(make_const(id + "/m", Tensor(TensorShape({channels}), std::vector<double>(channels, 0.0))));
    g.add_node(make_const(id + "/v", Tensor(TensorShape({channels}), std::vector<double>(channels, 1.0))));
    g.add_node(make_op(id, OpKind::BatchNormInference, {input, id + "/g", id + "/b", id + "/m", id + "/v"},
                       {{"epsilon", 0.001}}));
  };
  add_bn("bn1", "conv", 2);
  g.add_node(make_op("act1", OpKind::PolyAct, {"bn1"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_op("rs", OpKind::Reshape, {"act1"}, {{"shape", std::vector<int64_t>{-1, 32}}}));
  g.add_node(make_const("w2", sign_tensor(rng, TensorShape({32, 4}))));
  g.add_node(make_op("dot1", OpKind::Dot, {"rs", "w2"}));
  add_bn("bn2", "dot1", 4);
  g.add_node(make_op("act2", OpKind::PolyAct, {"bn2"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_const("w3", sign_tensor(rng, TensorShape({4, 2}))));
  g.add_node(make_op("dot2", OpKind::Dot, {"act2", "w3"}));
  add_bn("bn3", "dot2", 2);
  g.set_outputs({"bn3"});

  EXPECT_EQ(depth_analysis(g, false).total, 8);
  EXPECT_EQ(depth_analysis(g, true).total, 5);
}

TEST(Depth, PlainSubgraphsCostNothing) {
  Graph g("plain");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_op("neg", OpKind::Negate, {"x"}));
  g.add_node(make_const("c", Tensor(TensorShape({1, 2}), {2.0, 3.0})));
  g.add_node(make_op("cact", OpKind::PolyAct, {"c"}, {{"a", 3.0}, {"b", 2.0}, {"c", 1.0}}));
  g.add_node(make_op("out", OpKind::Add, {"neg", "cact"}));
  g.set_outputs({"out"});

  DepthReport report = depth_analysis(g);
  EXPECT_EQ(report.total, 0);
  EXPECT_EQ(report.per_node.at("cact"), 0);
}

TEST(Depth, ElementwiseMultiplyBypass) {
  Graph g("mul");
  g.add_node(make_param("x", {1, 4}));
  g.add_node(make_const("mask", Tensor(TensorShape({1, 4}), {1.0, -1.0, 0.0, 1.0})));
  g.add_node(make_const("gen", Tensor(TensorShape({1, 4}), {1.0, -1.0, 0.5, 1.0})));
  g.add_node(make_op("m1", OpKind::Multiply, {"x", "mask"}));
  g.add_node(make_op("m2", OpKind::Multiply, {"m1", "gen"}));
  g.set_outputs({"m2"});

  EXPECT_EQ(depth_analysis(g, false).total, 2);
  EXPECT_EQ(depth_analysis(g, true).total, 1);
}

TEST(Depth, ReportSerialization) {
  Graph g = act_dot_graph(2.0, 0.0, 0.0);
  auto j = depth_report_to_json(depth_analysis(g, true));
  EXPECT_EQ(j.at("total").get<int64_t>(), 3);
  EXPECT_TRUE(j.at("bypass_aware").get<bool>());
  EXPECT_EQ(j.at("per_node").at("act").get<int64_t>(), 2);
}

//-----------------------------------------------------------------------------
// Pipeline soundness on randomized networks: rewrites must preserve the
// plain-arithmetic semantics and never increase depth.
//-----------------------------------------------------------------------------

struct RandomNet {
  Graph graph;
  std::map<std::string, Tensor> inputs;
};

RandomNet random_network(uint64_t seed) {
  Rng rng(seed);
  Graph g("random");
  bool conv_mode = rng.uniform() < 0.5;
  std::string cur = "x";
  int layer = 0;
  auto name = [&](const std::string& base) { return base + std::to_string(layer); };

  if (conv_mode) {
    int64_t channels = 1 + rng.uniform_int(2);
    int64_t side = 6 + rng.uniform_int(3);
    g.add_node(make_param("x", {2, channels, side, side}));
    int layers = 1 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < layers; ++i) {
      ++layer;
      TensorShape shape = infer_shapes(g).at(cur);
      int64_t h = shape.dim(2);
      if (h < 3) break;
      int64_t filters = 1 + rng.uniform_int(2);
      int64_t kernel = 2 + rng.uniform_int(std::min<int64_t>(2, h - 1));
      bool sign_weights = rng.uniform() < 0.3;
      Tensor w = sign_weights ? sign_tensor(rng, TensorShape({filters, shape.dim(1), kernel, kernel}))
                              : random_tensor(rng, TensorShape({filters, shape.dim(1), kernel, kernel}));
      g.add_node(make_const(name("w"), std::move(w)));
      g.add_node(make_op(name("conv"), OpKind::Convolution, {cur, name("w")}, {{"stride", int64_t{1}}}));
      cur = name("conv");
      if (rng.uniform() < 0.5) {
        std::vector<double> gv, bv, mv, vv;
        for (int64_t c = 0; c < filters; ++c) {
          gv.push_back(rng.uniform(0.5, 2.0));
          bv.push_back(rng.uniform(-1.0, 1.0));
          mv.push_back(rng.uniform(-1.0, 1.0));
          vv.push_back(rng.uniform(0.5, 4.0));
        }
        g.add_node(make_const(name("bng"), Tensor(TensorShape({filters}), gv)));
        g.add_node(make_const(name("bnb"), Tensor(TensorShape({filters}), bv)));
        g.add_node(make_const(name("bnm"), Tensor(TensorShape({filters}), mv)));
        g.add_node(make_const(name("bnv"), Tensor(TensorShape({filters}), vv)));
        g.add_node(make_op(name("bn"), OpKind::BatchNormInference,
                           {cur, name("bng"), name("bnb"), name("bnm"), name("bnv")}, {{"epsilon", 0.01}}));
        cur = name("bn");
      }
      if (rng.uniform() < 0.6) {
        double a = rng.uniform() < 0.5 ? 1.0 : rng.uniform(0.25, 2.0);
        g.add_node(make_op(name("act"), OpKind::PolyAct, {cur},
                           {{"a", a}, {"b", rng.uniform(-1.0, 1.0)}, {"c", rng.uniform(-1.0, 1.0)}}));
        cur = name("act");
      }
      TensorShape after = infer_shapes(g).at(cur);
      if (after.dim(2) >= 2 && after.dim(3) >= 2 && rng.uniform() < 0.5) {
        g.add_node(make_op(name("pool"), OpKind::AvgPool, {cur},
                           {{"window", std::vector<int64_t>{2, 2}}, {"stride", int64_t{2}}}));
        cur = name("pool");
      }
    }
  } else {
    int64_t width = 2 + rng.uniform_int(4);
    g.add_node(make_param("x", {3, width}));
    int layers = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < layers; ++i) {
      ++layer;
      TensorShape shape = infer_shapes(g).at(cur);
      int64_t next = 2 + rng.uniform_int(4);
      bool sign_weights = rng.uniform() < 0.3;
      Tensor w = sign_weights ? sign_tensor(rng, TensorShape({shape.dim(1), next}))
                              : random_tensor(rng, TensorShape({shape.dim(1), next}));
      g.add_node(make_const(name("w"), std::move(w)));
      g.add_node(make_op(name("dot"), OpKind::Dot, {cur, name("w")}));
      cur = name("dot");
      if (rng.uniform() < 0.4) {
        std::vector<double> gv, bv, mv, vv;
        for (int64_t c = 0; c < next; ++c) {
          gv.push_back(rng.uniform(0.5, 2.0));
          bv.push_back(rng.uniform(-1.0, 1.0));
          mv.push_back(rng.uniform(-1.0, 1.0));
          vv.push_back(rng.uniform(0.5, 4.0));
        }
        g.add_node(make_const(name("bng"), Tensor(TensorShape({next}), gv)));
        g.add_node(make_const(name("bnb"), Tensor(TensorShape({next}), bv)));
        g.add_node(make_const(name("bnm"), Tensor(TensorShape({next}), mv)));
        g.add_node(make_const(name("bnv"), Tensor(TensorShape({next}), vv)));
        g.add_node(make_op(name("bn"), OpKind::BatchNormInference,
                           {cur, name("bng"), name("bnb"), name("bnm"), name("bnv")}, {{"epsilon", 0.01}}));
        cur = name("bn");
      }
      if (rng.uniform() < 0.6) {
        double a = rng.uniform() < 0.5 ? 1.0 : rng.uniform(0.25, 2.0);
        g.add_node(make_op(name("act"), OpKind::PolyAct, {cur},
                           {{"a", a}, {"b", rng.uniform(-1.0, 1.0)}, {"c", rng.uniform(-1.0, 1.0)}}));
        cur = name("act");
      }
    }
  }
  g.set_outputs({cur});

  RandomNet net{std::move(g), {}};
  TensorShape xshape(std::vector<int64_t>(attr_ints(net.graph.node("x"), "shape")));
  net.inputs.emplace("x", random_tensor(rng, xshape));
  return net;
}

TEST(PassSoundness, RewritesPreserveSemanticsAndDepth) {
  auto passes = parse_passes("all");
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    RandomNet net = random_network(seed);
    Tensor before = evaluate(net.graph, net.inputs)[0];
    int64_t depth_before = depth_analysis(net.graph).total;

    Graph folded = run_pipeline(net.graph, passes).graph;
    ASSERT_TRUE(validate(folded).empty()) << "seed " << seed;
    Tensor after = evaluate(folded, net.inputs)[0];
    EXPECT_LE(max_relative_error(before, after), 1e-9) << "seed " << seed;
    EXPECT_LE(depth_analysis(folded).total, depth_before) << "seed " << seed;

    Graph again = run_pipeline(folded, passes).graph;
    EXPECT_EQ(again, folded) << "pipeline not idempotent at seed " << seed;
  }
}

TEST(Pipeline, DepthTokenReportsAfterRewrites) {
  Graph g = conv_bn_graph();
  auto result = run_pipeline(g, parse_passes("all,depth"));
  ASSERT_TRUE(result.depth.has_value());
  EXPECT_EQ(result.depth->total, 1);
}

}  // namespace
