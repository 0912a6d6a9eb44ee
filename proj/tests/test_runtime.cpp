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

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heg/clear_backend.hpp"
#include "heg/ckks/ckks_backend.hpp"
#include "heg/context.hpp"
#include "heg/eval.hpp"
#include "heg/graph.hpp"
#include "heg/runtime.hpp"
#include "test_util.hpp"

namespace {

using namespace heg;
using heg::ckks::CkksBackend;
using heg::ckks::generate_keys;
using testutil::make_const;
using testutil::make_op;
using testutil::make_param;
using testutil::max_relative_error;
using testutil::random_tensor;

ContextPtr small_context(const std::string& scheme = "ckks-ref", int primes = 3, int64_t degree = 1024) {
  ContextParams p;
  p.scheme = scheme;
  p.poly_degree = degree;
  p.coeff_mod_bits = std::vector<int>(static_cast<size_t>(primes), 30);
  p.scale_bits = 30;
  p.security = 0;  // deliberately small test ring
  return make_context(p);
}

std::shared_ptr<ClearBackend> clear_backend(int primes = 3) {
  return std::make_shared<ClearBackend>(small_context("clear", primes));
}

std::shared_ptr<CkksBackend> ckks_backend(int primes = 3, uint64_t key_seed = 7) {
  ContextPtr ctx = small_context("ckks-ref", primes);
  return std::make_shared<CkksBackend>(ctx, generate_keys(*ctx, key_seed));
}

//! Affine layer with a square activation: depth 2.
Graph affine_graph() {
  Graph g("affine");
  g.add_node(make_param("x", {1, 4}));
  g.add_node(make_const("w", Tensor(TensorShape({4, 3}),
                                    {0.5, -0.25, 0.1, 0.3, 0.2, -0.4, -0.1, 0.6, 0.05, 0.2, -0.3, 0.15})));
  g.add_node(make_const("bias", Tensor(TensorShape({3}), {0.1, -0.2, 0.3})));
  g.add_node(make_op("bbias", OpKind::Broadcast, {"bias"},
                     {{"shape", std::vector<int64_t>{-1, 3}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "w"}));
  g.add_node(make_op("sum", OpKind::Add, {"dot", "bbias"}));
  g.add_node(make_op("act", OpKind::PolyAct, {"sum"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.set_outputs({"act"});
  return g;
}

//! Convolution into batch normalization: depth 2 unfused.
Graph conv_bn_graph() {
  Graph g("convbn");
  Rng rng(11);
  g.add_node(make_param("x", {1, 1, 4, 4}));
  g.add_node(make_const("f", random_tensor(rng, TensorShape({2, 1, 2, 2}), -0.5, 0.5)));
  g.add_node(make_const("gamma", Tensor(TensorShape({2}), {1.2, 0.8})));
  g.add_node(make_const("beta", Tensor(TensorShape({2}), {0.1, -0.1})));
  g.add_node(make_const("mean", Tensor(TensorShape({2}), {0.05, -0.02})));
  g.add_node(make_const("variance", Tensor(TensorShape({2}), {0.9, 1.1})));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "f"}, {{"stride", int64_t{2}}}));
  g.add_node(make_op("bn", OpKind::BatchNormInference, {"conv", "gamma", "beta", "mean", "variance"},
                     {{"epsilon", 1e-5}}));
  g.set_outputs({"bn"});
  return g;
}

//! Small five-multiplication network in the style of an encrypted-inference
//! benchmark: conv, square, reshape, dense, square, dense.
Graph mini_network_graph() {
  Graph g("mini");
  Rng rng(23);
  g.add_node(make_param("x", {1, 1, 4, 4}));
  g.add_node(make_const("f", random_tensor(rng, TensorShape({2, 1, 2, 2}), -0.5, 0.5)));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "f"}, {{"stride", int64_t{2}}}));
  g.add_node(make_op("act1", OpKind::PolyAct, {"conv"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_op("flat", OpKind::Reshape, {"act1"}, {{"shape", std::vector<int64_t>{-1, 8}}}));
  g.add_node(make_const("w1", random_tensor(rng, TensorShape({8, 3}), -0.5, 0.5)));
  g.add_node(make_op("fc1", OpKind::Dot, {"flat", "w1"}));
  g.add_node(make_op("act2", OpKind::PolyAct, {"fc1"}, {{"a", 1.0}, {"b", 0.0}, {"c", 0.0}}));
  g.add_node(make_const("w2", random_tensor(rng, TensorShape({3, 2}), -0.5, 0.5)));
  g.add_node(make_op("fc2", OpKind::Dot, {"act2", "w2"}));
  g.set_outputs({"fc2"});
  return g;
}

std::map<std::string, Tensor> batch_inputs(const Graph& g, int64_t batch, uint64_t seed) {
  std::map<std::string, Tensor> inputs;
  Rng rng(seed);
  for (const auto& [id, node] : g.nodes()) {
    if (node.op != OpKind::Parameter) continue;
    std::vector<int64_t> dims = attr_ints(node, "shape");
    if (!dims.empty()) dims[0] = batch;
    inputs.emplace(id, random_tensor(rng, TensorShape(dims), -0.4, 0.4));
  }
  return inputs;
}

}  // namespace

//-----------------------------------------------------------------------------
// Bypass decision table and paradigm parsing.
//-----------------------------------------------------------------------------

TEST(ApplyBypass, MultiplicativeShortcuts) {
  BypassConfig cfg;
  for (OpKind op : {OpKind::Multiply, OpKind::Dot, OpKind::Convolution}) {
    EXPECT_EQ(apply_bypass(op, SpecialValue::One, cfg), BypassAction::ReturnUnchanged);
    EXPECT_EQ(apply_bypass(op, SpecialValue::Zero, cfg), BypassAction::FreshZero);
    EXPECT_EQ(apply_bypass(op, SpecialValue::MinusOne, cfg), BypassAction::Negate);
    EXPECT_EQ(apply_bypass(op, SpecialValue::General, cfg), BypassAction::Proceed);
  }
}

TEST(ApplyBypass, AdditiveShortcuts) {
  BypassConfig cfg;
  EXPECT_EQ(apply_bypass(OpKind::Add, SpecialValue::Zero, cfg), BypassAction::ReturnUnchanged);
  EXPECT_EQ(apply_bypass(OpKind::Subtract, SpecialValue::Zero, cfg), BypassAction::ReturnUnchanged);
  EXPECT_EQ(apply_bypass(OpKind::Add, SpecialValue::One, cfg), BypassAction::Proceed);
  EXPECT_EQ(apply_bypass(OpKind::Add, SpecialValue::MinusOne, cfg), BypassAction::Proceed);
}

TEST(ApplyBypass, TogglesAreIndependent) {
  BypassConfig mult_only;
  mult_only.optimized_addition = false;
  EXPECT_EQ(apply_bypass(OpKind::Multiply, SpecialValue::One, mult_only), BypassAction::ReturnUnchanged);
  EXPECT_EQ(apply_bypass(OpKind::Add, SpecialValue::Zero, mult_only), BypassAction::Proceed);

  BypassConfig add_only;
  add_only.optimized_multiply = false;
  EXPECT_EQ(apply_bypass(OpKind::Multiply, SpecialValue::One, add_only), BypassAction::Proceed);
  EXPECT_EQ(apply_bypass(OpKind::Multiply, SpecialValue::Zero, add_only), BypassAction::Proceed);
  EXPECT_EQ(apply_bypass(OpKind::Add, SpecialValue::Zero, add_only), BypassAction::ReturnUnchanged);
}

TEST(ParadigmNames, RoundTrip) {
  for (Paradigm p : {Paradigm::EncryptedData, Paradigm::EncryptedModel, Paradigm::EncryptedBoth,
                     Paradigm::PlainDebug})
    EXPECT_EQ(parse_paradigm(paradigm_name(p)), p);
  EXPECT_EQ(parse_paradigm("EncryptedData"), Paradigm::EncryptedData);
  EXPECT_THROW(parse_paradigm("fully-homomorphic"), Error);
}

TEST(ExecProfileJson, PinnedShape) {
  ExecProfile profile;
  profile.wall_ms["conv"] = 1.5;
  profile.bypass.mult = 3;
  profile.bypass.add = 2;
  profile.ct_ops.add = 10;
  profile.ct_ops.mul_ct = 4;
  profile.ct_ops.mul_pt = 6;
  profile.ct_ops.negate = 1;
  profile.peak_elements = 99;

  nlohmann::json j = profile.to_json();
  ASSERT_EQ(j.size(), 3u);
  EXPECT_TRUE(j.contains("wall_ms"));
  EXPECT_TRUE(j.contains("bypass"));
  EXPECT_TRUE(j.contains("ct_ops"));
  EXPECT_DOUBLE_EQ(j["wall_ms"]["conv"].get<double>(), 1.5);
  EXPECT_EQ(j["bypass"]["mult"].get<int64_t>(), 3);
  EXPECT_EQ(j["bypass"]["add"].get<int64_t>(), 2);
  EXPECT_EQ(j["ct_ops"]["add"].get<int64_t>(), 10);
  EXPECT_EQ(j["ct_ops"]["mul_ct"].get<int64_t>(), 4);
  EXPECT_EQ(j["ct_ops"]["mul_pt"].get<int64_t>(), 6);
  EXPECT_EQ(j["ct_ops"]["negate"].get<int64_t>(), 1);
  // peak element tracking is a struct field, not part of the JSON contract
  EXPECT_FALSE(j.contains("peak_elements"));
}

//-----------------------------------------------------------------------------
// Plain-debug execution against the reference evaluator.
//-----------------------------------------------------------------------------

TEST(PlainDebug, MatchesEvaluatorOnAffineNetwork) {
  Graph g = affine_graph();
  auto inputs = batch_inputs(g, 3, 42);
  Tensor oracle = evaluate(g, inputs)[0];

  auto be = clear_backend(4);
  ExecOptions opts;
  opts.paradigm = Paradigm::PlainDebug;
  ExecResult r = execute(g, inputs, *be, opts);
  EXPECT_LT(max_relative_error(r.outputs.at("act"), oracle), 1e-12);
  // nothing is encrypted, so no ciphertext ops are recorded
  EXPECT_EQ(r.profile.ct_ops.add, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_ct, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
}

TEST(PlainDebug, MatchesEvaluatorOnConvBatchNorm) {
  Graph g = conv_bn_graph();
  auto inputs = batch_inputs(g, 2, 5);
  Tensor oracle = evaluate(g, inputs)[0];

  auto be = clear_backend(4);
  ExecOptions opts;
  opts.paradigm = Paradigm::PlainDebug;
  ExecResult r = execute(g, inputs, *be, opts);
  EXPECT_LT(max_relative_error(r.outputs.at("bn"), oracle), 1e-12);
}

//-----------------------------------------------------------------------------
// Every paradigm agrees with the reference evaluator on real networks.
//-----------------------------------------------------------------------------

TEST(Paradigms, AllFourAgreeOnConvBatchNorm) {
  Graph g = conv_bn_graph();
  auto inputs = batch_inputs(g, 2, 99);
  Tensor oracle = evaluate(g, inputs)[0];

  for (Paradigm p : {Paradigm::EncryptedData, Paradigm::EncryptedModel, Paradigm::EncryptedBoth,
                     Paradigm::PlainDebug}) {
    auto be = ckks_backend(4);
    ExecOptions opts;
    opts.paradigm = p;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_LT(max_relative_error(r.outputs.at("bn"), oracle), 1e-2)
        << "paradigm " << paradigm_name(p);
  }
}

TEST(Paradigms, AllFourAgreeOnMiniNetwork) {
  Graph g = mini_network_graph();
  auto inputs = batch_inputs(g, 2, 7);
  Tensor oracle = evaluate(g, inputs)[0];

  for (Paradigm p : {Paradigm::EncryptedData, Paradigm::EncryptedModel, Paradigm::EncryptedBoth,
                     Paradigm::PlainDebug}) {
    auto be = ckks_backend(7);
    ExecOptions opts;
    opts.paradigm = p;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_LT(max_relative_error(r.outputs.at("fc2"), oracle), 1e-2)
        << "paradigm " << paradigm_name(p);
  }
}

TEST(Paradigms, EncryptedPathsUseTheExpectedMultiplyKind) {
  Graph g = affine_graph();
  auto inputs = batch_inputs(g, 2, 3);

  // data encrypted, constants plain: products are ciphertext-by-plaintext
  auto be1 = ckks_backend(4);
  ExecOptions data_opts;
  data_opts.paradigm = Paradigm::EncryptedData;
  data_opts.bypass.optimized_multiply = false;
  data_opts.bypass.optimized_addition = false;
  ExecResult rd = execute(g, inputs, *be1, data_opts);
  EXPECT_GT(rd.profile.ct_ops.mul_pt, 0);

  // both sides encrypted: the dot products become ciphertext-by-ciphertext
  auto be2 = ckks_backend(4);
  ExecOptions both_opts;
  both_opts.paradigm = Paradigm::EncryptedBoth;
  ExecResult rb = execute(g, inputs, *be2, both_opts);
  EXPECT_EQ(rb.profile.ct_ops.mul_pt, 0);
  EXPECT_GT(rb.profile.ct_ops.mul_ct, rd.profile.ct_ops.mul_ct);
}

//-----------------------------------------------------------------------------
// Multiply and add shortcuts: counts and values.
//-----------------------------------------------------------------------------

TEST(Shortcuts, IdentityMatrixDotSkipsAllMultiplications) {
  Graph g("identity");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("eye", Tensor(TensorShape({2, 2}), {1.0, 0.0, 0.0, 1.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "eye"}));
  g.set_outputs({"dot"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {1.5, -2.5, 0.25, 4.0})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  // per output element: the 1-term passes through, the 0-term is dropped
  EXPECT_EQ(r.profile.bypass.mult, 4);
  EXPECT_EQ(r.profile.bypass.add, 2);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_ct, 0);
  EXPECT_EQ(r.profile.ct_ops.add, 0);
  EXPECT_EQ(r.profile.ct_ops.negate, 0);
  EXPECT_LT(max_relative_error(r.outputs.at("dot"), inputs.at("x")), 1e-3);
}

TEST(Shortcuts, DisablingAdditionMaterializesFreshZeros) {
  Graph g("identity");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("eye", Tensor(TensorShape({2, 2}), {1.0, 0.0, 0.0, 1.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "eye"}));
  g.set_outputs({"dot"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {1.5, -2.5, 0.25, 4.0})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  opts.bypass.optimized_addition = false;
  ExecResult r = execute(g, inputs, *be, opts);

  // the zero weights still skip their multiplications, but their terms now
  // join the accumulation as fresh encryptions of zero
  EXPECT_EQ(r.profile.bypass.mult, 4);
  EXPECT_EQ(r.profile.bypass.add, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  EXPECT_EQ(r.profile.ct_ops.add, 2);
  EXPECT_LT(max_relative_error(r.outputs.at("dot"), inputs.at("x")), 1e-3);
}

TEST(Shortcuts, DisablingMultiplyRunsEveryProduct) {
  Graph g("identity");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("eye", Tensor(TensorShape({2, 2}), {1.0, 0.0, 0.0, 1.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "eye"}));
  g.set_outputs({"dot"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {1.5, -2.5, 0.25, 4.0})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  opts.bypass.optimized_multiply = false;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 0);
  EXPECT_EQ(r.profile.bypass.add, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 4);
  EXPECT_EQ(r.profile.ct_ops.add, 2);
  EXPECT_LT(max_relative_error(r.outputs.at("dot"), inputs.at("x")), 1e-3);
}

TEST(Shortcuts, MultiplyByOnePreservesTheCiphertextBitExactly) {
  // x is returned both untouched and through a multiply-by-one: the shortcut
  // hands back the same ciphertext, so the two outputs decrypt identically.
  Graph g("passthrough");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("one", Tensor(TensorShape({1, 1}), {1.0})));
  g.add_node(make_op("flat", OpKind::Reshape, {"x"}, {{"shape", std::vector<int64_t>{-1, 2, 1}}}));
  g.add_node(make_op("dot", OpKind::Dot, {"flat", "one"}));
  g.set_outputs({"x", "dot"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({3, 2}), {0.1, 0.2, 0.3, 0.4, 0.5, 0.6})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 2);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  const auto& direct = r.outputs.at("x").values();
  const auto& through = r.outputs.at("dot").values();
  ASSERT_EQ(direct.size(), through.size());
  for (size_t i = 0; i < direct.size(); ++i) EXPECT_EQ(direct[i], through[i]);
}

TEST(Shortcuts, AllOnesConvolutionNeedsNoMultiplications) {
  Graph g("onesconv");
  g.add_node(make_param("x", {1, 1, 3, 3}));
  g.add_node(make_const("f", Tensor(TensorShape({1, 1, 3, 3}), std::vector<double>(9, 1.0))));
  g.add_node(make_op("conv", OpKind::Convolution, {"x", "f"}, {{"stride", int64_t{1}}}));
  g.set_outputs({"conv"});

  auto inputs = batch_inputs(g, 2, 13);
  Tensor oracle = evaluate(g, inputs)[0];
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_ct, 0);
  EXPECT_EQ(r.profile.bypass.mult, 9);
  EXPECT_EQ(r.profile.ct_ops.add, 8);
  EXPECT_LT(max_relative_error(r.outputs.at("conv"), oracle), 1e-3);
}

TEST(Shortcuts, MinusOneMultiplyBecomesNegation) {
  Graph g("neg");
  g.add_node(make_param("x", {1, 3}));
  g.add_node(make_const("m", Tensor(TensorShape({3}), {-1.0, -1.0, -1.0})));
  g.add_node(make_op("bm", OpKind::Broadcast, {"m"},
                     {{"shape", std::vector<int64_t>{-1, 3}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("mul", OpKind::Multiply, {"x", "bm"}));
  g.set_outputs({"mul"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 3}), {0.1, -0.2, 0.3, 0.4, -0.5, 0.6})}};
  Tensor oracle = evaluate(g, inputs)[0];
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 3);
  EXPECT_EQ(r.profile.ct_ops.negate, 3);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  EXPECT_LT(max_relative_error(r.outputs.at("mul"), oracle), 1e-3);
}

TEST(Shortcuts, ZeroMultiplyYieldsFreshEncryptionOfZero) {
  Graph g("zero");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("z", Tensor(TensorShape({2}), {0.0, 0.0})));
  g.add_node(make_op("bz", OpKind::Broadcast, {"z"},
                     {{"shape", std::vector<int64_t>{-1, 2}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("mul", OpKind::Multiply, {"x", "bz"}));
  g.set_outputs({"mul"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {5.0, -3.0, 2.0, 7.0})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 2);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 0);
  for (double v : r.outputs.at("mul").values()) EXPECT_LT(std::abs(v), 1e-3);
}

TEST(Shortcuts, AddingZeroConstantsIsSkipped) {
  Graph g("addzero");
  g.add_node(make_param("x", {1, 3}));
  g.add_node(make_const("z", Tensor(TensorShape({3}), {0.0, 0.0, 0.0})));
  g.add_node(make_op("bz", OpKind::Broadcast, {"z"},
                     {{"shape", std::vector<int64_t>{-1, 3}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("sum", OpKind::Add, {"x", "bz"}));
  g.set_outputs({"sum"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 3}), {1, 2, 3, 4, 5, 6})}};
  auto be = ckks_backend(3);
  {
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_EQ(r.profile.bypass.add, 3);
    EXPECT_EQ(r.profile.ct_ops.add, 0);
  }
  {
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    opts.bypass.optimized_addition = false;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_EQ(r.profile.bypass.add, 0);
    EXPECT_EQ(r.profile.ct_ops.add, 3);
  }
}

TEST(Shortcuts, EncryptedModelNeverBypassesItsConstants) {
  // Under the model-encrypting paradigm the identity matrix is a ciphertext,
  // so no plaintext inspection may shortcut it; the data side is plain input
  // and must not be shortcut either.
  Graph g("identity");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("eye", Tensor(TensorShape({2, 2}), {1.0, 0.0, 0.0, 1.0})));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "eye"}));
  g.set_outputs({"dot"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {1.5, -2.5, 0.25, 4.0})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedModel;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 0);
  EXPECT_EQ(r.profile.bypass.add, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 4);
  EXPECT_EQ(r.profile.ct_ops.add, 2);
  EXPECT_LT(max_relative_error(r.outputs.at("dot"), inputs.at("x")), 1e-2);
}

TEST(Shortcuts, ActivationCoefficientsAreNeverBypassCounted) {
  Graph g("act");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_op("act", OpKind::PolyAct, {"x"}, {{"a", 1.0}, {"b", 1.0}, {"c", 0.0}}));
  g.set_outputs({"act"});

  auto inputs = batch_inputs(g, 2, 17);
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  EXPECT_EQ(r.profile.bypass.mult, 0);
  EXPECT_EQ(r.profile.bypass.add, 0);
  EXPECT_EQ(r.profile.ct_ops.mul_ct, 2);  // the squares
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 2);  // the linear terms
}

//-----------------------------------------------------------------------------
// Operation counts are batch- and thread-invariant; seeds pin the results.
//-----------------------------------------------------------------------------

TEST(Determinism, CountsDoNotDependOnTheBatchExtent) {
  Graph g = mini_network_graph();
  auto be = ckks_backend(7);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;

  ExecResult r1 = execute(g, batch_inputs(g, 1, 2), *be, opts);
  ExecResult r4 = execute(g, batch_inputs(g, 4, 2), *be, opts);

  EXPECT_EQ(r1.profile.ct_ops.add, r4.profile.ct_ops.add);
  EXPECT_EQ(r1.profile.ct_ops.mul_ct, r4.profile.ct_ops.mul_ct);
  EXPECT_EQ(r1.profile.ct_ops.mul_pt, r4.profile.ct_ops.mul_pt);
  EXPECT_EQ(r1.profile.ct_ops.negate, r4.profile.ct_ops.negate);
  EXPECT_EQ(r1.profile.bypass.mult, r4.profile.bypass.mult);
  EXPECT_EQ(r1.profile.bypass.add, r4.profile.bypass.add);
}

TEST(Determinism, ThreadCountChangesNeitherValuesNorCounts) {
  Graph g = conv_bn_graph();
  auto inputs = batch_inputs(g, 2, 31);
  auto be = ckks_backend(4);

  ExecOptions seq;
  seq.paradigm = Paradigm::EncryptedData;
  seq.threads = 1;
  ExecOptions par = seq;
  par.threads = 4;

  ExecResult r1 = execute(g, inputs, *be, seq);
  ExecResult r2 = execute(g, inputs, *be, par);

  EXPECT_EQ(r1.outputs.at("bn").values(), r2.outputs.at("bn").values());
  EXPECT_EQ(r1.profile.ct_ops.add, r2.profile.ct_ops.add);
  EXPECT_EQ(r1.profile.ct_ops.mul_ct, r2.profile.ct_ops.mul_ct);
  EXPECT_EQ(r1.profile.ct_ops.mul_pt, r2.profile.ct_ops.mul_pt);
  EXPECT_EQ(r1.profile.bypass.mult, r2.profile.bypass.mult);
}

TEST(Determinism, SameSeedSameOutputs) {
  Graph g = affine_graph();
  auto inputs = batch_inputs(g, 2, 8);
  auto be = ckks_backend(4);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  opts.seed = 77;

  ExecResult r1 = execute(g, inputs, *be, opts);
  ExecResult r2 = execute(g, inputs, *be, opts);
  EXPECT_EQ(r1.outputs.at("act").values(), r2.outputs.at("act").values());

  opts.seed = 78;
  ExecResult r3 = execute(g, inputs, *be, opts);
  // different encryption randomness, same plaintext meaning
  EXPECT_NE(r1.outputs.at("act").values(), r3.outputs.at("act").values());
  EXPECT_LT(max_relative_error(r1.outputs.at("act"), r3.outputs.at("act")), 1e-3);
}

//-----------------------------------------------------------------------------
// Input validation and depth admission.
//-----------------------------------------------------------------------------

TEST(Validation, MissingInputIsRejected) {
  Graph g = affine_graph();
  auto be = clear_backend(4);
  try {
    execute(g, {}, *be, {});
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation);
    EXPECT_NE(std::string(e.what()).find("no input bound for parameter 'x'"), std::string::npos);
  }
}

TEST(Validation, RankAndExtentMismatchesAreRejected) {
  Graph g = affine_graph();
  auto be = clear_backend(4);
  try {
    execute(g, {{"x", Tensor(TensorShape({2}), {1.0, 2.0})}}, *be, {});
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation);
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
  try {
    execute(g, {{"x", Tensor(TensorShape({2, 5}), std::vector<double>(10, 0.0))}}, *be, {});
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation);
    EXPECT_NE(std::string(e.what()).find("non-batch extents"), std::string::npos);
  }
}

TEST(Validation, InputsMustShareTheBatchExtent) {
  Graph g("two");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_param("y", {1, 2}));
  g.add_node(make_op("sum", OpKind::Add, {"x", "y"}));
  g.set_outputs({"sum"});

  auto be = clear_backend(3);
  std::map<std::string, Tensor> inputs{
      {"x", Tensor(TensorShape({2, 2}), {1, 2, 3, 4})},
      {"y", Tensor(TensorShape({3, 2}), {1, 2, 3, 4, 5, 6})},
  };
  try {
    execute(g, inputs, *be, {});
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation);
    EXPECT_NE(std::string(e.what()).find("batch extent"), std::string::npos);
  }
}

TEST(Validation, BatchBeyondSlotCapacityIsRejected) {
  Graph g("big");
  g.add_node(make_param("x", {1, 1}));
  g.add_node(make_op("neg", OpKind::Negate, {"x"}));
  g.set_outputs({"neg"});

  auto be = clear_backend(3);  // N = 1024 -> 512 slots
  Tensor too_big(TensorShape({513, 1}));
  try {
    execute(g, {{"x", too_big}}, *be, {});
    FAIL() << "expected a capacity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::capacity);
  }
}

TEST(Admission, DepthBeyondBudgetFailsUpFrontNamingTheCriticalPath) {
  Graph g = mini_network_graph();  // depth 5
  auto be = clear_backend(4);      // budget L = 3
  try {
    execute(g, batch_inputs(g, 1, 1), *be, {});
    FAIL() << "expected a depth error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::depth_exceeded);
    const std::string what = e.what();
    EXPECT_NE(what.find("depth 5"), std::string::npos);
    EXPECT_NE(what.find("L=3"), std::string::npos);
    EXPECT_NE(what.find("critical path"), std::string::npos);
    EXPECT_NE(what.find("conv"), std::string::npos);
    EXPECT_NE(what.find("fc2"), std::string::npos);
  }
}

TEST(Admission, MultiplyShortcutsWidenTheAdmissibleDepth) {
  // x · (-I) · W: two charged multiplies normally, one when the sign flip is
  // known to be free.
  Graph g("signed");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("sign", Tensor(TensorShape({2, 2}), {-1.0, 0.0, 0.0, -1.0})));
  g.add_node(make_const("w", Tensor(TensorShape({2, 2}), {0.5, 0.25, -0.3, 0.4})));
  g.add_node(make_op("flip", OpKind::Dot, {"x", "sign"}));
  g.add_node(make_op("scale", OpKind::Dot, {"flip", "w"}));
  g.set_outputs({"scale"});

  auto inputs = batch_inputs(g, 2, 4);
  Tensor oracle = evaluate(g, inputs)[0];

  // L = 1 budget admits the graph only with the shortcut admission
  {
    auto be = ckks_backend(2);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_LT(max_relative_error(r.outputs.at("scale"), oracle), 1e-3);
  }
  {
    auto be = ckks_backend(2);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    opts.bypass.optimized_multiply = false;
    EXPECT_THROW(execute(g, inputs, *be, opts), Error);
  }
  // under the model-encrypting paradigm the sign constants are ciphertexts,
  // so the shortcut admission must not apply even with the toggle on
  {
    auto be = ckks_backend(2);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedModel;
    try {
      execute(g, inputs, *be, opts);
      FAIL() << "expected a depth error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::depth_exceeded);
    }
  }
}

TEST(Admission, AvgPoolConsumesALevelScaledMeanPoolDoesNot) {
  auto make_pool_graph = [](OpKind pool) {
    Graph g("pool");
    g.add_node(make_param("x", {1, 1, 2, 2}));
    g.add_node(make_op("pool", pool, {"x"},
                       {{"window", std::vector<int64_t>{2, 2}}, {"stride", int64_t{2}}}));
    g.add_node(make_const("w", Tensor(TensorShape({1, 1, 1}), {0.5})));
    g.add_node(make_op("bw", OpKind::Broadcast, {"w"},
                       {{"shape", std::vector<int64_t>{-1, 1, 1, 1}}, {"axes", std::vector<int64_t>{0}}}));
    g.add_node(make_op("scale", OpKind::Multiply, {"pool", "bw"}));
    g.set_outputs({"scale"});
    return g;
  };
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 1, 2, 2}), {1.0, 2.0, 3.0, 4.0})}};

  // L = 1: the scaled mean pool leaves the level for the multiply ...
  {
    auto be = ckks_backend(2);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    ExecResult r = execute(make_pool_graph(OpKind::ScaledMeanPool), inputs, *be, opts);
    EXPECT_NEAR(r.outputs.at("scale").at(0), 5.0, 1e-3);
  }
  // ... while the averaging pool needs one of its own
  {
    auto be = ckks_backend(2);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    try {
      execute(make_pool_graph(OpKind::AvgPool), inputs, *be, opts);
      FAIL() << "expected a depth error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::depth_exceeded);
    }
  }
  // with two levels both run and agree with the reference values
  {
    auto be = ckks_backend(3);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    ExecResult r = execute(make_pool_graph(OpKind::AvgPool), inputs, *be, opts);
    EXPECT_NEAR(r.outputs.at("scale").at(0), 1.25, 1e-3);
  }
}

TEST(Validation, BatchAxisStructuralOpsAreRejected) {
  auto be = clear_backend(3);
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 3}), {1, 2, 3, 4, 5, 6})}};

  {
    Graph g("sum0");
    g.add_node(make_param("x", {1, 3}));
    g.add_node(make_op("sum", OpKind::Sum, {"x"}, {{"axes", std::vector<int64_t>{0}}}));
    g.set_outputs({"sum"});
    ExecOptions opts;
    opts.paradigm = Paradigm::PlainDebug;
    try {
      execute(g, inputs, *be, opts);
      FAIL() << "expected a validation error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), errc::validation);
      EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
    }
  }
  {
    Graph g("rev0");
    g.add_node(make_param("x", {1, 3}));
    g.add_node(make_op("rev", OpKind::Reverse, {"x"}, {{"axes", std::vector<int64_t>{0}}}));
    g.set_outputs({"rev"});
    ExecOptions opts;
    opts.paradigm = Paradigm::PlainDebug;
    EXPECT_THROW(execute(g, inputs, *be, opts), Error);
  }
}

TEST(Validation, BatchedMatrixOperandIsRejected) {
  Graph g("dotparam");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_param("y", {2, 2}));
  g.add_node(make_op("dot", OpKind::Dot, {"x", "y"}));
  g.set_outputs({"dot"});

  auto be = clear_backend(3);
  std::map<std::string, Tensor> inputs{
      {"x", Tensor(TensorShape({2, 2}), {1, 2, 3, 4})},
      {"y", Tensor(TensorShape({2, 2}), {1, 0, 0, 1})},
  };
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  try {
    execute(g, inputs, *be, opts);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::validation);
  }
}

//-----------------------------------------------------------------------------
// Structural ops on encrypted tensors.
//-----------------------------------------------------------------------------

TEST(Structural, PadSliceReverseOnCiphertexts) {
  Graph g("struct");
  g.add_node(make_param("x", {1, 2, 3}));
  g.add_node(make_op("pad", OpKind::Pad, {"x"},
                     {{"pad_below", std::vector<int64_t>{0, 1, 0}},
                      {"pad_above", std::vector<int64_t>{0, 0, 1}},
                      {"value", 0.5}}));
  g.add_node(make_op("slice", OpKind::Slice, {"pad"},
                     {{"begin", std::vector<int64_t>{0, 0, 1}},
                      {"end", std::vector<int64_t>{2, 3, 4}}}));
  g.add_node(make_op("rev", OpKind::Reverse, {"slice"}, {{"axes", std::vector<int64_t>{2}}}));
  g.set_outputs({"rev"});

  auto inputs = batch_inputs(g, 2, 21);
  Tensor oracle = evaluate(g, inputs)[0];
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);
  EXPECT_LT(max_relative_error(r.outputs.at("rev"), oracle), 1e-3);
}

TEST(Structural, ConcatSumBroadcastOnCiphertexts) {
  Graph g("struct2");
  g.add_node(make_param("x", {1, 2, 3}));
  g.add_node(make_op("cat", OpKind::Concat, {"x", "x"}, {{"axis", int64_t{1}}}));
  g.add_node(make_op("total", OpKind::Sum, {"cat"}, {{"axes", std::vector<int64_t>{1}}}));
  g.add_node(make_op("wide", OpKind::Broadcast, {"total"},
                     {{"shape", std::vector<int64_t>{-1, 2, 3}}, {"axes", std::vector<int64_t>{1}}}));
  g.add_node(make_op("diff", OpKind::Subtract, {"wide", "x"}));
  g.set_outputs({"diff"});

  auto inputs = batch_inputs(g, 2, 33);
  Tensor oracle = evaluate(g, inputs)[0];
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);
  EXPECT_LT(max_relative_error(r.outputs.at("diff"), oracle), 1e-3);
}

TEST(Structural, PoolWindowsMatchTheWorkedExample) {
  // the worked 2x2 example: mean 2.5, scaled mean 10
  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({1, 1, 2, 2}), {1.0, 2.0, 3.0, 4.0})}};
  for (auto [pool, expected] : std::vector<std::pair<OpKind, double>>{
           {OpKind::AvgPool, 2.5}, {OpKind::ScaledMeanPool, 10.0}}) {
    Graph g("pool");
    g.add_node(make_param("x", {1, 1, 2, 2}));
    g.add_node(make_op("pool", pool, {"x"},
                       {{"window", std::vector<int64_t>{2, 2}}, {"stride", int64_t{2}}}));
    g.set_outputs({"pool"});
    auto be = ckks_backend(3);
    ExecOptions opts;
    opts.paradigm = Paradigm::EncryptedData;
    ExecResult r = execute(g, inputs, *be, opts);
    EXPECT_NEAR(r.outputs.at("pool").at(0), expected, 1e-3);
  }
}

TEST(Structural, ConstantOnlyOutputsStayExact) {
  Graph g("constpath");
  g.add_node(make_param("x", {1, 2}));
  g.add_node(make_const("c", Tensor(TensorShape({2}), {2.0, 3.0})));
  g.add_node(make_op("negc", OpKind::Negate, {"c"}));
  g.add_node(make_op("bneg", OpKind::Broadcast, {"negc"},
                     {{"shape", std::vector<int64_t>{-1, 2}}, {"axes", std::vector<int64_t>{0}}}));
  g.add_node(make_op("sum", OpKind::Add, {"x", "bneg"}));
  g.set_outputs({"sum", "negc"});

  std::map<std::string, Tensor> inputs{{"x", Tensor(TensorShape({2, 2}), {1, 2, 3, 4})}};
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  // the constant-only branch never touches the scheme
  EXPECT_EQ(r.outputs.at("negc").values(), (std::vector<double>{-2.0, -3.0}));
  Tensor oracle = evaluate(g, inputs)[0];
  EXPECT_LT(max_relative_error(r.outputs.at("sum"), oracle), 1e-3);
}

//-----------------------------------------------------------------------------
// Polynomial activation coefficient paths.
//-----------------------------------------------------------------------------

TEST(PolyAct, CoefficientPathsMatchTheEvaluator) {
  struct Case {
    double a, b, c;
    int primes;
  };
  const std::vector<Case> cases = {
      {1.0, 0.0, 0.0, 3},    // pure square
      {1.0, 1.0, 1.0, 3},    // square + linear + constant at one level
      {-1.0, 0.5, -0.25, 3},  // negated square
      {0.5, -0.3, 0.2, 4},   // general quadratic needs an extra level
      {0.0, 0.5, 2.0, 3},    // affine
      {0.0, -1.0, 1.0, 3},   // negation plus constant
      {0.0, 1.0, 0.0, 3},    // identity
      {0.0, 0.0, 3.0, 3},    // constant function
  };
  for (const Case& kase : cases) {
    Graph g("poly");
    g.add_node(make_param("x", {1, 3}));
    g.add_node(make_op("act", OpKind::PolyAct, {"x"}, {{"a", kase.a}, {"b", kase.b}, {"c", kase.c}}));
    g.set_outputs({"act"});

    auto inputs = batch_inputs(g, 2, 55);
    Tensor oracle = evaluate(g, inputs)[0];
    for (Paradigm p : {Paradigm::EncryptedData, Paradigm::PlainDebug}) {
      auto be = ckks_backend(kase.primes);
      ExecOptions opts;
      opts.paradigm = p;
      ExecResult r = execute(g, inputs, *be, opts);
      EXPECT_LT(max_relative_error(r.outputs.at("act"), oracle), 1e-2)
          << "a=" << kase.a << " b=" << kase.b << " c=" << kase.c << " paradigm " << paradigm_name(p);
    }
  }
}

TEST(PolyAct, BatchNormOnRawDataUnderEncryptedModel) {
  Graph g("bnraw");
  g.add_node(make_param("x", {1, 2, 2}));
  g.add_node(make_const("gamma", Tensor(TensorShape({2}), {1.5, 0.7})));
  g.add_node(make_const("beta", Tensor(TensorShape({2}), {0.2, -0.3})));
  g.add_node(make_const("mean", Tensor(TensorShape({2}), {0.1, 0.0})));
  g.add_node(make_const("variance", Tensor(TensorShape({2}), {1.2, 0.8})));
  g.add_node(make_op("bn", OpKind::BatchNormInference, {"x", "gamma", "beta", "mean", "variance"},
                     {{"epsilon", 1e-5}}));
  g.set_outputs({"bn"});

  auto inputs = batch_inputs(g, 3, 44);
  Tensor oracle = evaluate(g, inputs)[0];
  auto be = ckks_backend(3);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedModel;
  ExecResult r = execute(g, inputs, *be, opts);
  EXPECT_LT(max_relative_error(r.outputs.at("bn"), oracle), 1e-2);
  EXPECT_EQ(r.profile.ct_ops.mul_pt, 4);
  EXPECT_EQ(r.profile.ct_ops.add, 4);
}

//-----------------------------------------------------------------------------
// Peak element accounting and wall-time bookkeeping.
//-----------------------------------------------------------------------------

TEST(Profile, TracksPeakElementsAndPerNodeWalls) {
  Graph g = affine_graph();
  auto inputs = batch_inputs(g, 2, 9);
  auto be = ckks_backend(4);
  ExecOptions opts;
  opts.paradigm = Paradigm::EncryptedData;
  ExecResult r = execute(g, inputs, *be, opts);

  // x holds 4 handles and the dot output 3 before x is released
  EXPECT_GE(r.profile.peak_elements, 7);
  for (const char* id : {"x", "dot", "sum", "act"})
    EXPECT_TRUE(r.profile.wall_ms.count(id)) << "missing wall time for " << id;
  double total = 0.0;
  for (const auto& [id, ms] : r.profile.wall_ms) {
    EXPECT_GE(ms, 0.0) << id;
    total += ms;
  }
  EXPECT_NEAR(r.profile.total_wall_ms, total, 1e-6);
}
