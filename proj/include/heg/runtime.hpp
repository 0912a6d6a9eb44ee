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

#pragma once

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "heg/backend.hpp"
#include "heg/common.hpp"
#include "heg/eval.hpp"
#include "heg/graph.hpp"
#include "heg/packing.hpp"
#include "heg/passes.hpp"
#include "heg/tensor.hpp"

namespace heg {

/*! \brief Which side of the computation is encrypted.
 *
 * EncryptedData encrypts the tensors bound to Parameter nodes and encodes
 * Constant nodes as plaintext; EncryptedModel is the reverse (constants are
 * encrypted, bound data stays in the clear); EncryptedBoth encrypts both
 * sides; PlainDebug runs everything through scheme plaintexts so that level
 * and scale bookkeeping is exercised without any encryption.
 */
enum class Paradigm { EncryptedData, EncryptedModel, EncryptedBoth, PlainDebug };

inline const char* paradigm_name(Paradigm p) {
  switch (p) {
    case Paradigm::EncryptedData:
      return "encrypted-data";
    case Paradigm::EncryptedModel:
      return "encrypted-model";
    case Paradigm::EncryptedBoth:
      return "encrypted-both";
    case Paradigm::PlainDebug:
      return "plain-debug";
  }
  return "encrypted-data";
}

inline Paradigm parse_paradigm(const std::string& name) {
  if (name == "encrypted-data" || name == "EncryptedData") return Paradigm::EncryptedData;
  if (name == "encrypted-model" || name == "EncryptedModel") return Paradigm::EncryptedModel;
  if (name == "encrypted-both" || name == "EncryptedBoth") return Paradigm::EncryptedBoth;
  if (name == "plain-debug" || name == "PlainDebug") return Paradigm::PlainDebug;
  fail(errc::validation, "unknown paradigm '" + name +
                             "' (expected encrypted-data, encrypted-model, encrypted-both, or plain-debug)");
}

/*! \brief Toggles for the special-plaintext shortcuts.
 *
 * `optimized_multiply` short-circuits multiplications by plaintext constants
 * that classify as 0, 1, or -1; `optimized_addition` skips additions of
 * plaintext zeros. `epsilon` widens the classification buckets (exact
 * comparison by default). The two toggles are independent.
 */
struct BypassConfig {
  bool optimized_multiply = true;
  bool optimized_addition = true;
  double epsilon = 0.0;
};

//! What an operation against a classified plaintext constant reduces to.
enum class BypassAction { Proceed, ReturnUnchanged, FreshZero, Negate };

/*! \brief Decide how an op with one classified plaintext-constant operand
 * short-circuits. Multiplicative ops map 1 to the untouched ciphertext, 0 to
 * a fresh encryption of zero at the same level, and -1 to a negation;
 * additive ops skip a zero addend. Everything else proceeds normally.
 */
inline BypassAction apply_bypass(OpKind op, SpecialValue cls, const BypassConfig& cfg) {
  switch (op) {
    case OpKind::Add:
    case OpKind::Subtract:
      if (cfg.optimized_addition && cls == SpecialValue::Zero) return BypassAction::ReturnUnchanged;
      return BypassAction::Proceed;
    case OpKind::Multiply:
    case OpKind::Dot:
    case OpKind::Convolution:
      if (!cfg.optimized_multiply) return BypassAction::Proceed;
      switch (cls) {
        case SpecialValue::One:
          return BypassAction::ReturnUnchanged;
        case SpecialValue::Zero:
          return BypassAction::FreshZero;
        case SpecialValue::MinusOne:
          return BypassAction::Negate;
        case SpecialValue::General:
          return BypassAction::Proceed;
      }
      return BypassAction::Proceed;
    default:
      return BypassAction::Proceed;
  }
}

//! Multiplications and additions avoided by the special-value shortcuts.
struct BypassCounts {
  std::int64_t mult = 0;
  std::int64_t add = 0;
};

//! Ciphertext operations actually performed (plaintext-only ops not included).
struct CipherOpCounts {
  std::int64_t add = 0;
  std::int64_t mul_ct = 0;
  std::int64_t mul_pt = 0;
  std::int64_t negate = 0;
};

/*! \brief Execution profile: per-node wall times, bypass counts, ciphertext
 * op counts, and the peak number of live packed elements. */
struct ExecProfile {
  std::map<std::string, double> wall_ms;
  BypassCounts bypass;
  CipherOpCounts ct_ops;
  std::int64_t peak_elements = 0;
  double total_wall_ms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json wall = nlohmann::json::object();
    for (const auto& [id, ms] : wall_ms) wall[id] = ms;
    return nlohmann::json{
        {"wall_ms", wall},
        {"bypass", {{"mult", bypass.mult}, {"add", bypass.add}}},
        {"ct_ops",
         {{"add", ct_ops.add}, {"mul_ct", ct_ops.mul_ct}, {"mul_pt", ct_ops.mul_pt}, {"negate", ct_ops.negate}}}};
  }
};

struct ExecOptions {
  Paradigm paradigm = Paradigm::EncryptedData;
  BypassConfig bypass;
  unsigned threads = 1;
  std::uint64_t seed = 1;
};

struct ExecResult {
  std::map<std::string, Tensor> outputs;
  ExecProfile profile;
};

namespace detail {

/*! \brief A node's value during execution.
 *
 * Exactly one storage is populated. `raw` holds plain numbers that have not
 * been bound to the scheme yet (constants, and the unencrypted data path of
 * EncryptedModel); `plain`/`cipher` hold one handle per non-batch element,
 * the batch riding in the slots when `batched` is set.
 */
struct ExecValue {
  TensorShape shape;  //!< full logical shape, batch first when batched
  bool batched = false;
  bool from_constants = false;  //!< derived exclusively from Constant nodes
  std::shared_ptr<const Tensor> raw;
  std::vector<PlaintextPtr> plain;
  std::vector<CiphertextPtr> cipher;

  bool is_raw() const { return raw != nullptr; }
  bool is_plain() const { return !plain.empty(); }
  bool is_cipher() const { return !cipher.empty(); }
  std::int64_t handle_count() const { return static_cast<std::int64_t>(plain.size() + cipher.size()); }
};

//! The non-batch part of a full logical shape.
inline TensorShape element_space(const TensorShape& full, bool batched) {
  if (!batched) return full;
  std::vector<std::int64_t> dims;
  for (size_t a = 1; a < full.rank(); ++a) dims.push_back(full.dim(a));
  return TensorShape(dims);
}

class Executor {
 public:
  Executor(const Graph& graph, HEBackend& backend, const ExecOptions& opts)
      : m_graph(graph), m_backend(backend), m_opts(opts), m_rng(opts.seed) {}

  ExecResult run(const std::map<std::string, Tensor>& inputs) {
    resolve_batch(inputs);
    validate_parameters(inputs);
    admit_depth();
    count_uses();

    for (const auto& id : toposort(m_graph)) {
      const Node& node = m_graph.node(id);
      const auto t0 = std::chrono::steady_clock::now();
      if (node.op == OpKind::Parameter) {
        store(id, bind_parameter(node, inputs.at(id)));
      } else {
        std::vector<const ExecValue*> in;
        std::vector<const std::string*> in_ids;
        in.reserve(node.inputs.size());
        for (const auto& input : node.inputs) {
          in.push_back(&m_values.at(input));
          in_ids.push_back(&input);
        }
        store(id, exec_node(node, in, in_ids));
        release_inputs(node);
      }
      const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
      m_profile.wall_ms[id] += dt.count();
      m_profile.total_wall_ms += dt.count();
    }

    ExecResult result;
    for (const auto& id : m_graph.outputs()) {
      auto it = m_values.find(id);
      check(it != m_values.end(), errc::internal, "output value was not retained");
      result.outputs.emplace(id, value_to_tensor(it->second));
    }
    result.profile = std::move(m_profile);
    return result;
  }

 private:
  // ---- plumbing -------------------------------------------------------------

  const Graph& m_graph;
  HEBackend& m_backend;
  ExecOptions m_opts;
  Rng m_rng;
  std::int64_t m_batch = 1;
  std::map<std::string, ExecValue> m_values;
  std::map<std::string, std::int64_t> m_uses;
  std::map<std::string, std::vector<CiphertextPtr>> m_const_cipher;
  ExecProfile m_profile;
  std::int64_t m_live = 0;

  bool constants_stay_plain() const {
    return m_opts.paradigm == Paradigm::EncryptedData || m_opts.paradigm == Paradigm::PlainDebug;
  }

  int top_level() const { return m_backend.context().max_level(); }
  double default_scale() const { return m_backend.context().default_scale(); }

  void resolve_batch(const std::map<std::string, Tensor>& inputs) {
    std::int64_t batch_extent = 0;
    for (const auto& [name, bound] : inputs) {
      (void)name;
      if (bound.shape().rank() == 0) continue;
      if (batch_extent == 0)
        batch_extent = bound.shape().dim(0);
      else if (bound.shape().dim(0) != batch_extent)
        fail(errc::validation, "inputs disagree on the batch extent");
    }
    m_batch = batch_extent > 0 ? batch_extent : 1;
    require_batch_fits(m_backend, m_batch);
  }

  void validate_parameters(const std::map<std::string, Tensor>& inputs) const {
    for (const auto& [node_id, node] : m_graph.nodes()) {
      (void)node_id;
      if (node.op != OpKind::Parameter) continue;
      auto it = inputs.find(node.id);
      if (it == inputs.end()) fail(errc::validation, "no input bound for parameter '" + node.id + "'");
      const Tensor& bound = it->second;
      std::vector<std::int64_t> declared = attr_ints(node, "shape");
      if (bound.shape().rank() != declared.size())
        fail(errc::validation, "input for '" + node.id + "' has rank " + std::to_string(bound.shape().rank()) +
                                   ", parameter declares " + std::to_string(declared.size()));
      for (size_t a = 1; a < declared.size(); ++a)
        if (bound.shape().dim(a) != declared[a])
          fail(errc::validation, "input for '" + node.id + "' shape " + bound.shape().to_string() +
                                     " mismatches the declared non-batch extents");
    }
  }

  //! Reject graphs that cannot finish within the modulus chain before any
  //! encryption or encoding happens.
  void admit_depth() const {
    const bool aware = m_opts.bypass.optimized_multiply && constants_stay_plain();
    const DepthReport depth = depth_analysis(m_graph, aware);
    const std::int64_t budget = top_level();
    if (depth.total > budget) {
      std::string path;
      for (size_t i = 0; i < depth.critical_path.size(); ++i) {
        if (i > 0) path += " -> ";
        path += depth.critical_path[i];
      }
      fail(errc::depth_exceeded, "graph multiplicative depth " + std::to_string(depth.total) +
                                     " exceeds the context budget L=" + std::to_string(budget) +
                                     "; critical path: " + path);
    }
  }

  void count_uses() {
    for (const auto& [node_id, node] : m_graph.nodes()) {
      (void)node_id;
      for (const auto& input : node.inputs) ++m_uses[input];
    }
    for (const auto& id : m_graph.outputs()) ++m_uses[id];
  }

  void store(const std::string& id, ExecValue v) {
    m_live += v.handle_count();
    m_profile.peak_elements = std::max(m_profile.peak_elements, m_live);
    m_values.insert_or_assign(id, std::move(v));
  }

  void release_inputs(const Node& node) {
    for (const auto& input : node.inputs) {
      auto it = m_uses.find(input);
      if (it == m_uses.end()) continue;
      if (--(it->second) > 0) continue;
      auto vt = m_values.find(input);
      if (vt != m_values.end()) {
        m_live -= vt->second.handle_count();
        m_values.erase(vt);
      }
      m_const_cipher.erase(input);
      m_uses.erase(it);
    }
  }

  // ---- materialization ------------------------------------------------------

  ExecValue bind_parameter(const Node& node, const Tensor& bound) {
    ExecValue v;
    v.shape = bound.shape();
    v.batched = bound.shape().rank() > 0;
    v.from_constants = false;
    switch (m_opts.paradigm) {
      case Paradigm::EncryptedData:
      case Paradigm::EncryptedBoth: {
        Rng rng = m_rng.fork("inputs").fork(node.id);
        CipherTensor packed = pack_cipher(m_backend, bound, top_level(), default_scale(), rng, m_opts.threads);
        v.cipher = std::move(packed.elements);
        break;
      }
      case Paradigm::EncryptedModel:
        v.raw = std::make_shared<Tensor>(bound);
        break;
      case Paradigm::PlainDebug: {
        PlainTensor packed = pack_plain(m_backend, bound, top_level(), default_scale(), m_opts.threads);
        v.plain = std::move(packed.elements);
        break;
      }
    }
    return v;
  }

  //! How an operand participates in a kernel.
  enum class Side { Cipher, Plain, Numbers };

  Side side_of(const ExecValue& v) const {
    if (v.is_cipher()) return Side::Cipher;
    if (v.is_plain()) return Side::Plain;
    return (v.from_constants && !constants_stay_plain()) ? Side::Cipher : Side::Numbers;
  }

  //! Plain numbers viewed from a consumer that iterates `m` packed elements:
  //! either one scalar per element or one batch column per element.
  struct RawView {
    const Tensor* t = nullptr;
    bool column = false;
  };

  RawView raw_view(const ExecValue& v, std::int64_t m) const {
    check(v.is_raw(), errc::internal, "raw view of a bound value");
    const std::int64_t count = v.raw->shape().element_count();
    if (count == m) return RawView{v.raw.get(), false};
    if (count == m_batch * m) return RawView{v.raw.get(), true};
    fail(errc::validation, "plain operand of shape " + v.raw->shape().to_string() + " cannot align with " +
                               std::to_string(m) + " packed elements");
  }

  SpecialValue classify_scalar(double v) const {
    const double eps = m_opts.bypass.epsilon;
    if (std::abs(v) <= eps) return SpecialValue::Zero;
    if (std::abs(v - 1.0) <= eps) return SpecialValue::One;
    if (std::abs(v + 1.0) <= eps) return SpecialValue::MinusOne;
    return SpecialValue::General;
  }

  SpecialValue classify_payload(const RawView& rv, std::int64_t e) const {
    if (!rv.column) return classify_scalar(rv.t->values()[static_cast<size_t>(e)]);
    return classify_special(batch_column(*rv.t, e), m_opts.bypass.epsilon);
  }

  PlaintextPtr encode_raw(const RawView& rv, std::int64_t e, int level, double scale) const {
    if (rv.column) return m_backend.encode(batch_column(*rv.t, e), level, scale);
    return m_backend.encode_constant(rv.t->values()[static_cast<size_t>(e)], level, scale);
  }

  //! Ciphertext handles for an operand, lazily encrypting plaintext constants
  //! under the model-encrypting paradigms. Cached per producing node so reuse
  //! (convolution windows, repeated consumers) pays for one encryption.
  const std::vector<CiphertextPtr>& cipher_handles(const ExecValue& v, const std::string& id, std::int64_t m) {
    if (v.is_cipher()) {
      check(v.handle_count() == m, errc::validation,
            "a batch-packed tensor cannot be used where " + std::to_string(m) + " independent elements are expected");
      return v.cipher;
    }
    check(v.is_raw(), errc::internal, "cipher handles of a scheme-plaintext value");
    const std::string key = id + "#" + std::to_string(m);
    auto it = m_const_cipher.find(key);
    if (it != m_const_cipher.end()) return it->second;
    const RawView rv = raw_view(v, m);
    std::vector<CiphertextPtr> handles(static_cast<size_t>(m));
    Rng rng = m_rng.fork("constants").fork(key);
    for (std::int64_t e = 0; e < m; ++e) {
      PlaintextPtr pt = encode_raw(rv, e, top_level(), default_scale());
      handles[static_cast<size_t>(e)] = m_backend.encrypt(*pt, rng.next());
    }
    return m_const_cipher.emplace(key, std::move(handles)).first->second;
  }

  // ---- shared arithmetic helpers --------------------------------------------

  CiphertextPtr drop_to(const CiphertextPtr& c, int level) const {
    return c->level() == level ? c : m_backend.mod_switch(*c, level);
  }

  PlaintextPtr drop_to_p(const PlaintextPtr& p, int level) const {
    return p->level() == level ? p : m_backend.mod_switch_p(*p, level);
  }

  CiphertextPtr add_aligned(const CiphertextPtr& a, const CiphertextPtr& b, bool subtract) const {
    const int level = std::min(a->level(), b->level());
    const CiphertextPtr xa = drop_to(a, level);
    const CiphertextPtr xb = drop_to(b, level);
    return subtract ? m_backend.sub(*xa, *xb) : m_backend.add(*xa, *xb);
  }

  PlaintextPtr add_aligned_p(const PlaintextPtr& a, const PlaintextPtr& b, bool subtract) const {
    const int level = std::min(a->level(), b->level());
    const PlaintextPtr xa = drop_to_p(a, level);
    const PlaintextPtr xb = drop_to_p(b, level);
    return subtract ? m_backend.sub_pp(*xa, *xb) : m_backend.add_pp(*xa, *xb);
  }

  static int min_level_ct(const std::vector<CiphertextPtr>& handles) {
    int level = INT_MAX;
    for (const auto& h : handles) level = std::min(level, h->level());
    return level;
  }

  static int min_level_pt(const std::vector<PlaintextPtr>& handles) {
    int level = INT_MAX;
    for (const auto& h : handles) level = std::min(level, h->level());
    return level;
  }

  // ---- accumulation (multiply-then-accumulate with per-term shortcuts) ------

  //! Per-output-element classification of the accumulation terms.
  struct TermPlan {
    std::vector<std::int64_t> general;  //!< multiplied for real
    std::vector<std::int64_t> ones;     //!< operand passes through untouched
    std::vector<std::int64_t> negs;     //!< operand passes through negated
    std::vector<std::int64_t> zeros;    //!< fresh zero is materialized and added
    std::int64_t skipped = 0;           //!< zero terms dropped from the sum entirely
  };

  TermPlan plan_terms(const RawView& wv, const std::vector<std::int64_t>& w_elems, bool can_bypass) const {
    TermPlan plan;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(w_elems.size()); ++t) {
      if (!can_bypass) {
        plan.general.push_back(t);
        continue;
      }
      const SpecialValue cls = classify_payload(wv, w_elems[static_cast<size_t>(t)]);
      switch (apply_bypass(OpKind::Multiply, cls, m_opts.bypass)) {
        case BypassAction::Proceed:
          plan.general.push_back(t);
          break;
        case BypassAction::ReturnUnchanged:
          plan.ones.push_back(t);
          break;
        case BypassAction::Negate:
          plan.negs.push_back(t);
          break;
        case BypassAction::FreshZero:
          if (m_opts.bypass.optimized_addition)
            ++plan.skipped;
          else
            plan.zeros.push_back(t);
          break;
      }
    }
    return plan;
  }

  void add_plan_counts(const TermPlan& plan, bool cipher_path) {
    const auto g = static_cast<std::int64_t>(plan.general.size());
    const auto o = static_cast<std::int64_t>(plan.ones.size());
    const auto n = static_cast<std::int64_t>(plan.negs.size());
    const auto z = static_cast<std::int64_t>(plan.zeros.size());
    m_profile.bypass.mult += o + n + z + plan.skipped;
    m_profile.bypass.add += plan.skipped;
    if (cipher_path) {
      m_profile.ct_ops.mul_pt += g;
      m_profile.ct_ops.negate += n;
      const std::int64_t pass = o + n + z;
      m_profile.ct_ops.add += g > 0 ? g - 1 + pass : std::max<std::int64_t>(0, pass - 1);
    }
  }

  //! sum_t xs[t] * w[t] with plaintext weights, following a term plan. The
  //! real products run through one fused weighted sum at the lowest level
  //! among them (weights encoded at the prime-valued operand scale, so the
  //! operand scale survives the rescale); bypassed terms join afterwards,
  //! modulus-switched down to the running level.
  CiphertextPtr acc_cipher_raw(const std::vector<CiphertextPtr>& xs, const TermPlan& plan, const RawView& wv,
                               const std::vector<std::int64_t>& w_elems, Rng elem_rng) const {
    CiphertextPtr product;
    if (!plan.general.empty()) {
      int level = INT_MAX;
      for (std::int64_t t : plan.general) level = std::min(level, xs[static_cast<size_t>(t)]->level());
      const double w_scale = m_backend.operand_scale(level);
      std::vector<CiphertextPtr> gx;
      std::vector<PlaintextPtr> gw;
      gx.reserve(plan.general.size());
      gw.reserve(plan.general.size());
      for (std::int64_t t : plan.general) {
        gx.push_back(drop_to(xs[static_cast<size_t>(t)], level));
        gw.push_back(encode_raw(wv, w_elems[static_cast<size_t>(t)], level, w_scale));
      }
      product = m_backend.weighted_sum(gx, gw);
    }
    std::vector<CiphertextPtr> pass;
    pass.reserve(plan.ones.size() + plan.negs.size() + plan.zeros.size());
    for (std::int64_t t : plan.ones) pass.push_back(xs[static_cast<size_t>(t)]);
    for (std::int64_t t : plan.negs) pass.push_back(m_backend.negate(*xs[static_cast<size_t>(t)]));
    for (std::int64_t t : plan.zeros) {
      const CiphertextPtr& x = xs[static_cast<size_t>(t)];
      pass.push_back(m_backend.encrypt_zero_at(x->level(), x->scale(), elem_rng.next()));
    }
    if (!product && pass.empty()) {
      // every term was skipped: the empty sum is a fresh zero at the inputs' level
      return m_backend.encrypt_zero_at(min_level_ct(xs), xs[0]->scale(), elem_rng.next());
    }
    int level = product ? product->level() : INT_MAX;
    for (const auto& h : pass) level = std::min(level, h->level());
    CiphertextPtr sum = product ? drop_to(product, level) : nullptr;
    for (const auto& h : pass) {
      CiphertextPtr hh = drop_to(h, level);
      sum = sum ? m_backend.add(*sum, *hh) : std::move(hh);
    }
    return sum;
  }

  PlaintextPtr acc_plain_raw(const std::vector<PlaintextPtr>& xs, const TermPlan& plan, const RawView& wv,
                             const std::vector<std::int64_t>& w_elems) const {
    PlaintextPtr product;
    if (!plan.general.empty()) {
      int level = INT_MAX;
      for (std::int64_t t : plan.general) level = std::min(level, xs[static_cast<size_t>(t)]->level());
      const double w_scale = m_backend.operand_scale(level);
      std::vector<PlaintextPtr> gx;
      std::vector<PlaintextPtr> gw;
      gx.reserve(plan.general.size());
      gw.reserve(plan.general.size());
      for (std::int64_t t : plan.general) {
        gx.push_back(drop_to_p(xs[static_cast<size_t>(t)], level));
        gw.push_back(encode_raw(wv, w_elems[static_cast<size_t>(t)], level, w_scale));
      }
      product = m_backend.weighted_sum_plain(gx, gw);
    }
    std::vector<PlaintextPtr> pass;
    pass.reserve(plan.ones.size() + plan.negs.size() + plan.zeros.size());
    for (std::int64_t t : plan.ones) pass.push_back(xs[static_cast<size_t>(t)]);
    for (std::int64_t t : plan.negs) pass.push_back(m_backend.negate_p(*xs[static_cast<size_t>(t)]));
    for (std::int64_t t : plan.zeros) {
      const PlaintextPtr& x = xs[static_cast<size_t>(t)];
      pass.push_back(m_backend.encode_constant(0.0, x->level(), x->scale()));
    }
    if (!product && pass.empty())
      return m_backend.encode_constant(0.0, min_level_pt(xs), xs[0]->scale());
    int level = product ? product->level() : INT_MAX;
    for (const auto& h : pass) level = std::min(level, h->level());
    PlaintextPtr sum = product ? drop_to_p(product, level) : nullptr;
    for (const auto& h : pass) {
      PlaintextPtr hh = drop_to_p(h, level);
      sum = sum ? m_backend.add_pp(*sum, *hh) : std::move(hh);
    }
    return sum;
  }

  CiphertextPtr acc_cipher_cipher(const std::vector<CiphertextPtr>& xs, const std::vector<CiphertextPtr>& ws) const {
    const int level = std::min(min_level_ct(xs), min_level_ct(ws));
    std::vector<CiphertextPtr> gx;
    std::vector<CiphertextPtr> gw;
    gx.reserve(xs.size());
    gw.reserve(ws.size());
    for (const auto& x : xs) gx.push_back(drop_to(x, level));
    for (const auto& w : ws) gw.push_back(drop_to(w, level));
    return m_backend.weighted_sum_cipher(gx, gw);
  }

  PlaintextPtr acc_plain_plain(const std::vector<PlaintextPtr>& xs, const std::vector<PlaintextPtr>& ws) const {
    const int level = std::min(min_level_pt(xs), min_level_pt(ws));
    std::vector<PlaintextPtr> gx;
    std::vector<PlaintextPtr> gw;
    gx.reserve(xs.size());
    gw.reserve(ws.size());
    for (const auto& x : xs) gx.push_back(drop_to_p(x, level));
    for (const auto& w : ws) gw.push_back(drop_to_p(w, level));
    return m_backend.weighted_sum_plain(gx, gw);
  }

  // ---- node dispatch ---------------------------------------------------------

  ExecValue exec_node(const Node& node, const std::vector<const ExecValue*>& in,
                      const std::vector<const std::string*>& ids) {
    if (node.op == OpKind::Constant) {
      ExecValue v;
      v.shape = node.data->shape();
      v.from_constants = true;
      v.raw = std::shared_ptr<const Tensor>(std::shared_ptr<const void>(), &*node.data);
      return v;
    }

    bool all_raw = true;
    bool any_const = false;
    bool all_const = true;
    for (const ExecValue* v : in) {
      all_raw = all_raw && v->is_raw();
      any_const = any_const || v->from_constants;
      all_const = all_const && v->from_constants;
    }
    // Pure number arithmetic: constant subexpressions, and the client-side
    // plain data path of EncryptedModel. A mix of model constants and plain
    // data under a model-encrypting paradigm must not be folded in the clear,
    // so it falls through to the kernels, which encrypt the constant side.
    if (all_raw && !in.empty() && (constants_stay_plain() || all_const || !any_const)) {
      std::vector<const Tensor*> tin;
      tin.reserve(in.size());
      for (const ExecValue* v : in) tin.push_back(v->raw.get());
      ExecValue out;
      Tensor t = eval_node(node, tin, m_batch);
      out.shape = t.shape();
      out.from_constants = all_const;
      bool batched = false;
      for (const ExecValue* v : in) batched = batched || v->batched;
      if (!batched && node.op == OpKind::Broadcast) {
        // inserting the leading axis materializes the batch dimension
        for (std::int64_t ax : attr_ints(node, "axes"))
          if (ax == 0 && out.shape.rank() > 0 && out.shape.dim(0) == m_batch) batched = true;
      }
      out.batched = batched;
      out.raw = std::make_shared<const Tensor>(std::move(t));
      return out;
    }

    std::vector<TensorShape> in_shapes;
    in_shapes.reserve(in.size());
    for (const ExecValue* v : in) in_shapes.push_back(v->shape);
    const TensorShape out_shape = infer_node_shape(node, in_shapes, m_batch);

    switch (node.op) {
      case OpKind::Add:
      case OpKind::Subtract:
        return kernel_add_sub(node, out_shape, *in[0], *ids[0], *in[1], *ids[1], node.op == OpKind::Subtract);
      case OpKind::Multiply:
        return kernel_multiply(node, out_shape, *in[0], *ids[0], *in[1], *ids[1]);
      case OpKind::Negate:
        return kernel_negate(*in[0], *ids[0]);
      case OpKind::Dot:
        return kernel_dot(node, out_shape, *in[0], *ids[0], *in[1], *ids[1]);
      case OpKind::Convolution:
        return kernel_convolution(node, out_shape, *in[0], *ids[0], *in[1], *ids[1]);
      case OpKind::AvgPool:
      case OpKind::ScaledMeanPool:
        return kernel_pool(node, out_shape, *in[0]);
      case OpKind::BatchNormInference:
        return kernel_batch_norm(node, out_shape, in, ids);
      case OpKind::PolyAct:
        return kernel_poly_act(node, out_shape, *in[0]);
      case OpKind::Broadcast:
      case OpKind::Concat:
      case OpKind::Pad:
      case OpKind::Reshape:
      case OpKind::Reverse:
      case OpKind::Slice:
      case OpKind::Sum:
        return kernel_rearrange(node, out_shape, in, ids);
      default:
        fail(errc::internal, "unhandled op kind in the executor");
    }
  }

  // ---- elementwise kernels ---------------------------------------------------

  static std::int64_t space_count(const TensorShape& full, bool batched) {
    return batched ? full.element_count_nonbatch() : full.element_count();
  }

  ExecValue kernel_add_sub(const Node& node, const TensorShape& out_shape, const ExecValue& a,
                           const std::string& a_id, const ExecValue& b, const std::string& b_id, bool subtract) {
    const bool out_batched = a.batched || b.batched;
    const std::int64_t m = space_count(out_shape, out_batched);
    const Side sa = side_of(a);
    const Side sb = side_of(b);
    ExecValue out;
    out.shape = out_shape;
    out.batched = out_batched;

    if (sa == Side::Cipher && sb == Side::Cipher) {
      const bool a_raw = a.is_raw();
      const bool b_raw = b.is_raw();
      check(!(a_raw && b_raw), errc::internal, "constant-only addition should fold in the clear");
      if (a_raw || b_raw) {
        // An encrypted-model constant joins an addition: encrypt it at the
        // exact level and scale of the ciphertext it meets, per element.
        const ExecValue& cv = a_raw ? b : a;
        const ExecValue& rv_v = a_raw ? a : b;
        check(cv.handle_count() == m, errc::internal, "ciphertext operand layout mismatch");
        const RawView rv = raw_view(rv_v, m);
        Rng node_rng = m_rng.fork("addend").fork(node.id);
        m_profile.ct_ops.add += m;
        out.cipher.resize(static_cast<size_t>(m));
        parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
          for (std::int64_t e = lo; e < hi; ++e) {
            const CiphertextPtr& x = cv.cipher[static_cast<size_t>(e)];
            CiphertextPtr k =
                m_backend.encrypt(*encode_raw(rv, e, x->level(), x->scale()), node_rng.fork(e).next());
            if (a_raw)
              out.cipher[static_cast<size_t>(e)] = subtract ? m_backend.sub(*k, *x) : m_backend.add(*k, *x);
            else
              out.cipher[static_cast<size_t>(e)] = subtract ? m_backend.sub(*x, *k) : m_backend.add(*x, *k);
          }
        });
        return out;
      }
      const auto& ca = cipher_handles(a, a_id, m);
      const auto& cb = cipher_handles(b, b_id, m);
      m_profile.ct_ops.add += m;
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e)
          out.cipher[static_cast<size_t>(e)] =
              add_aligned(ca[static_cast<size_t>(e)], cb[static_cast<size_t>(e)], subtract);
      });
      return out;
    }

    if ((sa == Side::Cipher && sb == Side::Numbers) || (sa == Side::Numbers && sb == Side::Cipher)) {
      const bool raw_on_rhs = sb == Side::Numbers;
      const ExecValue& cv = raw_on_rhs ? a : b;
      const std::string& cv_id = raw_on_rhs ? a_id : b_id;
      const ExecValue& rv_v = raw_on_rhs ? b : a;
      const auto& handles = cipher_handles(cv, cv_id, m);
      const RawView rv = raw_view(rv_v, m);
      const bool can_bypass = rv_v.from_constants;
      // ct + 0 and ct - 0 pass through; 0 + ct commutes; 0 - ct must negate.
      std::vector<char> bypassed(static_cast<size_t>(m), 0);
      for (std::int64_t e = 0; e < m; ++e) {
        const bool skippable = can_bypass && (raw_on_rhs || !subtract);
        if (skippable && apply_bypass(node.op, classify_payload(rv, e), m_opts.bypass) ==
                             BypassAction::ReturnUnchanged) {
          bypassed[static_cast<size_t>(e)] = 1;
          ++m_profile.bypass.add;
        } else {
          ++m_profile.ct_ops.add;
          if (!raw_on_rhs && subtract) ++m_profile.ct_ops.negate;
        }
      }
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const CiphertextPtr& x = handles[static_cast<size_t>(e)];
          if (bypassed[static_cast<size_t>(e)]) {
            out.cipher[static_cast<size_t>(e)] = x;
            continue;
          }
          PlaintextPtr pt = encode_raw(rv, e, x->level(), x->scale());
          if (raw_on_rhs)
            out.cipher[static_cast<size_t>(e)] =
                subtract ? m_backend.sub_plain(*x, *pt) : m_backend.add_plain(*x, *pt);
          else if (subtract)
            out.cipher[static_cast<size_t>(e)] = m_backend.add_plain(*m_backend.negate(*x), *pt);
          else
            out.cipher[static_cast<size_t>(e)] = m_backend.add_plain(*x, *pt);
        }
      });
      return out;
    }

    if (sa == Side::Plain && sb == Side::Plain) {
      check(a.handle_count() == m && b.handle_count() == m, errc::internal, "plaintext operand layout mismatch");
      out.plain.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e)
          out.plain[static_cast<size_t>(e)] =
              add_aligned_p(a.plain[static_cast<size_t>(e)], b.plain[static_cast<size_t>(e)], subtract);
      });
      return out;
    }

    if ((sa == Side::Plain && sb == Side::Numbers) || (sa == Side::Numbers && sb == Side::Plain)) {
      const bool raw_on_rhs = sb == Side::Numbers;
      const ExecValue& pv = raw_on_rhs ? a : b;
      const ExecValue& rv_v = raw_on_rhs ? b : a;
      check(pv.handle_count() == m, errc::internal, "plaintext operand layout mismatch");
      const RawView rv = raw_view(rv_v, m);
      const bool can_bypass = rv_v.from_constants;
      std::vector<char> bypassed(static_cast<size_t>(m), 0);
      for (std::int64_t e = 0; e < m; ++e) {
        const bool skippable = can_bypass && (raw_on_rhs || !subtract);
        if (skippable && apply_bypass(node.op, classify_payload(rv, e), m_opts.bypass) ==
                             BypassAction::ReturnUnchanged) {
          bypassed[static_cast<size_t>(e)] = 1;
          ++m_profile.bypass.add;
        }
      }
      out.plain.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const PlaintextPtr& x = pv.plain[static_cast<size_t>(e)];
          if (bypassed[static_cast<size_t>(e)]) {
            out.plain[static_cast<size_t>(e)] = x;
            continue;
          }
          PlaintextPtr pt = encode_raw(rv, e, x->level(), x->scale());
          if (raw_on_rhs)
            out.plain[static_cast<size_t>(e)] = subtract ? m_backend.sub_pp(*x, *pt) : m_backend.add_pp(*x, *pt);
          else if (subtract)
            out.plain[static_cast<size_t>(e)] = m_backend.add_pp(*m_backend.negate_p(*x), *pt);
          else
            out.plain[static_cast<size_t>(e)] = m_backend.add_pp(*x, *pt);
        }
      });
      return out;
    }

    fail(errc::internal, "unsupported operand combination in add/subtract");
  }

  ExecValue kernel_multiply(const Node& node, const TensorShape& out_shape, const ExecValue& a,
                            const std::string& a_id, const ExecValue& b, const std::string& b_id) {
    const bool out_batched = a.batched || b.batched;
    const std::int64_t m = space_count(out_shape, out_batched);
    const Side sa = side_of(a);
    const Side sb = side_of(b);
    ExecValue out;
    out.shape = out_shape;
    out.batched = out_batched;
    Rng node_rng = m_rng.fork("node").fork(node.id);

    if (sa == Side::Cipher && sb == Side::Cipher) {
      const auto& ca = cipher_handles(a, a_id, m);
      const auto& cb = cipher_handles(b, b_id, m);
      const int level = std::min(min_level_ct(ca), min_level_ct(cb));
      m_profile.ct_ops.mul_ct += m;
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e)
          out.cipher[static_cast<size_t>(e)] = m_backend.multiply_rescale(
              *drop_to(ca[static_cast<size_t>(e)], level), *drop_to(cb[static_cast<size_t>(e)], level));
      });
      return out;
    }

    if ((sa == Side::Cipher && sb == Side::Numbers) || (sa == Side::Numbers && sb == Side::Cipher)) {
      const ExecValue& cv = sa == Side::Cipher ? a : b;
      const std::string& cv_id = sa == Side::Cipher ? a_id : b_id;
      const ExecValue& rv_v = sa == Side::Cipher ? b : a;
      const auto& handles = cipher_handles(cv, cv_id, m);
      const RawView rv = raw_view(rv_v, m);
      const bool can_bypass = rv_v.from_constants;
      std::vector<BypassAction> actions(static_cast<size_t>(m), BypassAction::Proceed);
      for (std::int64_t e = 0; e < m; ++e) {
        if (can_bypass) actions[static_cast<size_t>(e)] = apply_bypass(node.op, classify_payload(rv, e), m_opts.bypass);
        switch (actions[static_cast<size_t>(e)]) {
          case BypassAction::Proceed:
            ++m_profile.ct_ops.mul_pt;
            break;
          case BypassAction::ReturnUnchanged:
            ++m_profile.bypass.mult;
            break;
          case BypassAction::Negate:
            ++m_profile.bypass.mult;
            ++m_profile.ct_ops.negate;
            break;
          case BypassAction::FreshZero:
            ++m_profile.bypass.mult;
            break;
        }
      }
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const CiphertextPtr& x = handles[static_cast<size_t>(e)];
          switch (actions[static_cast<size_t>(e)]) {
            case BypassAction::ReturnUnchanged:
              out.cipher[static_cast<size_t>(e)] = x;
              break;
            case BypassAction::Negate:
              out.cipher[static_cast<size_t>(e)] = m_backend.negate(*x);
              break;
            case BypassAction::FreshZero:
              out.cipher[static_cast<size_t>(e)] =
                  m_backend.encrypt_zero_at(x->level(), x->scale(), node_rng.fork(e).next());
              break;
            case BypassAction::Proceed: {
              PlaintextPtr pt = encode_raw(rv, e, x->level(), m_backend.operand_scale(x->level()));
              out.cipher[static_cast<size_t>(e)] = m_backend.multiply_plain_rescale(*x, *pt);
              break;
            }
          }
        }
      });
      return out;
    }

    if (sa == Side::Plain && sb == Side::Plain) {
      check(a.handle_count() == m && b.handle_count() == m, errc::internal, "plaintext operand layout mismatch");
      out.plain.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const PlaintextPtr& x = a.plain[static_cast<size_t>(e)];
          const PlaintextPtr& y = b.plain[static_cast<size_t>(e)];
          const int level = std::min(x->level(), y->level());
          out.plain[static_cast<size_t>(e)] =
              m_backend.rescale_p(*m_backend.multiply_pp(*drop_to_p(x, level), *drop_to_p(y, level)));
        }
      });
      return out;
    }

    if ((sa == Side::Plain && sb == Side::Numbers) || (sa == Side::Numbers && sb == Side::Plain)) {
      const ExecValue& pv = sa == Side::Plain ? a : b;
      const ExecValue& rv_v = sa == Side::Plain ? b : a;
      check(pv.handle_count() == m, errc::internal, "plaintext operand layout mismatch");
      const RawView rv = raw_view(rv_v, m);
      const bool can_bypass = rv_v.from_constants;
      std::vector<BypassAction> actions(static_cast<size_t>(m), BypassAction::Proceed);
      for (std::int64_t e = 0; e < m; ++e) {
        if (can_bypass) actions[static_cast<size_t>(e)] = apply_bypass(node.op, classify_payload(rv, e), m_opts.bypass);
        if (actions[static_cast<size_t>(e)] != BypassAction::Proceed) ++m_profile.bypass.mult;
      }
      out.plain.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const PlaintextPtr& x = pv.plain[static_cast<size_t>(e)];
          switch (actions[static_cast<size_t>(e)]) {
            case BypassAction::ReturnUnchanged:
              out.plain[static_cast<size_t>(e)] = x;
              break;
            case BypassAction::Negate:
              out.plain[static_cast<size_t>(e)] = m_backend.negate_p(*x);
              break;
            case BypassAction::FreshZero:
              out.plain[static_cast<size_t>(e)] = m_backend.encode_constant(0.0, x->level(), x->scale());
              break;
            case BypassAction::Proceed: {
              PlaintextPtr pt = encode_raw(rv, e, x->level(), m_backend.operand_scale(x->level()));
              out.plain[static_cast<size_t>(e)] = m_backend.rescale_p(*m_backend.multiply_pp(*x, *pt));
              break;
            }
          }
        }
      });
      return out;
    }

    fail(errc::internal, "unsupported operand combination in multiply");
  }

  ExecValue kernel_negate(const ExecValue& a, const std::string& a_id) {
    ExecValue out;
    out.shape = a.shape;
    out.batched = a.batched;
    const std::int64_t m = a.handle_count();
    if (a.is_cipher()) {
      m_profile.ct_ops.negate += m;
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e)
          out.cipher[static_cast<size_t>(e)] = m_backend.negate(*a.cipher[static_cast<size_t>(e)]);
      });
      return out;
    }
    if (a.is_plain()) {
      out.plain.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e)
          out.plain[static_cast<size_t>(e)] = m_backend.negate_p(*a.plain[static_cast<size_t>(e)]);
      });
      return out;
    }
    // raw constants under a model-encrypting paradigm: negate homomorphically
    const std::int64_t count = space_count(a.shape, a.batched);
    const auto& handles = cipher_handles(a, a_id, count);
    m_profile.ct_ops.negate += count;
    out.cipher.resize(static_cast<size_t>(count));
    for (std::int64_t e = 0; e < count; ++e)
      out.cipher[static_cast<size_t>(e)] = m_backend.negate(*handles[static_cast<size_t>(e)]);
    return out;
  }

  // ---- multiply-accumulate kernels (dot, convolution) ------------------------

  //! Shared driver for dot products and convolutions: `terms_of` enumerates,
  //! for one output element, the participating (x element, weight element)
  //! pairs. Counting runs sequentially first so that thread scheduling can
  //! never perturb the profile; the value pass then runs element-parallel.
  ExecValue contraction(const Node& node, const TensorShape& out_shape, bool out_batched, const ExecValue& x,
                        const std::string& x_id, std::int64_t x_space, const ExecValue& w, const std::string& w_id,
                        std::int64_t w_space,
                        const std::function<void(std::int64_t, std::vector<std::int64_t>&, std::vector<std::int64_t>&)>&
                            terms_of) {
    const std::int64_t m_out = space_count(out_shape, out_batched);
    const Side sx = side_of(x);
    const Side sw = side_of(w);
    ExecValue out;
    out.shape = out_shape;
    out.batched = out_batched;
    Rng node_rng = m_rng.fork("node").fork(node.id);

    const auto gather_ct = [](const std::vector<CiphertextPtr>& pool, const std::vector<std::int64_t>& idx) {
      std::vector<CiphertextPtr> picked;
      picked.reserve(idx.size());
      for (std::int64_t i : idx) picked.push_back(pool[static_cast<size_t>(i)]);
      return picked;
    };
    const auto gather_pt = [](const std::vector<PlaintextPtr>& pool, const std::vector<std::int64_t>& idx) {
      std::vector<PlaintextPtr> picked;
      picked.reserve(idx.size());
      for (std::int64_t i : idx) picked.push_back(pool[static_cast<size_t>(i)]);
      return picked;
    };

    if (sx == Side::Cipher && sw == Side::Cipher) {
      const auto& cx = cipher_handles(x, x_id, x_space);
      const auto& cw = cipher_handles(w, w_id, w_space);
      std::vector<std::int64_t> xe;
      std::vector<std::int64_t> we;
      for (std::int64_t e = 0; e < m_out; ++e) {
        terms_of(e, xe, we);
        m_profile.ct_ops.mul_ct += static_cast<std::int64_t>(xe.size());
        m_profile.ct_ops.add += static_cast<std::int64_t>(xe.size()) - 1;
      }
      out.cipher.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> xi;
        std::vector<std::int64_t> wi;
        for (std::int64_t e = lo; e < hi; ++e) {
          terms_of(e, xi, wi);
          out.cipher[static_cast<size_t>(e)] = acc_cipher_cipher(gather_ct(cx, xi), gather_ct(cw, wi));
        }
      });
      return out;
    }

    if (sx == Side::Plain && sw == Side::Plain) {
      check(x.handle_count() == x_space && w.handle_count() == w_space, errc::internal,
            "plaintext operand layout mismatch");
      out.plain.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> xi;
        std::vector<std::int64_t> wi;
        for (std::int64_t e = lo; e < hi; ++e) {
          terms_of(e, xi, wi);
          out.plain[static_cast<size_t>(e)] = acc_plain_plain(gather_pt(x.plain, xi), gather_pt(w.plain, wi));
        }
      });
      return out;
    }

    // One side carries handles, the other plain numbers. Normalize so that
    // `handles` is the encrypted/encoded side and `rv` the plain side.
    const bool x_is_numbers = sx == Side::Numbers;
    const ExecValue& hv = x_is_numbers ? w : x;
    const std::string& hv_id = x_is_numbers ? w_id : x_id;
    const std::int64_t hv_space = x_is_numbers ? w_space : x_space;
    const ExecValue& nv = x_is_numbers ? x : w;
    const std::int64_t nv_space = x_is_numbers ? x_space : w_space;
    check(side_of(nv) == Side::Numbers, errc::internal, "unsupported operand combination in contraction");
    const RawView rv = raw_view(nv, nv_space);
    const bool can_bypass = nv.from_constants;

    if (side_of(hv) == Side::Cipher) {
      const auto& handles = cipher_handles(hv, hv_id, hv_space);
      std::vector<std::int64_t> xe;
      std::vector<std::int64_t> we;
      for (std::int64_t e = 0; e < m_out; ++e) {
        terms_of(e, xe, we);
        const auto& h_elems = x_is_numbers ? we : xe;
        const auto& n_elems = x_is_numbers ? xe : we;
        (void)h_elems;
        add_plan_counts(plan_terms(rv, n_elems, can_bypass), /*cipher_path=*/true);
      }
      out.cipher.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> xi;
        std::vector<std::int64_t> wi;
        for (std::int64_t e = lo; e < hi; ++e) {
          terms_of(e, xi, wi);
          const auto& h_elems = x_is_numbers ? wi : xi;
          const auto& n_elems = x_is_numbers ? xi : wi;
          const TermPlan plan = plan_terms(rv, n_elems, can_bypass);
          out.cipher[static_cast<size_t>(e)] =
              acc_cipher_raw(gather_ct(handles, h_elems), plan, rv, n_elems, node_rng.fork(e));
        }
      });
      return out;
    }

    check(side_of(hv) == Side::Plain, errc::internal, "unsupported operand combination in contraction");
    check(hv.handle_count() == hv_space, errc::internal, "plaintext operand layout mismatch");
    {
      std::vector<std::int64_t> xe;
      std::vector<std::int64_t> we;
      for (std::int64_t e = 0; e < m_out; ++e) {
        terms_of(e, xe, we);
        const auto& n_elems = x_is_numbers ? xe : we;
        add_plan_counts(plan_terms(rv, n_elems, can_bypass), /*cipher_path=*/false);
      }
      out.plain.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> xi;
        std::vector<std::int64_t> wi;
        for (std::int64_t e = lo; e < hi; ++e) {
          terms_of(e, xi, wi);
          const auto& h_elems = x_is_numbers ? wi : xi;
          const auto& n_elems = x_is_numbers ? xi : wi;
          const TermPlan plan = plan_terms(rv, n_elems, can_bypass);
          out.plain[static_cast<size_t>(e)] = acc_plain_raw(gather_pt(hv.plain, h_elems), plan, rv, n_elems);
        }
      });
      return out;
    }
  }

  ExecValue kernel_dot(const Node& node, const TensorShape& out_shape, const ExecValue& a, const std::string& a_id,
                       const ExecValue& b, const std::string& b_id) {
    const std::int64_t k = b.shape.dim(0);
    const std::int64_t md = b.shape.dim(1);
    if (b.is_cipher() || b.is_plain())
      check(!b.batched, errc::validation, "the matrix operand of a dot product cannot carry the batch dimension");
    const bool out_batched = a.batched;
    const std::int64_t x_space = space_count(a.shape, a.batched);
    const std::int64_t rows = x_space / k;
    (void)rows;
    const std::int64_t w_space = k * md;
    auto terms_of = [k, md](std::int64_t e, std::vector<std::int64_t>& xe, std::vector<std::int64_t>& we) {
      const std::int64_t r = e / md;
      const std::int64_t j = e % md;
      xe.clear();
      we.clear();
      xe.reserve(static_cast<size_t>(k));
      we.reserve(static_cast<size_t>(k));
      for (std::int64_t i = 0; i < k; ++i) {
        xe.push_back(r * k + i);
        we.push_back(i * md + j);
      }
    };
    return contraction(node, out_shape, out_batched, a, a_id, x_space, b, b_id, w_space, terms_of);
  }

  ExecValue kernel_convolution(const Node& node, const TensorShape& out_shape, const ExecValue& x,
                               const std::string& x_id, const ExecValue& w, const std::string& w_id) {
    if (w.is_cipher() || w.is_plain())
      check(!w.batched, errc::validation, "the filter operand of a convolution cannot carry the batch dimension");
    const std::int64_t stride = attr_i64(node, "stride");
    const TensorShape xs = element_space(x.shape, x.batched);
    const TensorShape os = element_space(out_shape, x.batched);
    // batched inputs keep the batch in the slots, so the element space is
    // (C,H,W) / (F,OH,OW); unbatched inputs carry a leading image extent.
    const bool has_images = xs.rank() == 4;
    const std::int64_t channels = xs.dim(has_images ? 1 : 0);
    const std::int64_t height = xs.dim(has_images ? 2 : 1);
    const std::int64_t width = xs.dim(has_images ? 3 : 2);
    const std::int64_t filters = w.shape.dim(0);
    const std::int64_t kh = w.shape.dim(2);
    const std::int64_t kw = w.shape.dim(3);
    const std::int64_t out_h = os.dim(has_images ? 2 : 1);
    const std::int64_t out_w = os.dim(has_images ? 3 : 2);
    const std::int64_t x_space = xs.element_count();
    const std::int64_t w_space = w.shape.element_count();
    auto terms_of = [=](std::int64_t e, std::vector<std::int64_t>& xe, std::vector<std::int64_t>& we) {
      xe.clear();
      we.clear();
      std::int64_t rest = e;
      const std::int64_t ox = rest % out_w;
      rest /= out_w;
      const std::int64_t oy = rest % out_h;
      rest /= out_h;
      const std::int64_t f = rest % filters;
      const std::int64_t n = rest / filters;
      xe.reserve(static_cast<size_t>(channels * kh * kw));
      we.reserve(static_cast<size_t>(channels * kh * kw));
      for (std::int64_t c = 0; c < channels; ++c)
        for (std::int64_t dy = 0; dy < kh; ++dy)
          for (std::int64_t dx = 0; dx < kw; ++dx) {
            xe.push_back(((n * channels + c) * height + oy * stride + dy) * width + ox * stride + dx);
            we.push_back(((f * channels + c) * kh + dy) * kw + dx);
          }
    };
    return contraction(node, out_shape, x.batched, x, x_id, x_space, w, w_id, w_space, terms_of);
  }

  // ---- pooling ----------------------------------------------------------------

  ExecValue kernel_pool(const Node& node, const TensorShape& out_shape, const ExecValue& x) {
    const auto& window = attr_ints(node, "window");
    const std::int64_t stride = attr_i64(node, "stride");
    const std::int64_t w1 = window[0];
    const std::int64_t w2 = window[1];
    const bool average = node.op == OpKind::AvgPool;
    const double factor = 1.0 / static_cast<double>(w1 * w2);

    const TensorShape xs = element_space(x.shape, x.batched);
    const TensorShape os = element_space(out_shape, x.batched);
    const bool has_images = xs.rank() == 4;
    const std::int64_t channels = xs.dim(has_images ? 1 : 0);
    const std::int64_t height = xs.dim(has_images ? 2 : 1);
    const std::int64_t width = xs.dim(has_images ? 3 : 2);
    const std::int64_t out_h = os.dim(has_images ? 2 : 1);
    const std::int64_t out_w = os.dim(has_images ? 3 : 2);
    const std::int64_t m_out = os.element_count();

    auto window_of = [=](std::int64_t e, std::vector<std::int64_t>& idx) {
      idx.clear();
      std::int64_t rest = e;
      const std::int64_t ox = rest % out_w;
      rest /= out_w;
      const std::int64_t oy = rest % out_h;
      rest /= out_h;
      const std::int64_t c = rest % channels;
      const std::int64_t n = rest / channels;
      idx.reserve(static_cast<size_t>(w1 * w2));
      for (std::int64_t dy = 0; dy < w1; ++dy)
        for (std::int64_t dx = 0; dx < w2; ++dx)
          idx.push_back(((n * channels + c) * height + oy * stride + dy) * width + ox * stride + dx);
    };

    ExecValue out;
    out.shape = out_shape;
    out.batched = x.batched;

    // The average divides the window sum by a plaintext constant, which the
    // multiply shortcuts may still elide (a 1x1 window divides by one).
    BypassAction scale_action = BypassAction::Proceed;
    if (average) scale_action = apply_bypass(OpKind::Multiply, classify_scalar(factor), m_opts.bypass);

    if (x.is_cipher()) {
      m_profile.ct_ops.add += m_out * (w1 * w2 - 1);
      if (average) {
        if (scale_action == BypassAction::Proceed)
          m_profile.ct_ops.mul_pt += m_out;
        else
          m_profile.bypass.mult += m_out;
      }
      out.cipher.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> idx;
        for (std::int64_t e = lo; e < hi; ++e) {
          window_of(e, idx);
          int level = INT_MAX;
          for (std::int64_t i : idx) level = std::min(level, x.cipher[static_cast<size_t>(i)]->level());
          CiphertextPtr sum;
          for (std::int64_t i : idx) {
            CiphertextPtr term = drop_to(x.cipher[static_cast<size_t>(i)], level);
            sum = sum ? m_backend.add(*sum, *term) : std::move(term);
          }
          if (average && scale_action == BypassAction::Proceed) {
            PlaintextPtr pt = m_backend.encode_constant(factor, level, m_backend.operand_scale(level));
            sum = m_backend.multiply_plain_rescale(*sum, *pt);
          }
          out.cipher[static_cast<size_t>(e)] = std::move(sum);
        }
      });
      return out;
    }

    if (x.is_plain()) {
      if (average && scale_action != BypassAction::Proceed) m_profile.bypass.mult += m_out;
      out.plain.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<std::int64_t> idx;
        for (std::int64_t e = lo; e < hi; ++e) {
          window_of(e, idx);
          int level = INT_MAX;
          for (std::int64_t i : idx) level = std::min(level, x.plain[static_cast<size_t>(i)]->level());
          PlaintextPtr sum;
          for (std::int64_t i : idx) {
            PlaintextPtr term = drop_to_p(x.plain[static_cast<size_t>(i)], level);
            sum = sum ? m_backend.add_pp(*sum, *term) : std::move(term);
          }
          if (average && scale_action == BypassAction::Proceed) {
            PlaintextPtr pt = m_backend.encode_constant(factor, level, m_backend.operand_scale(level));
            sum = m_backend.rescale_p(*m_backend.multiply_pp(*sum, *pt));
          }
          out.plain[static_cast<size_t>(e)] = std::move(sum);
        }
      });
      return out;
    }

    fail(errc::internal, "pooling expects a bound operand");
  }

  // ---- batch normalization ----------------------------------------------------

  ExecValue kernel_batch_norm(const Node& node, const TensorShape& out_shape, const std::vector<const ExecValue*>& in,
                              const std::vector<const std::string*>& /*ids*/) {
    const ExecValue& x = *in[0];
    for (size_t i = 1; i < in.size(); ++i)
      check(in[i]->is_raw() && in[i]->from_constants, errc::validation,
            "batch normalization statistics must be plaintext constants");
    const double eps = attr_f64(node, "epsilon");
    const Tensor& gamma = *in[1]->raw;
    const Tensor& beta = *in[2]->raw;
    const Tensor& mean = *in[3]->raw;
    const Tensor& variance = *in[4]->raw;

    const TensorShape xs = element_space(x.shape, x.batched);
    const std::int64_t channels = x.shape.dim(1);
    std::int64_t inner = 1;
    for (size_t a = 2; a < x.shape.rank(); ++a) inner *= x.shape.dim(a);

    // The inference-time normalization is the per-channel affine map
    // g*x + b with g = gamma/sqrt(variance+eps), b = beta - g*mean.
    std::vector<double> g(static_cast<size_t>(channels));
    std::vector<double> b(static_cast<size_t>(channels));
    for (std::int64_t c = 0; c < channels; ++c) {
      g[static_cast<size_t>(c)] =
          gamma.values()[static_cast<size_t>(c)] / std::sqrt(variance.values()[static_cast<size_t>(c)] + eps);
      b[static_cast<size_t>(c)] =
          beta.values()[static_cast<size_t>(c)] - g[static_cast<size_t>(c)] * mean.values()[static_cast<size_t>(c)];
    }
    const std::int64_t m_out = xs.element_count();
    auto channel_of = [&](std::int64_t e) { return (e / inner) % channels; };

    ExecValue out;
    out.shape = out_shape;
    out.batched = x.batched;
    Rng node_rng = m_rng.fork("node").fork(node.id);

    if (constants_stay_plain()) {
      // scale and shift are plaintext scalars; both shortcuts may apply
      std::vector<BypassAction> mul_actions(static_cast<size_t>(m_out));
      std::vector<char> add_skipped(static_cast<size_t>(m_out), 0);
      for (std::int64_t e = 0; e < m_out; ++e) {
        const std::int64_t c = channel_of(e);
        const BypassAction act = apply_bypass(OpKind::Multiply, classify_scalar(g[static_cast<size_t>(c)]),
                                              m_opts.bypass);
        mul_actions[static_cast<size_t>(e)] = act;
        const bool cipher_path = x.is_cipher();
        if (act == BypassAction::Proceed) {
          if (cipher_path) ++m_profile.ct_ops.mul_pt;
        } else {
          ++m_profile.bypass.mult;
          if (act == BypassAction::Negate && cipher_path) ++m_profile.ct_ops.negate;
        }
        if (apply_bypass(OpKind::Add, classify_scalar(b[static_cast<size_t>(c)]), m_opts.bypass) ==
            BypassAction::ReturnUnchanged) {
          add_skipped[static_cast<size_t>(e)] = 1;
          ++m_profile.bypass.add;
        } else if (cipher_path) {
          ++m_profile.ct_ops.add;
        }
      }
      if (x.is_cipher()) {
        out.cipher.resize(static_cast<size_t>(m_out));
        parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
          for (std::int64_t e = lo; e < hi; ++e) {
            const std::int64_t c = channel_of(e);
            CiphertextPtr t = x.cipher[static_cast<size_t>(e)];
            switch (mul_actions[static_cast<size_t>(e)]) {
              case BypassAction::ReturnUnchanged:
                break;
              case BypassAction::Negate:
                t = m_backend.negate(*t);
                break;
              case BypassAction::FreshZero:
                t = m_backend.encrypt_zero_at(t->level(), t->scale(), node_rng.fork(e).next());
                break;
              case BypassAction::Proceed: {
                PlaintextPtr pt = m_backend.encode_constant(g[static_cast<size_t>(c)], t->level(),
                                                            m_backend.operand_scale(t->level()));
                t = m_backend.multiply_plain_rescale(*t, *pt);
                break;
              }
            }
            if (!add_skipped[static_cast<size_t>(e)]) {
              PlaintextPtr pt = m_backend.encode_constant(b[static_cast<size_t>(c)], t->level(), t->scale());
              t = m_backend.add_plain(*t, *pt);
            }
            out.cipher[static_cast<size_t>(e)] = std::move(t);
          }
        });
        return out;
      }
      check(x.is_plain(), errc::internal, "batch norm expects a bound operand");
      out.plain.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const std::int64_t c = channel_of(e);
          PlaintextPtr t = x.plain[static_cast<size_t>(e)];
          switch (mul_actions[static_cast<size_t>(e)]) {
            case BypassAction::ReturnUnchanged:
              break;
            case BypassAction::Negate:
              t = m_backend.negate_p(*t);
              break;
            case BypassAction::FreshZero:
              t = m_backend.encode_constant(0.0, t->level(), t->scale());
              break;
            case BypassAction::Proceed: {
              PlaintextPtr pt = m_backend.encode_constant(g[static_cast<size_t>(c)], t->level(),
                                                          m_backend.operand_scale(t->level()));
              t = m_backend.rescale_p(*m_backend.multiply_pp(*t, *pt));
              break;
            }
          }
          if (!add_skipped[static_cast<size_t>(e)]) {
            PlaintextPtr pt = m_backend.encode_constant(b[static_cast<size_t>(c)], t->level(), t->scale());
            t = m_backend.add_pp(*t, *pt);
          }
          out.plain[static_cast<size_t>(e)] = std::move(t);
        }
      });
      return out;
    }

    // Model-encrypting paradigms: the derived per-channel scale and shift are
    // what the model owner encrypts. The scale multiplies at the top level;
    // the shift is encrypted at exactly the scale the product carries.
    Rng key_rng = node_rng.fork("stats");
    std::vector<CiphertextPtr> g_ct(static_cast<size_t>(channels));
    for (std::int64_t c = 0; c < channels; ++c)
      g_ct[static_cast<size_t>(c)] = m_backend.encrypt(
          *m_backend.encode_constant(g[static_cast<size_t>(c)], top_level(), default_scale()), key_rng.next());

    if (x.is_cipher()) {
      const int level = min_level_ct(x.cipher);
      m_profile.ct_ops.mul_ct += m_out;
      m_profile.ct_ops.add += m_out;
      std::vector<CiphertextPtr> b_ct(static_cast<size_t>(channels));
      const double prod_scale =
          x.cipher[0]->scale() * default_scale() /
          static_cast<double>(m_backend.context().moduli()[static_cast<size_t>(level)].value());
      for (std::int64_t c = 0; c < channels; ++c)
        b_ct[static_cast<size_t>(c)] = m_backend.encrypt(
            *m_backend.encode_constant(b[static_cast<size_t>(c)], level - 1, prod_scale), key_rng.next());
      out.cipher.resize(static_cast<size_t>(m_out));
      parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const std::int64_t c = channel_of(e);
          CiphertextPtr t = m_backend.multiply_rescale(*drop_to(x.cipher[static_cast<size_t>(e)], level),
                                                       *drop_to(g_ct[static_cast<size_t>(c)], level));
          out.cipher[static_cast<size_t>(e)] = add_aligned(t, b_ct[static_cast<size_t>(c)], false);
        }
      });
      return out;
    }

    // x is plain data (EncryptedModel): encode columns against the encrypted scale
    check(x.is_raw() && !x.from_constants, errc::internal, "batch norm expects data or ciphertext input");
    const RawView xv = raw_view(x, m_out);
    const int level = top_level();
    m_profile.ct_ops.mul_pt += m_out;
    m_profile.ct_ops.add += m_out;
    std::vector<CiphertextPtr> b_ct(static_cast<size_t>(channels));
    const double prod_scale = default_scale();
    for (std::int64_t c = 0; c < channels; ++c)
      b_ct[static_cast<size_t>(c)] = m_backend.encrypt(
          *m_backend.encode_constant(b[static_cast<size_t>(c)], level - 1, prod_scale), key_rng.next());
    out.cipher.resize(static_cast<size_t>(m_out));
    parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t e = lo; e < hi; ++e) {
        const std::int64_t c = channel_of(e);
        PlaintextPtr pt = encode_raw(xv, e, level, m_backend.operand_scale(level));
        CiphertextPtr t = m_backend.multiply_plain_rescale(*g_ct[static_cast<size_t>(c)], *pt);
        out.cipher[static_cast<size_t>(e)] = add_aligned(t, b_ct[static_cast<size_t>(c)], false);
      }
    });
    return out;
  }

  // ---- polynomial activation ----------------------------------------------------

  ExecValue kernel_poly_act(const Node& node, const TensorShape& out_shape, const ExecValue& x) {
    const double a = attr_f64(node, "a");
    const double b = attr_f64(node, "b");
    const double c = attr_f64(node, "c");
    ExecValue out;
    out.shape = out_shape;
    out.batched = x.batched;
    const std::int64_t m = x.handle_count();
    Rng node_rng = m_rng.fork("node").fork(node.id);

    if (x.is_cipher()) {
      // align the whole tensor first so every element leaves at one scale
      const int level = min_level_ct(x.cipher);
      if (a != 0.0) {
        m_profile.ct_ops.mul_ct += m;
        if (a == -1.0) m_profile.ct_ops.negate += m;
        if (a != 1.0 && a != -1.0) m_profile.ct_ops.mul_pt += m;
        if (b != 0.0) {
          m_profile.ct_ops.mul_pt += m;
          m_profile.ct_ops.add += m;
        }
        if (c != 0.0) m_profile.ct_ops.add += m;
      } else {
        if (b != 1.0 && b != -1.0 && b != 0.0) m_profile.ct_ops.mul_pt += m;
        if (b == -1.0) m_profile.ct_ops.negate += m;
        if (c != 0.0 && b != 0.0) m_profile.ct_ops.add += m;
      }
      out.cipher.resize(static_cast<size_t>(m));
      parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t e = lo; e < hi; ++e) {
          const CiphertextPtr xe = drop_to(x.cipher[static_cast<size_t>(e)], level);
          CiphertextPtr acc;
          if (a != 0.0) {
            CiphertextPtr sq = m_backend.multiply_rescale(*xe, *xe);
            if (a == -1.0)
              sq = m_backend.negate(*sq);
            else if (a != 1.0)
              sq = m_backend.multiply_plain_rescale(
                  *sq, *m_backend.encode_constant(a, sq->level(), m_backend.operand_scale(sq->level())));
            acc = std::move(sq);
            if (b != 0.0) {
              // encode the linear coefficient at the operand scale itself so
              // the product lands at exactly the square's scale
              CiphertextPtr lx =
                  m_backend.multiply_plain_rescale(*xe, *m_backend.encode_constant(b, level, xe->scale()));
              acc = add_aligned(acc, lx, false);
            }
          } else if (b == 0.0) {
            acc = m_backend.encrypt(*m_backend.encode_constant(c, level, xe->scale()), node_rng.fork(e).next());
            out.cipher[static_cast<size_t>(e)] = std::move(acc);
            continue;
          } else if (b == 1.0) {
            acc = xe;
          } else if (b == -1.0) {
            acc = m_backend.negate(*xe);
          } else {
            acc = m_backend.multiply_plain_rescale(
                *xe, *m_backend.encode_constant(b, level, m_backend.operand_scale(level)));
          }
          if (c != 0.0)
            acc = m_backend.add_plain(*acc, *m_backend.encode_constant(c, acc->level(), acc->scale()));
          out.cipher[static_cast<size_t>(e)] = std::move(acc);
        }
      });
      return out;
    }

    check(x.is_plain(), errc::internal, "polynomial activation expects a bound operand");
    const int level = min_level_pt(x.plain);
    out.plain.resize(static_cast<size_t>(m));
    parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t e = lo; e < hi; ++e) {
        const PlaintextPtr xe = drop_to_p(x.plain[static_cast<size_t>(e)], level);
        PlaintextPtr acc;
        if (a != 0.0) {
          PlaintextPtr sq = m_backend.rescale_p(*m_backend.multiply_pp(*xe, *xe));
          if (a == -1.0)
            sq = m_backend.negate_p(*sq);
          else if (a != 1.0)
            sq = m_backend.rescale_p(*m_backend.multiply_pp(
                *sq, *m_backend.encode_constant(a, sq->level(), m_backend.operand_scale(sq->level()))));
          acc = std::move(sq);
          if (b != 0.0) {
            PlaintextPtr lx = m_backend.rescale_p(*m_backend.multiply_pp(
                *xe, *m_backend.encode_constant(b, level, xe->scale())));
            acc = add_aligned_p(acc, lx, false);
          }
        } else if (b == 0.0) {
          acc = m_backend.encode_constant(c, level, xe->scale());
          out.plain[static_cast<size_t>(e)] = std::move(acc);
          continue;
        } else if (b == 1.0) {
          acc = xe;
        } else if (b == -1.0) {
          acc = m_backend.negate_p(*xe);
        } else {
          acc = m_backend.rescale_p(*m_backend.multiply_pp(
              *xe, *m_backend.encode_constant(b, level, m_backend.operand_scale(level))));
        }
        if (c != 0.0) acc = m_backend.add_pp(*acc, *m_backend.encode_constant(c, acc->level(), acc->scale()));
        out.plain[static_cast<size_t>(e)] = std::move(acc);
      }
    });
    return out;
  }

  // ---- rearrangement ops --------------------------------------------------------

  //! An operand lifted into a common handle domain for structural ops.
  struct Bound {
    const std::vector<CiphertextPtr>* ct = nullptr;
    const std::vector<PlaintextPtr>* pt = nullptr;
    std::vector<CiphertextPtr> ct_own;
    std::vector<PlaintextPtr> pt_own;
    bool batched = false;
  };

  //! Flat handle index of a full-shape coordinate (the batch coordinate is
  //! ignored for batched values).
  static std::int64_t handle_flat(const TensorShape& full, bool batched, const std::vector<std::int64_t>& idx) {
    std::int64_t flat = 0;
    for (size_t a = batched ? 1 : 0; a < full.rank(); ++a)
      flat = flat * full.dim(a) + idx[a];
    return flat;
  }

  ExecValue kernel_rearrange(const Node& node, const TensorShape& out_shape, const std::vector<const ExecValue*>& in,
                             const std::vector<const std::string*>& ids) {
    // Promote every operand to a common handle domain first (mixed
    // constant/handle concatenations encode or encrypt the constant side).
    bool any_cipher = false;
    bool out_batched = false;
    for (const ExecValue* v : in) {
      any_cipher = any_cipher || side_of(*v) == Side::Cipher;
      out_batched = out_batched || v->batched;
    }
    if (node.op == OpKind::Broadcast && !out_batched) {
      // inserting the leading axis on a non-batched value creates the batch
      // dimension when the new extent is the run's batch extent
      for (std::int64_t ax : attr_ints(node, "axes"))
        if (ax == 0 && out_shape.rank() > 0 && out_shape.dim(0) == m_batch) out_batched = true;
    }

    std::vector<Bound> bound(in.size());

    // reference level/scale for promoting raw operands
    int ref_level = top_level();
    double ref_scale = default_scale();
    bool have_ref = false;
    for (const ExecValue* v : in) {
      if (v->is_cipher()) {
        ref_level = std::min(ref_level, min_level_ct(v->cipher));
        if (!have_ref) ref_scale = v->cipher[0]->scale();
        have_ref = true;
      } else if (v->is_plain()) {
        ref_level = std::min(ref_level, min_level_pt(v->plain));
        if (!have_ref) ref_scale = v->plain[0]->scale();
        have_ref = true;
      }
    }

    for (size_t i = 0; i < in.size(); ++i) {
      const ExecValue& v = *in[i];
      bound[i].batched = v.batched;
      if (v.is_cipher()) {
        bound[i].ct = &v.cipher;
        continue;
      }
      if (v.is_plain()) {
        bound[i].pt = &v.plain;
        continue;
      }
      // raw operand: bind it to the scheme at the reference level/scale, one
      // handle per non-batch element
      const std::int64_t mi = space_count(v.shape, v.batched);
      const RawView rv = raw_view(v, mi);
      if (any_cipher) {
        bound[i].ct_own = promote_raw_cipher(v, *ids[i], rv, mi, ref_level, ref_scale, node.id);
        bound[i].ct = &bound[i].ct_own;
      } else {
        bound[i].pt_own.resize(static_cast<size_t>(mi));
        for (std::int64_t e = 0; e < mi; ++e)
          bound[i].pt_own[static_cast<size_t>(e)] = encode_raw(rv, e, ref_level, ref_scale);
        bound[i].pt = &bound[i].pt_own;
      }
    }

    const std::int64_t m_out = space_count(out_shape, out_batched);
    ExecValue out;
    out.shape = out_shape;
    out.batched = out_batched;
    Rng node_rng = m_rng.fork("node").fork(node.id);

    // Each output element maps to source elements of input 0 (or another
    // input for Concat); -1 marks a filled element (Pad).
    switch (node.op) {
      case OpKind::Reshape: {
        if (in[0]->batched)
          check(out_shape.rank() > 0 && out_shape.dim(0) == in[0]->shape.dim(0), errc::validation,
                "reshaping across the batch dimension is not supported under slot packing");
        copy_handles(out, bound[0], m_out, [](std::int64_t e) { return e; });
        return out;
      }
      case OpKind::Broadcast: {
        std::set<std::int64_t> inserted;
        for (std::int64_t ax : attr_ints(node, "axes")) inserted.insert(ax);
        if (in[0]->batched)
          check(!inserted.count(0), errc::validation,
                "broadcast cannot insert axes in front of the batch dimension");
        const TensorShape in_full = in[0]->shape;
        const bool in_batched = bound[0].batched;
        std::vector<std::int64_t> map(static_cast<size_t>(m_out));
        for_each_index(element_space(out_shape, out_batched), [&](const std::vector<std::int64_t>& idx,
                                                                  std::int64_t flat) {
          std::vector<std::int64_t> full_idx;
          if (out_batched) full_idx.push_back(0);
          full_idx.insert(full_idx.end(), idx.begin(), idx.end());
          std::vector<std::int64_t> src;
          for (size_t a = 0; a < full_idx.size(); ++a)
            if (!inserted.count(static_cast<std::int64_t>(a))) src.push_back(full_idx[a]);
          map[static_cast<size_t>(flat)] = handle_flat(in_full, in_batched, src);
        });
        copy_handles(out, bound[0], m_out, [&](std::int64_t e) { return map[static_cast<size_t>(e)]; });
        return out;
      }
      case OpKind::Reverse: {
        std::set<std::int64_t> axes;
        for (std::int64_t ax : attr_ints(node, "axes")) axes.insert(ax);
        if (in[0]->batched)
          check(!axes.count(0), errc::validation,
                "reversing the batch dimension is not supported under slot packing");
        const TensorShape in_full = in[0]->shape;
        std::vector<std::int64_t> map(static_cast<size_t>(m_out));
        for_each_index(element_space(out_shape, out_batched), [&](const std::vector<std::int64_t>& idx,
                                                                  std::int64_t flat) {
          std::vector<std::int64_t> full_idx;
          if (out_batched) full_idx.push_back(0);
          full_idx.insert(full_idx.end(), idx.begin(), idx.end());
          std::vector<std::int64_t> src = full_idx;
          for (std::int64_t ax : axes)
            src[static_cast<size_t>(ax)] = in_full.dim(static_cast<size_t>(ax)) - 1 - full_idx[static_cast<size_t>(ax)];
          map[static_cast<size_t>(flat)] = handle_flat(in_full, bound[0].batched, src);
        });
        copy_handles(out, bound[0], m_out, [&](std::int64_t e) { return map[static_cast<size_t>(e)]; });
        return out;
      }
      case OpKind::Slice: {
        const auto& begin = attr_ints(node, "begin");
        if (in[0]->batched)
          check(begin[0] == 0 && out_shape.dim(0) == in[0]->shape.dim(0), errc::validation,
                "slicing the batch dimension is not supported under slot packing");
        const TensorShape in_full = in[0]->shape;
        std::vector<std::int64_t> map(static_cast<size_t>(m_out));
        for_each_index(element_space(out_shape, out_batched), [&](const std::vector<std::int64_t>& idx,
                                                                  std::int64_t flat) {
          std::vector<std::int64_t> full_idx;
          if (out_batched) full_idx.push_back(0);
          full_idx.insert(full_idx.end(), idx.begin(), idx.end());
          std::vector<std::int64_t> src = full_idx;
          for (size_t a = 0; a < src.size(); ++a) src[a] += begin[a];
          map[static_cast<size_t>(flat)] = handle_flat(in_full, bound[0].batched, src);
        });
        copy_handles(out, bound[0], m_out, [&](std::int64_t e) { return map[static_cast<size_t>(e)]; });
        return out;
      }
      case OpKind::Concat: {
        const std::int64_t axis = attr_i64(node, "axis");
        if (out_batched)
          check(axis != 0, errc::validation, "concatenating along the batch dimension is not supported");
        std::vector<std::pair<int, std::int64_t>> map(static_cast<size_t>(m_out));
        std::int64_t offset = 0;
        for (size_t i = 0; i < in.size(); ++i) {
          const TensorShape part = in[i]->shape;
          for_each_index(element_space(part, out_batched), [&](const std::vector<std::int64_t>& idx,
                                                               std::int64_t flat) {
            std::vector<std::int64_t> full_idx;
            if (out_batched) full_idx.push_back(0);
            full_idx.insert(full_idx.end(), idx.begin(), idx.end());
            std::vector<std::int64_t> dst = full_idx;
            dst[static_cast<size_t>(axis)] += offset;
            map[static_cast<size_t>(handle_flat(out_shape, out_batched, dst))] = {static_cast<int>(i), flat};
          });
          offset += part.dim(static_cast<size_t>(axis));
        }
        if (any_cipher) {
          out.cipher.resize(static_cast<size_t>(m_out));
          for (std::int64_t e = 0; e < m_out; ++e) {
            const auto& [part, src] = map[static_cast<size_t>(e)];
            out.cipher[static_cast<size_t>(e)] = (*bound[static_cast<size_t>(part)].ct)[static_cast<size_t>(src)];
          }
        } else {
          out.plain.resize(static_cast<size_t>(m_out));
          for (std::int64_t e = 0; e < m_out; ++e) {
            const auto& [part, src] = map[static_cast<size_t>(e)];
            out.plain[static_cast<size_t>(e)] = (*bound[static_cast<size_t>(part)].pt)[static_cast<size_t>(src)];
          }
        }
        return out;
      }
      case OpKind::Pad: {
        const auto& below = attr_ints(node, "pad_below");
        const auto& above = attr_ints(node, "pad_above");
        if (in[0]->batched)
          check(below[0] == 0 && above[0] == 0, errc::validation,
                "padding the batch dimension is not supported under slot packing");
        const double fill = node.attrs.count("value") ? attr_f64(node, "value") : 0.0;
        const TensorShape in_full = in[0]->shape;
        std::vector<std::int64_t> map(static_cast<size_t>(m_out), -1);
        for_each_index(element_space(out_shape, out_batched), [&](const std::vector<std::int64_t>& idx,
                                                                  std::int64_t flat) {
          std::vector<std::int64_t> full_idx;
          if (out_batched) full_idx.push_back(0);
          full_idx.insert(full_idx.end(), idx.begin(), idx.end());
          std::vector<std::int64_t> src = full_idx;
          for (size_t a = 0; a < src.size(); ++a) {
            src[a] -= below[a];
            if (src[a] < 0 || src[a] >= in_full.dim(a)) return;  // stays a fill element
          }
          map[static_cast<size_t>(flat)] = handle_flat(in_full, bound[0].batched, src);
        });
        // fill elements adopt the source tensor's level and scale
        int lvl = ref_level;
        double scl = ref_scale;
        if (any_cipher) {
          out.cipher.resize(static_cast<size_t>(m_out));
          for (std::int64_t e = 0; e < m_out; ++e) {
            const std::int64_t src = map[static_cast<size_t>(e)];
            if (src >= 0) {
              out.cipher[static_cast<size_t>(e)] = (*bound[0].ct)[static_cast<size_t>(src)];
            } else if (fill == 0.0) {
              out.cipher[static_cast<size_t>(e)] = m_backend.encrypt_zero_at(lvl, scl, node_rng.fork(e).next());
            } else {
              out.cipher[static_cast<size_t>(e)] =
                  m_backend.encrypt(*m_backend.encode_constant(fill, lvl, scl), node_rng.fork(e).next());
            }
          }
        } else {
          out.plain.resize(static_cast<size_t>(m_out));
          for (std::int64_t e = 0; e < m_out; ++e) {
            const std::int64_t src = map[static_cast<size_t>(e)];
            out.plain[static_cast<size_t>(e)] =
                src >= 0 ? (*bound[0].pt)[static_cast<size_t>(src)] : m_backend.encode_constant(fill, lvl, scl);
          }
        }
        return out;
      }
      case OpKind::Sum: {
        std::set<std::int64_t> axes;
        for (std::int64_t ax : attr_ints(node, "axes")) axes.insert(ax);
        if (in[0]->batched)
          check(!axes.count(0), errc::validation,
                "summing across the batch dimension requires rotations, which this build does not provide");
        const TensorShape in_full = in[0]->shape;
        std::vector<std::vector<std::int64_t>> groups(static_cast<size_t>(m_out));
        for_each_index(element_space(in_full, bound[0].batched), [&](const std::vector<std::int64_t>& idx,
                                                                     std::int64_t flat) {
          std::vector<std::int64_t> full_idx;
          if (bound[0].batched) full_idx.push_back(0);
          full_idx.insert(full_idx.end(), idx.begin(), idx.end());
          std::vector<std::int64_t> dst;
          for (size_t a = 0; a < full_idx.size(); ++a)
            if (!axes.count(static_cast<std::int64_t>(a))) dst.push_back(full_idx[a]);
          groups[static_cast<size_t>(handle_flat(out_shape, out_batched, dst))].push_back(flat);
        });
        if (any_cipher) {
          for (const auto& grp : groups)
            m_profile.ct_ops.add += static_cast<std::int64_t>(grp.size()) - 1;
          out.cipher.resize(static_cast<size_t>(m_out));
          parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t e = lo; e < hi; ++e) {
              const auto& grp = groups[static_cast<size_t>(e)];
              int level = INT_MAX;
              for (std::int64_t i : grp) level = std::min(level, (*bound[0].ct)[static_cast<size_t>(i)]->level());
              CiphertextPtr sum;
              for (std::int64_t i : grp) {
                CiphertextPtr term = drop_to((*bound[0].ct)[static_cast<size_t>(i)], level);
                sum = sum ? m_backend.add(*sum, *term) : std::move(term);
              }
              out.cipher[static_cast<size_t>(e)] = std::move(sum);
            }
          });
        } else {
          out.plain.resize(static_cast<size_t>(m_out));
          parallel_for(m_out, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t e = lo; e < hi; ++e) {
              const auto& grp = groups[static_cast<size_t>(e)];
              int level = INT_MAX;
              for (std::int64_t i : grp) level = std::min(level, (*bound[0].pt)[static_cast<size_t>(i)]->level());
              PlaintextPtr sum;
              for (std::int64_t i : grp) {
                PlaintextPtr term = drop_to_p((*bound[0].pt)[static_cast<size_t>(i)], level);
                sum = sum ? m_backend.add_pp(*sum, *term) : std::move(term);
              }
              out.plain[static_cast<size_t>(e)] = std::move(sum);
            }
          });
        }
        return out;
      }
      default:
        fail(errc::internal, "unhandled rearrangement op");
    }
  }

  std::vector<CiphertextPtr> promote_raw_cipher(const ExecValue& v, const std::string& id, const RawView& rv,
                                                std::int64_t m, int level, double scale, const std::string& node_id) {
    std::vector<CiphertextPtr> handles(static_cast<size_t>(m));
    if (v.from_constants && !constants_stay_plain() &&
        std::abs(scale - default_scale()) <= 1e-9 * default_scale()) {
      // encrypted-model constants joining a tensor that still carries the
      // default scale: reuse the cached top-level encryptions
      const auto& cached = cipher_handles(v, id, m);
      for (std::int64_t e = 0; e < m; ++e) handles[static_cast<size_t>(e)] = drop_to(cached[static_cast<size_t>(e)], level);
      return handles;
    }
    // raw values that must join a ciphertext tensor at its exact level/scale
    Rng rng = m_rng.fork("promote").fork(node_id + "/" + id);
    for (std::int64_t e = 0; e < m; ++e)
      handles[static_cast<size_t>(e)] = m_backend.encrypt(*encode_raw(rv, e, level, scale), rng.next());
    return handles;
  }

  template <typename MapFn>
  static void copy_handles(ExecValue& out, const Bound& src, std::int64_t m_out, MapFn&& map) {
    if (src.ct) {
      out.cipher.resize(static_cast<size_t>(m_out));
      for (std::int64_t e = 0; e < m_out; ++e)
        out.cipher[static_cast<size_t>(e)] = (*src.ct)[static_cast<size_t>(map(e))];
    } else {
      out.plain.resize(static_cast<size_t>(m_out));
      for (std::int64_t e = 0; e < m_out; ++e)
        out.plain[static_cast<size_t>(e)] = (*src.pt)[static_cast<size_t>(map(e))];
    }
  }

  // ---- output assembly -----------------------------------------------------------

  Tensor value_to_tensor(const ExecValue& v) const {
    if (v.is_raw()) return *v.raw;
    Tensor out(v.shape);
    const std::int64_t m = v.handle_count();
    const std::int64_t batch = v.batched && v.shape.rank() > 0 ? v.shape.dim(0) : 1;
    parallel_for(m, m_opts.threads, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t e = lo; e < hi; ++e) {
        const std::vector<double> column = v.is_cipher()
                                               ? m_backend.decrypt(*v.cipher[static_cast<size_t>(e)], batch)
                                               : m_backend.decode(*v.plain[static_cast<size_t>(e)], batch);
        for (std::int64_t bb = 0; bb < batch; ++bb)
          out.values()[static_cast<size_t>(bb * m + e)] = column[static_cast<size_t>(bb)];
      }
    });
    return out;
  }
};

}  // namespace detail

/*! \brief Execute a graph under the chosen paradigm.
 *
 * Binds `inputs` to the graph's Parameter nodes, checks the multiplicative
 * depth against the context's level budget before any encryption happens,
 * runs every node through the backend, and decrypts/decodes only at the
 * declared outputs. The returned profile carries per-node wall times,
 * bypassed-operation counts, and ciphertext operation counts.
 */
inline ExecResult execute(const Graph& graph, const std::map<std::string, Tensor>& inputs, HEBackend& backend,
                          const ExecOptions& options = {}) {
  detail::Executor exec(graph, backend, options);
  return exec.run(inputs);
}

}  // namespace heg
