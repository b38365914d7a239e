// Copyright 2026 The gatedctr Authors.
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

#include "gatedctr/model.h"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "gatedctr/json_config.h"

namespace gatedctr {
namespace {

const char* const kViewNames[] = {"rt", "st", "lt"};

Tensor EmbeddingTable(std::size_t rows, std::size_t dim, Rng& rng) {
  return XavierUniform({rows, dim}, rows, dim, rng);
}

std::vector<std::size_t> ToLocal(
    const std::vector<std::size_t>& ids,
    const std::unordered_map<std::size_t, std::size_t>& index) {
  std::vector<std::size_t> local;
  local.reserve(ids.size());
  for (std::size_t id : ids) local.push_back(index.at(id));
  return local;
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

std::size_t ModelConfig::resolved_head_dim() const {
  return head_dim > 0 ? head_dim : std::max<std::size_t>(1, dim / num_heads);
}

void ModelConfig::Validate() const {
  if (dim == 0 || num_heads == 0 || head_hidden == 0) {
    throw ConfigError("model config: dim, num_heads and head_hidden must be "
                      "positive");
  }
  if (vocab.n_users == 0 || vocab.n_items == 0 || vocab.n_contexts == 0) {
    throw ConfigError("model config: empty vocabulary");
  }
}

ModelConfig ModelConfigFromJson(const nlohmann::json& json, Vocabulary vocab) {
  ModelConfig c;
  c.vocab = vocab;
  StrictObject o(json, "model config");
  o.Read("dim", &c.dim);
  o.Read("num_heads", &c.num_heads);
  o.Read("head_dim", &c.head_dim);
  o.Read("sifter_width", &c.sifter_width);
  o.Read("purifier_width", &c.purifier_width);
  o.Read("fusion_hidden", &c.fusion_hidden);
  o.Read("fusion_gate_dim", &c.fusion_gate_dim);
  o.Read("head_hidden", &c.head_hidden);
  o.Read("share_target_sifter", &c.share_target_sifter);
  o.Read("share_view_sifters", &c.share_view_sifters);
  o.Read("share_view_attention", &c.share_view_attention);
  if (o.Has("vocab")) {
    StrictObject v(o.Raw("vocab"), "model config vocab");
    v.Read("n_users", &c.vocab.n_users);
    v.Read("n_items", &c.vocab.n_items);
    v.Read("n_contexts", &c.vocab.n_contexts);
    v.Finish();
  }
  o.Finish();
  c.Validate();
  return c;
}

nlohmann::json ModelConfigToJson(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["num_heads"] = c.num_heads;
  j["head_dim"] = c.head_dim;
  j["sifter_width"] = c.sifter_width;
  j["purifier_width"] = c.purifier_width;
  j["fusion_hidden"] = c.fusion_hidden;
  j["fusion_gate_dim"] = c.fusion_gate_dim;
  j["head_hidden"] = c.head_hidden;
  j["share_target_sifter"] = c.share_target_sifter;
  j["share_view_sifters"] = c.share_view_sifters;
  j["share_view_attention"] = c.share_view_attention;
  j["vocab"] = {{"n_users", c.vocab.n_users},
                {"n_items", c.vocab.n_items},
                {"n_contexts", c.vocab.n_contexts}};
  return j;
}

// ---------------------------------------------------------------------------
// Ablations

const char* AttentionVariantName(AttentionVariant variant) {
  switch (variant) {
    case AttentionVariant::kSoftmaxBaseline: return "softmax_baseline";
    case AttentionVariant::kNaiveSigmoid: return "naive_sigmoid";
    case AttentionVariant::kNoSifting: return "no_pafs";
    case AttentionVariant::kNoOutputGate: return "no_qgg";
    case AttentionVariant::kFull: return "full";
  }
  return "unknown";
}

AttentionVariant ParseAttentionVariant(const std::string& name) {
  for (AttentionVariant v :
       {AttentionVariant::kSoftmaxBaseline, AttentionVariant::kNaiveSigmoid,
        AttentionVariant::kNoSifting, AttentionVariant::kNoOutputGate,
        AttentionVariant::kFull}) {
    if (name == AttentionVariantName(v)) return v;
  }
  throw std::invalid_argument(
      "unknown attention variant '" + name +
      "' (expected softmax_baseline, naive_sigmoid, no_pafs, no_qgg, full)");
}

const std::vector<std::string>& AblationPresetNames() {
  static const std::vector<std::string> names = {
      "baseline", "+asga",         "+gcqc",   "+cgdf",  "full",
      "softmax",  "naive-sigmoid", "no-pafs", "no-qgg", "asga",
      "cgdf-minimalist", "cgdf-full", "cgdf-purified"};
  return names;
}

AblationConfig AblationPreset(const std::string& name) {
  auto attention_only = [](AttentionVariant v) {
    AblationConfig c{true, false, false, v};
    return c;
  };
  auto fusion_only = [](FusionContext context) {
    AblationConfig c{false, false, true, AttentionVariant::kFull, context};
    return c;
  };
  if (name == "baseline" || name == "softmax") {
    return {false, false, false, AttentionVariant::kSoftmaxBaseline};
  }
  if (name == "+asga" || name == "asga") {
    return attention_only(AttentionVariant::kFull);
  }
  if (name == "+gcqc") return {false, true, false, AttentionVariant::kFull};
  if (name == "+cgdf" || name == "cgdf-purified") {
    return fusion_only(FusionContext::kPurified);
  }
  if (name == "full") return {};
  if (name == "naive-sigmoid") {
    return attention_only(AttentionVariant::kNaiveSigmoid);
  }
  if (name == "no-pafs") return attention_only(AttentionVariant::kNoSifting);
  if (name == "no-qgg") return attention_only(AttentionVariant::kNoOutputGate);
  if (name == "cgdf-minimalist") return fusion_only(FusionContext::kMinimalist);
  if (name == "cgdf-full") return fusion_only(FusionContext::kFull);

  std::string valid;
  for (const std::string& n : AblationPresetNames()) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw std::invalid_argument("unknown ablation preset '" + name +
                              "'; valid presets: " + valid);
}

nlohmann::json AblationToJson(const AblationConfig& c) {
  nlohmann::ordered_json j;
  j["asga"] = c.asga;
  j["gcqc"] = c.gcqc;
  j["cgdf"] = c.cgdf;
  j["attention"] = AttentionVariantName(c.attention);
  j["fusion_context"] = FusionContextName(c.fusion_context);
  j["second_cgu"] = c.second_cgu;
  return j;
}

AblationConfig AblationFromJson(const nlohmann::json& json) {
  if (json.is_string()) return AblationPreset(json.get<std::string>());
  AblationConfig c;
  StrictObject o(json, "ablation");
  o.Read("asga", &c.asga);
  o.Read("gcqc", &c.gcqc);
  o.Read("cgdf", &c.cgdf);
  o.Read("second_cgu", &c.second_cgu);
  std::string attention = AttentionVariantName(c.attention);
  std::string context = FusionContextName(c.fusion_context);
  o.Read("attention", &attention);
  o.Read("fusion_context", &context);
  o.Finish();
  try {
    c.attention = ParseAttentionVariant(attention);
    c.fusion_context = ParseFusionContext(context);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("ablation: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// ModelParams

ModelParams ModelParams::Initialize(const ModelConfig& config,
                                    FusionContext fusion_context,
                                    std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  const std::size_t d = config.dim;
  ModelParams p;
  p.config = config;
  p.fusion_context = fusion_context;
  p.user_embedding = EmbeddingTable(config.vocab.n_users, d, rng);
  p.item_embedding = EmbeddingTable(config.vocab.n_items, d, rng);
  p.context_embedding = EmbeddingTable(config.vocab.n_contexts, d, rng);
  p.target_sifter = SwiGluFfn::Create(d, d, config.sifter_width, rng);
  const std::size_t n_sifters = config.share_view_sifters ? 1 : 3;
  for (std::size_t i = 0; i < n_sifters; ++i) {
    p.sequence_sifters.push_back(
        SwiGluFfn::Create(d, d, config.sifter_width, rng));
  }
  const std::size_t heads = config.num_heads;
  const std::size_t dk = config.resolved_head_dim();
  p.cascade.realtime = AttentionParams::Create(d, heads, dk, rng);
  if (config.share_view_attention) {
    p.cascade.short_term = p.cascade.realtime;
    p.cascade.long_term = p.cascade.realtime;
  } else {
    p.cascade.short_term = AttentionParams::Create(d, heads, dk, rng);
    p.cascade.long_term = AttentionParams::Create(d, heads, dk, rng);
  }
  p.cascade.update_gate = CalibrationGateParams::Create(d, rng);
  p.cascade.refine_gate = CalibrationGateParams::Create(d, rng);
  p.fusion = FusionParams::Create(d, fusion_context, config.fusion_hidden,
                                  config.fusion_gate_dim,
                                  config.purifier_width, rng);
  p.head = Mlp::Create({6 * d, config.head_hidden, 1}, rng);
  return p;
}

ParamList ModelParams::NamedParams() const {
  ParamList out;
  out.emplace_back("embedding.user", user_embedding);
  out.emplace_back("embedding.item", item_embedding);
  out.emplace_back("embedding.context", context_embedding);
  if (!config.share_target_sifter) target_sifter.CollectParams("sifter.target", out);
  if (sequence_sifters.size() == 1) {
    sequence_sifters[0].CollectParams("sifter.sequence", out);
  } else {
    for (std::size_t i = 0; i < sequence_sifters.size(); ++i) {
      sequence_sifters[i].CollectParams(
          std::string("sifter.sequence_") + kViewNames[i], out);
    }
  }
  if (config.share_view_attention) {
    cascade.realtime.CollectParams("attention.shared", out);
  } else {
    cascade.realtime.CollectParams("attention.rt", out);
    cascade.short_term.CollectParams("attention.st", out);
    cascade.long_term.CollectParams("attention.lt", out);
  }
  cascade.update_gate.CollectParams("calibration.update_gate", out);
  cascade.refine_gate.CollectParams("calibration.refine_gate", out);
  fusion.CollectParams("fusion", out);
  head.CollectParams("head", out);
  return out;
}

ModelParams ModelParams::Clone() const {
  ModelParams c;
  c.config = config;
  c.fusion_context = fusion_context;
  c.user_embedding = user_embedding.Clone();
  c.item_embedding = item_embedding.Clone();
  c.context_embedding = context_embedding.Clone();
  c.target_sifter = target_sifter.Clone();
  for (const SwiGluFfn& s : sequence_sifters) {
    c.sequence_sifters.push_back(s.Clone());
  }
  c.cascade.realtime = cascade.realtime.Clone();
  if (config.share_view_attention) {
    c.cascade.short_term = c.cascade.realtime;
    c.cascade.long_term = c.cascade.realtime;
  } else {
    c.cascade.short_term = cascade.short_term.Clone();
    c.cascade.long_term = cascade.long_term.Clone();
  }
  c.cascade.update_gate = cascade.update_gate.Clone();
  c.cascade.refine_gate = cascade.refine_gate.Clone();
  c.fusion = fusion.Clone();
  c.head = head.Clone();
  return c;
}

std::size_t ModelParams::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : NamedParams()) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// Batching and forward

Batch MakeBatch(std::span<const Instance> instances, const Vocabulary& vocab) {
  ValidateIds(instances, vocab);
  Batch batch;
  batch.size = instances.size();
  std::vector<std::size_t> items;
  for (const Instance& x : instances) {
    batch.users.push_back(x.user_id);
    batch.contexts.push_back(x.context_id);
    batch.targets.push_back(x.target_item_id);
    batch.labels.push_back(static_cast<double>(x.label));
    items.insert(items.end(), x.seq_rt.begin(), x.seq_rt.end());
    items.insert(items.end(), x.seq_st.begin(), x.seq_st.end());
    items.insert(items.end(), x.seq_lt.begin(), x.seq_lt.end());
  }
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  std::unordered_map<std::size_t, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) index[items[i]] = i;
  batch.items = std::move(items);

  std::vector<std::vector<std::size_t>> rt, st, lt;
  for (const Instance& x : instances) {
    rt.push_back(ToLocal(x.seq_rt, index));
    st.push_back(ToLocal(x.seq_st, index));
    lt.push_back(ToLocal(x.seq_lt, index));
  }
  batch.realtime = SequenceView::FromRows(rt);
  batch.short_term = SequenceView::FromRows(st);
  batch.long_term = SequenceView::FromRows(lt);
  return batch;
}

ForwardResult Forward(const ModelParams& params, const AblationConfig& ablation,
                      const Batch& batch, const ForwardHooks& hooks) {
  if (batch.size == 0) throw std::invalid_argument("Forward: empty batch");
  const std::size_t b = batch.size;
  const AttentionVariant variant = ablation.effective_attention();
  const bool sift = !hooks.identity_sifters &&
                    (variant == AttentionVariant::kFull ||
                     variant == AttentionVariant::kNoOutputGate);

  AttentionOptions attention;
  attention.normalization = variant == AttentionVariant::kNaiveSigmoid
                                ? AttentionNormalization::kSigmoid
                                : AttentionNormalization::kSoftmax;
  attention.output_gate = !hooks.open_attention_gates &&
                          (variant == AttentionVariant::kFull ||
                           variant == AttentionVariant::kNoSifting);
  attention.gate_logit_override = hooks.attention_gate_logit;

  const Tensor user = GatherRows(params.user_embedding, batch.users, {b});
  const Tensor context =
      GatherRows(params.context_embedding, batch.contexts, {b});
  const Tensor target = GatherRows(params.item_embedding, batch.targets, {b});

  const SwiGluFfn& target_sifter = params.config.share_target_sifter
                                       ? params.sequence_sifters[0]
                                       : params.target_sifter;
  ForwardResult result;
  result.sifted_target = sift ? SwiGluForward(target_sifter, target) : target;

  std::array<Tensor, 3> tables;
  if (!batch.items.empty()) {
    const Tensor raw = GatherRows(params.item_embedding, batch.items,
                                  {batch.items.size()});
    for (std::size_t v = 0; v < 3; ++v) {
      if (!sift) {
        tables[v] = raw;
      } else if (params.sequence_sifters.size() == 1) {
        tables[v] = v == 0 ? SwiGluForward(params.sequence_sifters[0], raw)
                           : tables[0];
      } else {
        tables[v] = SwiGluForward(params.sequence_sifters[v], raw);
      }
    }
  }

  CascadeOptions cascade_options;
  cascade_options.calibrate = ablation.gcqc;
  cascade_options.second_gate = ablation.second_cgu;
  cascade_options.forced_gate = hooks.calibration_gate;
  cascade_options.attention = attention;
  result.cascade = RunQueryCascade(
      params.cascade, result.sifted_target, tables[0], tables[1], tables[2],
      {&batch.realtime, &batch.short_term, &batch.long_term}, cascade_options);

  Tensor fused;
  if (ablation.cgdf) {
    if (params.fusion.context != ablation.fusion_context) {
      throw std::invalid_argument(
          std::string("Forward: parameters built for fusion context '") +
          FusionContextName(params.fusion.context) + "', ablation asks for '" +
          FusionContextName(ablation.fusion_context) + "'");
    }
    FusionInputs inputs{result.sifted_target,     user,
                        context,                  result.cascade.realtime,
                        result.cascade.short_term, result.cascade.long_term};
    FusionOptions options{hooks.view_logits, hooks.view_weights};
    result.fusion = FuseViews(params.fusion, inputs, options);
    fused = result.fusion->fused;
  } else {
    fused = HardConcat(result.cascade.realtime, result.cascade.short_term,
                       result.cascade.long_term);
  }

  const Tensor head_input =
      Concat({fused, user, context, result.sifted_target});
  result.logits = Reshape(MlpForward(params.head, head_input), {b});
  result.probabilities =
      Sigmoid(Clamp(result.logits, -kLogitClamp, kLogitClamp));
  return result;
}

Tensor BinaryCrossEntropy(const Tensor& probabilities,
                          std::span<const double> labels) {
  if (probabilities.rank() != 1 || probabilities.dim(0) != labels.size()) {
    throw ShapeError("BinaryCrossEntropy: " + std::to_string(labels.size()) +
                     " labels for predictions " +
                     ShapeToString(probabilities.shape()));
  }
  const std::size_t n = labels.size();
  const Tensor y = Tensor::FromData({n}, {labels.begin(), labels.end()});
  const Tensor one_minus_y = AddScalar(Scale(y, -1.0), 1.0);
  const Tensor p =
      Clamp(probabilities, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const Tensor log_p = Log(p);
  const Tensor log_not_p = Log(AddScalar(Scale(p, -1.0), 1.0));
  return Scale(Mean(Add(Mul(y, log_p), Mul(one_minus_y, log_not_p))), -1.0);
}

std::vector<double> Predict(const ModelParams& params,
                            const AblationConfig& ablation,
                            std::span<const Instance> instances,
                            std::size_t batch_size,
                            const ForwardHooks& hooks) {
  NoGradScope no_grad;
  std::vector<double> scores;
  scores.reserve(instances.size());
  if (batch_size == 0) batch_size = instances.size();
  for (std::size_t start = 0; start < instances.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, instances.size() - start);
    const Batch batch =
        MakeBatch(instances.subspan(start, n), params.config.vocab);
    const ForwardResult r = Forward(params, ablation, batch, hooks);
    const auto p = r.probabilities.data();
    scores.insert(scores.end(), p.begin(), p.end());
  }
  return scores;
}

}  // namespace gatedctr
