#include "headope/policies.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace headope {

using nlohmann::json;

PolicyKind policy_kind_from_string(const std::string& name) {
  if (name == "no_tool") return PolicyKind::NoTool;
  if (name == "always_tool") return PolicyKind::AlwaysTool;
  if (name == "heuristic_gated") return PolicyKind::HeuristicGated;
  if (name == "personalized_weights") return PolicyKind::PersonalizedWeights;
  if (name == "custom") return PolicyKind::Custom;
  throw UsageError("unknown policy '" + name +
                   "' (expected no_tool|always_tool|heuristic_gated|personalized_weights|custom)");
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::NoTool: return "no_tool";
    case PolicyKind::AlwaysTool: return "always_tool";
    case PolicyKind::HeuristicGated: return "heuristic_gated";
    case PolicyKind::PersonalizedWeights: return "personalized_weights";
    case PolicyKind::Custom: return "custom";
  }
  throw ContractError("invalid PolicyKind");
}

LogPolicyStats LogPolicyStats::from_sessions(std::span<const Session> sessions) {
  LogPolicyStats stats;
  std::array<double, kNumTools> counts{};
  double total = 0.0;
  for (const Session& s : sessions) {
    for (const LoggedTurn& t : s.turns) {
      if (t.action.tool != Tool::None) {
        counts[static_cast<size_t>(t.action.tool)] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) {
    stats.conditional_degenerate = true;
    return stats;  // keep the uniform fallback
  }
  stats.tool_conditional.fill(0.0);
  for (size_t c = 1; c < kNumTools; ++c) stats.tool_conditional[c] = counts[c] / total;
  return stats;
}

namespace {

// Shared style rule: detailed iff the user asked for an explanation.
std::array<double, kNumStyles> heuristic_style(const FeatureVector& x) {
  if (x.user_asked_explain >= 0.5) return {0.0, 1.0};
  return {1.0, 0.0};
}

// Gate of the rule-based policies: tools only early in the session and
// not right after a failure.
bool heuristic_gate_open(const FeatureVector& x, int gate_turn_limit) {
  return x.turn_index <= static_cast<double>(gate_turn_limit) && x.prev_outcome > -0.5;
}

// Tool picked when the gate fires: Search when the user's ask suggests
// citations are wanted, otherwise Code.
Tool gated_tool_choice(const FeatureVector& x) {
  return x.user_asked_explain >= 0.5 ? Tool::Search : Tool::Code;
}

std::array<double, kNumStyles> smooth_style(std::array<double, kNumStyles> p, double eps) {
  floor_distribution(std::span<double>(p.data(), p.size()), eps);
  return p;
}

class NoToolPolicy final : public Policy {
 public:
  explicit NoToolPolicy(const PolicySpec& spec) : spec_(spec) {}
  const std::string& name() const override { return name_; }

  HeadProbs probs(const FeatureVector& x) const override {
    HeadProbs p;
    p.tool = {1.0, 0.0, 0.0, 0.0};
    p.style = heuristic_style(x);
    return p;
  }

  HeadProbs ratio_probs(const FeatureVector& x) const override {
    HeadProbs p = probs(x);
    // Tool head left unsmoothed: zero mass on tool turns is the
    // counterfactual being evaluated.
    p.style = smooth_style(p.style, spec_.smooth_eps);
    return p;
  }

 private:
  std::string name_ = "no_tool";
  PolicySpec spec_;
};

class AlwaysToolPolicy final : public Policy {
 public:
  AlwaysToolPolicy(const PolicySpec& spec, const LogPolicyStats& stats)
      : spec_(spec), conditional_(stats.tool_conditional) {}
  const std::string& name() const override { return name_; }

  HeadProbs probs(const FeatureVector& x) const override {
    HeadProbs p;
    p.tool = conditional_;
    p.tool[static_cast<size_t>(Tool::None)] = 0.0;
    p.style = heuristic_style(x);
    return p;
  }

  HeadProbs ratio_probs(const FeatureVector& x) const override {
    HeadProbs p = probs(x);
    // Smooth within the three tool cells; None stays exactly zero.
    std::span<double> tools(p.tool.data() + 1, kNumTools - 1);
    floor_distribution(tools, spec_.smooth_eps);
    p.style = smooth_style(p.style, spec_.smooth_eps);
    return p;
  }

 private:
  std::string name_ = "always_tool";
  PolicySpec spec_;
  std::array<double, kNumTools> conditional_;
};

class HeuristicGatedPolicy final : public Policy {
 public:
  explicit HeuristicGatedPolicy(const PolicySpec& spec) : spec_(spec) {}
  const std::string& name() const override { return name_; }

  HeadProbs probs(const FeatureVector& x) const override {
    HeadProbs p;
    p.tool.fill(0.0);
    if (heuristic_gate_open(x, spec_.gate_turn_limit)) {
      p.tool[static_cast<size_t>(gated_tool_choice(x))] = 1.0;
    } else {
      p.tool[static_cast<size_t>(Tool::None)] = 1.0;
    }
    p.style = heuristic_style(x);
    return p;
  }

  HeadProbs ratio_probs(const FeatureVector& x) const override {
    HeadProbs p = probs(x);
    floor_distribution(std::span<double>(p.tool.data(), p.tool.size()), spec_.smooth_eps);
    p.style = smooth_style(p.style, spec_.smooth_eps);
    return p;
  }

 private:
  std::string name_ = "heuristic_gated";
  PolicySpec spec_;
};

class PersonalizedWeightsPolicy final : public Policy {
 public:
  explicit PersonalizedWeightsPolicy(const PolicySpec& spec) : spec_(spec) {}
  const std::string& name() const override { return name_; }

  HeadProbs probs(const FeatureVector& x) const override {
    const double base = heuristic_gate_open(x, spec_.gate_turn_limit) ? 1.0 : 0.0;
    // High literacy lowers the gate (more tools), low literacy raises it.
    const double shift = x.literacy_high >= 0.5 ? spec_.literacy_gate_shift
                                                : -spec_.literacy_gate_shift;
    const double invoke = std::clamp(base + shift, 0.0, 1.0);
    HeadProbs p;
    p.tool.fill(0.0);
    p.tool[static_cast<size_t>(Tool::None)] = 1.0 - invoke;
    p.tool[static_cast<size_t>(gated_tool_choice(x))] += invoke;
    p.style = heuristic_style(x);
    return p;
  }

  HeadProbs ratio_probs(const FeatureVector& x) const override {
    HeadProbs p = probs(x);
    floor_distribution(std::span<double>(p.tool.data(), p.tool.size()), spec_.smooth_eps);
    p.style = smooth_style(p.style, spec_.smooth_eps);
    return p;
  }

 private:
  std::string name_ = "personalized_weights";
  PolicySpec spec_;
};

// Declarative per-head probability tables keyed on discretized features.
// Config schema:
//   { "tool":  [ {"when": {<field>: <bool>, ...}, "probs": {"none":.., "search":.., ...}}, ... ],
//     "style": [ {"when": {...}, "probs": {"concise":.., "detailed":..}}, ... ] }
// Supported "when" fields: literacy_high, efficacy_high, user_asked_explain,
// gate_open (turn_index <= 10), prev_failure. Rows are matched first-to-last;
// a row with an empty/omitted "when" is the default and must exist.
class CustomTablePolicy final : public Policy {
 public:
  CustomTablePolicy(const PolicySpec& spec) : spec_(spec) {
    json cfg = json::parse(spec.custom_config_json, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
      throw UsageError("custom policy: config is not a JSON object");
    }
    parse_rows(cfg, "tool", tool_rows_);
    parse_rows(cfg, "style", style_rows_);
  }

  const std::string& name() const override { return name_; }

  HeadProbs probs(const FeatureVector& x) const override {
    HeadProbs p;
    p.tool = match(tool_rows_, x).tool_probs;
    p.style = match(style_rows_, x).style_probs;
    return p;
  }

  HeadProbs ratio_probs(const FeatureVector& x) const override {
    HeadProbs p = probs(x);
    floor_distribution(std::span<double>(p.tool.data(), p.tool.size()), spec_.smooth_eps);
    p.style = smooth_style(p.style, spec_.smooth_eps);
    return p;
  }

 private:
  struct Row {
    std::vector<std::pair<std::string, bool>> conditions;
    std::array<double, kNumTools> tool_probs{};
    std::array<double, kNumStyles> style_probs{};
  };

  static double field_value(const FeatureVector& x, const std::string& field) {
    if (field == "literacy_high") return x.literacy_high;
    if (field == "efficacy_high") return x.efficacy_high;
    if (field == "user_asked_explain") return x.user_asked_explain;
    if (field == "gate_open") return x.turn_index <= 10.0 && x.prev_outcome > -0.5 ? 1.0 : 0.0;
    if (field == "prev_failure") return x.prev_outcome < -0.5 ? 1.0 : 0.0;
    throw UsageError("custom policy: unknown 'when' field '" + field + "'");
  }

  void parse_rows(const json& cfg, const std::string& head, std::vector<Row>& out) {
    if (!cfg.contains(head) || !cfg[head].is_array() || cfg[head].empty()) {
      throw UsageError("custom policy: missing '" + head + "' table");
    }
    bool has_default = false;
    for (const json& row_json : cfg[head]) {
      Row row;
      if (row_json.contains("when")) {
        for (auto& [k, v] : row_json["when"].items()) {
          row.conditions.emplace_back(k, v.get<bool>());
        }
      }
      if (row.conditions.empty()) has_default = true;
      const json& probs = row_json.at("probs");
      double sum = 0.0;
      if (head == "tool") {
        for (int c = 0; c < kNumTools; ++c) {
          const double p = probs.value(to_string(static_cast<Tool>(c)), 0.0);
          if (p < 0.0) throw UsageError("custom policy: negative probability");
          row.tool_probs[static_cast<size_t>(c)] = p;
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw UsageError("custom policy: tool probs must sum to 1");
      } else {
        for (int c = 0; c < kNumStyles; ++c) {
          const double p = probs.value(to_string(static_cast<Style>(c)), 0.0);
          if (p < 0.0) throw UsageError("custom policy: negative probability");
          row.style_probs[static_cast<size_t>(c)] = p;
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw UsageError("custom policy: style probs must sum to 1");
      }
      out.push_back(std::move(row));
    }
    if (!has_default) throw UsageError("custom policy: '" + head + "' table needs a default row");
  }

  const Row& match(const std::vector<Row>& rows, const FeatureVector& x) const {
    for (const Row& row : rows) {
      bool ok = true;
      for (const auto& [field, want] : row.conditions) {
        if ((field_value(x, field) >= 0.5) != want) {
          ok = false;
          break;
        }
      }
      if (ok) return row;
    }
    throw ContractError("custom policy: no matching row (default guaranteed at parse)");
  }

  std::string name_ = "custom";
  PolicySpec spec_;
  std::vector<Row> tool_rows_;
  std::vector<Row> style_rows_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const LogPolicyStats& stats) {
  if (spec.smooth_eps < 0.0 || spec.smooth_eps >= 0.2) {
    throw UsageError("policy smooth_eps must be in [0, 0.2)");
  }
  switch (spec.kind) {
    case PolicyKind::NoTool: return std::make_unique<NoToolPolicy>(spec);
    case PolicyKind::AlwaysTool: return std::make_unique<AlwaysToolPolicy>(spec, stats);
    case PolicyKind::HeuristicGated: return std::make_unique<HeuristicGatedPolicy>(spec);
    case PolicyKind::PersonalizedWeights: return std::make_unique<PersonalizedWeightsPolicy>(spec);
    case PolicyKind::Custom: return std::make_unique<CustomTablePolicy>(spec);
  }
  throw ContractError("invalid PolicyKind");
}

BehaviorMirrorPolicy::BehaviorMirrorPolicy(const HeadPropensityModel* tool_model,
                                           const HeadPropensityModel* style_model)
    : tool_model_(tool_model), style_model_(style_model) {
  if (tool_model == nullptr || style_model == nullptr) {
    throw ContractError("behavior mirror: models required");
  }
}

HeadProbs BehaviorMirrorPolicy::probs_for_turn(size_t turn_index) const {
  HeadProbs p;
  p.tool = tool_model_->at(turn_index);
  const auto style = style_model_->at(turn_index);
  p.style = {style[0], style[1]};
  return p;
}

HeadProbs BehaviorMirrorPolicy::probs(const FeatureVector&) const {
  throw ContractError("behavior mirror is defined per logged turn; use probs_for_turn");
}

HeadProbs BehaviorMirrorPolicy::ratio_probs(const FeatureVector& x) const { return probs(x); }

ImportanceRatio ImportanceRatio::from_raw(double raw, double c) {
  if (!(c > 0.0)) throw ContractError("importance ratio: clip level must be > 0");
  if (!(raw >= 0.0) || !std::isfinite(raw)) throw ContractError("importance ratio: bad raw value");
  ImportanceRatio r;
  r.raw = raw;
  r.clip_hit = raw > c;
  r.clipped = r.clip_hit ? c : raw;
  return r;
}

ImportanceRatio importance_ratio(const HeadProbs& target,
                                 const std::array<double, kNumTools>& behavior_tool,
                                 const std::array<double, kNumStyles>& behavior_style,
                                 const ActionPair& logged_action, double c, double floor_eps) {
  const auto tool_idx = static_cast<size_t>(logged_action.tool);
  const auto style_idx = static_cast<size_t>(logged_action.style);
  const double b_tool = behavior_tool[tool_idx];
  const double b_style = behavior_style[style_idx];
  // Floored behavior models guarantee this never fires.
  if (b_tool < floor_eps * (1.0 - 1e-9) || b_style < floor_eps * (1.0 - 1e-9)) {
    throw ContractError("importance_ratio: behavior propensity below floor");
  }
  const double raw = (target.tool[tool_idx] / b_tool) * (target.style[style_idx] / b_style);
  return ImportanceRatio::from_raw(raw, c);
}

}  // namespace headope
