#include "headope/rewards.hpp"

#include <algorithm>
#include <cmath>

namespace headope {

ArchetypePosterior ArchetypePosterior::point_mass(int archetype) {
  if (archetype < 0 || archetype >= kNumArchetypes) {
    throw ContractError("point_mass: archetype index out of range");
  }
  ArchetypePosterior p;
  p.probs.fill(0.0);
  p.probs[static_cast<size_t>(archetype)] = 1.0;
  return p;
}

bool ArchetypePosterior::valid(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

double ArchetypePosterior::entropy_bits() const {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

int ArchetypePosterior::argmax() const {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double ArchetypePosterior::max_prob() const { return *std::max_element(probs.begin(), probs.end()); }

double tool_reward(Tool tool, ToolOutcome outcome) {
  const bool none = tool == Tool::None;
  if (none != (outcome == ToolOutcome::NotInvoked)) {
    throw ContractError("tool_reward: outcome '" + to_string(outcome) +
                        "' inconsistent with tool '" + to_string(tool) + "'");
  }
  switch (outcome) {
    case ToolOutcome::NotInvoked: return 0.0;
    case ToolOutcome::Success: return 1.0;
    case ToolOutcome::Failure: return -1.0;
  }
  throw ContractError("tool_reward: invalid outcome");
}

double engagement_reward(const TurnFeatures& f, Tool tool) {
  double v = -0.2 * std::min(f.latency_seconds / 30.0, 1.5);
  if (f.has_structure) v += 0.2;
  if (f.has_citation && tool == Tool::Search) v += 0.2;
  return std::clamp(v, -0.5, 0.5);
}

double compose_reward(const WeightTriple& w, const RewardComponents& c) {
  if (w.alpha < 0.0 || w.beta < 0.0 || w.gamma < 0.0) {
    throw ContractError("compose_reward: weights must be nonnegative");
  }
  if (!c.r_user.has_value()) {
    throw ContractError("compose_reward: r_user missing; unrated turns are handled upstream");
  }
  return w.alpha * (*c.r_user) + w.beta * c.r_tool + w.gamma * c.r_eng;
}

double curiosity_bonus(const ArchetypePosterior& prev, const ArchetypePosterior& curr) {
  if (!prev.valid(1e-6) || !curr.valid(1e-6)) {
    throw ContractError("curiosity_bonus: invalid posterior");
  }
  return std::max(0.0, prev.entropy_bits() - curr.entropy_bits());
}

double total_signal(double reward, int turn, const CuriositySchedule& schedule, double bonus) {
  if (turn < 1) throw ContractError("total_signal: turn must be >= 1");
  return reward + schedule.weight_at(turn) * bonus;
}

}  // namespace headope
