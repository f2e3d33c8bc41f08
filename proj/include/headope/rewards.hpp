#pragma once

#include <array>
#include <optional>

#include "headope/model.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// Typed per-turn reward signals and their personalized composition.
// ---------------------------------------------------------------------------

struct RewardComponents {
  std::optional<double> r_user;  // z-scored rating; absent on unrated turns
  double r_tool = 0.0;           // rubric value in {-1, 0, +1}
  double r_eng = 0.0;            // bounded engagement signal in [-0.5, +0.5]
};

// Fixed literacy-conditioned weights (alpha, beta, gamma) over
// (satisfaction, tool, engagement).
struct WeightTriple {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  static WeightTriple low_literacy() { return {0.6, 0.2, 0.2}; }
  static WeightTriple high_literacy() { return {0.3, 0.5, 0.2}; }
  static WeightTriple for_literacy(Literacy lit) {
    return lit == Literacy::Low ? low_literacy() : high_literacy();
  }
};

// Belief over the four user archetypes, canonical order (see archetype_index).
struct ArchetypePosterior {
  std::array<double, kNumArchetypes> probs{0.25, 0.25, 0.25, 0.25};

  static ArchetypePosterior uniform() { return {}; }
  static ArchetypePosterior point_mass(int archetype);

  bool valid(double tol = 1e-9) const;
  double entropy_bits() const;  // Shannon entropy, log base 2
  int argmax() const;
  double max_prob() const;
};

// Early-turn intrinsic weight: lambda while t <= horizon_k, zero after.
struct CuriositySchedule {
  double lambda = 0.1;
  int horizon_k = 2;

  double weight_at(int turn) const { return turn <= horizon_k ? lambda : 0.0; }
};

// Tool-outcome rubric: +1 success, -1 failure, 0 when no tool invoked.
// Throws ContractError when outcome is inconsistent with the tool head.
double tool_reward(Tool tool, ToolOutcome outcome);

// Bounded engagement signal:
//   clamp(-0.2 * min(latency/30, 1.5)
//         + 0.2 * [has_structure]
//         + 0.2 * [has_citation and tool == Search], -0.5, +0.5)
// Mild latency penalty, structure bonus, citation bonus gated on Search.
double engagement_reward(const TurnFeatures& features, Tool tool);

// alpha*r_user + beta*r_tool + gamma*r_eng. Requires r_user present;
// missingness is the OPE layer's concern.
double compose_reward(const WeightTriple& w, const RewardComponents& c);

// Information-gain bonus: max{0, H(prev) - H(curr)} in bits.
double curiosity_bonus(const ArchetypePosterior& prev, const ArchetypePosterior& curr);

// r + lambda_t * bonus with lambda_t from the schedule.
double total_signal(double reward, int turn, const CuriositySchedule& schedule, double bonus);

}  // namespace headope
