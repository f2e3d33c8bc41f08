#include <doctest.h>

#include "headope/rewards.hpp"
#include "headope/rng.hpp"

using namespace headope;

TEST_CASE("tool reward follows the outcome rubric") {
  CHECK(tool_reward(Tool::None, ToolOutcome::NotInvoked) == 0.0);
  CHECK(tool_reward(Tool::Search, ToolOutcome::Success) == 1.0);
  CHECK(tool_reward(Tool::Search, ToolOutcome::Failure) == -1.0);
  CHECK(tool_reward(Tool::Code, ToolOutcome::Success) == 1.0);
  CHECK(tool_reward(Tool::Code, ToolOutcome::Failure) == -1.0);
  CHECK(tool_reward(Tool::Email, ToolOutcome::Success) == 1.0);
  CHECK(tool_reward(Tool::Email, ToolOutcome::Failure) == -1.0);
}

TEST_CASE("tool reward rejects inconsistent outcome") {
  CHECK_THROWS_AS(tool_reward(Tool::None, ToolOutcome::Success), ContractError);
  CHECK_THROWS_AS(tool_reward(Tool::Code, ToolOutcome::NotInvoked), ContractError);
}

TEST_CASE("engagement reward worked values") {
  // Hand-evaluated: -0.2*min(latency/30, 1.5) + 0.2*structure + 0.2*(citation & Search).
  TurnFeatures quick;
  quick.latency_seconds = 5.0;
  quick.has_structure = true;
  quick.has_citation = true;
  CHECK(engagement_reward(quick, Tool::Search) == doctest::Approx(11.0 / 30.0).epsilon(1e-12));

  TurnFeatures slow;
  slow.latency_seconds = 60.0;
  CHECK(engagement_reward(slow, Tool::None) == doctest::Approx(-0.3).epsilon(1e-12));

  TurnFeatures mid;
  mid.latency_seconds = 20.0;
  mid.has_structure = true;
  CHECK(engagement_reward(mid, Tool::Code) == doctest::Approx(1.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("engagement citation bonus is gated on Search") {
  TurnFeatures f;
  f.latency_seconds = 5.0;
  f.has_citation = true;
  const double with_search = engagement_reward(f, Tool::Search);
  const double with_code = engagement_reward(f, Tool::Code);
  CHECK(with_search - with_code == doctest::Approx(0.2));
}

TEST_CASE("engagement reward stays in [-0.5, 0.5]") {
  Rng rng(77);
  for (int i = 0; i < 20000; ++i) {
    TurnFeatures f;
    f.latency_seconds = rng.uniform01() * 500.0;
    f.response_chars = static_cast<int>(rng.uniform_int(5000));
    f.has_structure = rng.bernoulli(0.5);
    f.has_citation = rng.bernoulli(0.5);
    const auto tool = static_cast<Tool>(rng.uniform_int(4));
    const double r = engagement_reward(f, tool);
    CHECK(r >= -0.5);
    CHECK(r <= 0.5);
  }
}

TEST_CASE("weight presets") {
  const WeightTriple low = WeightTriple::low_literacy();
  CHECK(low.alpha == 0.6);
  CHECK(low.beta == 0.2);
  CHECK(low.gamma == 0.2);
  const WeightTriple high = WeightTriple::high_literacy();
  CHECK(high.alpha == 0.3);
  CHECK(high.beta == 0.5);
  CHECK(high.gamma == 0.2);
  CHECK(low.alpha + low.beta + low.gamma == doctest::Approx(1.0));
  CHECK(high.alpha + high.beta + high.gamma == doctest::Approx(1.0));
  CHECK(WeightTriple::for_literacy(Literacy::Low).alpha == 0.6);
  CHECK(WeightTriple::for_literacy(Literacy::High).alpha == 0.3);
}

TEST_CASE("compose reward worked values") {
  CHECK(compose_reward({0.6, 0.2, 0.2}, {1.0, 1.0, 0.0}) == doctest::Approx(0.8));
  CHECK(compose_reward({0.3, 0.5, 0.2}, {0.0, -1.0, 0.0}) == doctest::Approx(-0.5));
  CHECK(compose_reward({0.0, 0.0, 0.0}, {3.0, 1.0, 0.2}) == 0.0);
  CHECK_THROWS_AS(compose_reward({0.5, 0.25, 0.25}, RewardComponents{}), ContractError);
}

TEST_CASE("compose reward is linear in each component") {
  Rng rng(123);
  for (int i = 0; i < 500; ++i) {
    WeightTriple w{rng.uniform01(), rng.uniform01(), rng.uniform01()};
    RewardComponents a{rng.normal(), rng.normal(), rng.normal()};
    RewardComponents b = a;
    const double delta = rng.normal();
    *b.r_user += delta;
    CHECK(compose_reward(w, b) - compose_reward(w, a) == doctest::Approx(w.alpha * delta));
    b = a;
    b.r_tool += delta;
    CHECK(compose_reward(w, b) - compose_reward(w, a) == doctest::Approx(w.beta * delta));
  }
}

TEST_CASE("posterior entropy anchors") {
  CHECK(ArchetypePosterior::uniform().entropy_bits() == doctest::Approx(2.0));
  CHECK(ArchetypePosterior::point_mass(2).entropy_bits() == doctest::Approx(0.0));
  CHECK(ArchetypePosterior::uniform().valid());
  CHECK_FALSE(ArchetypePosterior{{0.5, 0.5, 0.5, 0.5}}.valid());
}

TEST_CASE("curiosity bonus anchors") {
  const auto uniform = ArchetypePosterior::uniform();
  const auto point = ArchetypePosterior::point_mass(0);
  CHECK(curiosity_bonus(uniform, point) == doctest::Approx(2.0));
  CHECK(curiosity_bonus(uniform, uniform) == 0.0);
  CHECK(curiosity_bonus(point, uniform) == 0.0);  // negative gain floored
}

TEST_CASE("curiosity bonus is nonnegative and zero on identical posteriors") {
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    ArchetypePosterior a, b;
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k < kNumArchetypes; ++k) {
      a.probs[static_cast<size_t>(k)] = rng.uniform01() + 1e-6;
      b.probs[static_cast<size_t>(k)] = rng.uniform01() + 1e-6;
      sa += a.probs[static_cast<size_t>(k)];
      sb += b.probs[static_cast<size_t>(k)];
    }
    for (int k = 0; k < kNumArchetypes; ++k) {
      a.probs[static_cast<size_t>(k)] /= sa;
      b.probs[static_cast<size_t>(k)] /= sb;
    }
    CHECK(curiosity_bonus(a, b) >= 0.0);
    CHECK(curiosity_bonus(a, a) == 0.0);
  }
}

TEST_CASE("total signal applies the schedule") {
  const CuriositySchedule s{0.1, 2};
  CHECK(total_signal(0.5, 1, s, 2.0) == doctest::Approx(0.7));
  CHECK(total_signal(0.5, 3, s, 2.0) == doctest::Approx(0.5));
  CHECK(total_signal(0.5, 2, s, 0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(total_signal(0.5, 0, s, 1.0), ContractError);
}
