#include <doctest.h>

#include <sstream>

#include "headope/model.hpp"
#include "headope/rng.hpp"
#include "headope/synth.hpp"

using namespace headope;

namespace {

const char* kRecord =
    R"({"session_id":"s1","user_id":"u1","literacy":"high","efficacy":"low","turn_index":1,)"
    R"("latency_seconds":4.5,"response_chars":820,"has_citation":true,"has_structure":false,)"
    R"("user_asked_explain":false,"tool":"search","style":"concise","tool_outcome":"success","rating":5})";

std::string patched(const std::string& from, const std::string& to) {
  std::string s = kRecord;
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  s.replace(at, from.size(), to);
  return s;
}

}  // namespace

TEST_CASE("parse a single well-formed record") {
  std::istringstream in(kRecord);
  const auto sessions = parse_log(in);
  REQUIRE(sessions.size() == 1);
  const Session& s = sessions[0];
  CHECK(s.session_id == "s1");
  CHECK(s.user.user_id == "u1");
  CHECK(s.user.literacy == Literacy::High);
  CHECK(s.user.efficacy == Efficacy::Low);
  REQUIRE(s.turns.size() == 1);
  const LoggedTurn& t = s.turns[0];
  CHECK(t.rated());
  CHECK(*t.rating == 5);
  CHECK(t.action.tool == Tool::Search);
  CHECK(t.action.style == Style::Concise);
  CHECK(t.outcome == ToolOutcome::Success);
  CHECK(t.features.latency_seconds == doctest::Approx(4.5));
}

TEST_CASE("absent rating means unrated") {
  std::istringstream in(patched(",\"rating\":5", ""));
  const auto sessions = parse_log(in);
  REQUIRE(sessions.size() == 1);
  CHECK_FALSE(sessions[0].turns[0].rated());
  CHECK_FALSE(sessions[0].turns[0].rating.has_value());
}

TEST_CASE("rating out of range is rejected") {
  std::istringstream in(patched("\"rating\":5", "\"rating\":7"));
  CHECK_THROWS_WITH_AS(parse_log(in),
                       doctest::Contains("rating out of range"), ValidationError);
}

TEST_CASE("malformed JSON names the line") {
  std::istringstream in(std::string(kRecord) + "\n{not json\n");
  CHECK_THROWS_WITH_AS(parse_log(in), doctest::Contains("line 2"), ParseError);
}

TEST_CASE("missing field names the line") {
  std::istringstream in(patched("\"tool\":\"search\",", ""));
  CHECK_THROWS_WITH_AS(parse_log(in), doctest::Contains("missing field 'tool'"), ParseError);
}

TEST_CASE("unknown tool names are rejected, not coerced") {
  std::istringstream in(patched("\"tool\":\"search\"", "\"tool\":\"calendar\""));
  CHECK_THROWS_WITH_AS(parse_log(in), doctest::Contains("unknown tool"), ValidationError);
}

TEST_CASE("outcome must be consistent with the tool head") {
  std::istringstream bad1(patched("\"tool_outcome\":\"success\"", "\"tool_outcome\":\"not_invoked\""));
  CHECK_THROWS_AS(parse_log(bad1), ValidationError);
  std::istringstream bad2(
      patched("\"tool\":\"search\",\"style\":\"concise\",\"tool_outcome\":\"success\"",
              "\"tool\":\"none\",\"style\":\"concise\",\"tool_outcome\":\"failure\""));
  CHECK_THROWS_AS(parse_log(bad2), ValidationError);
}

TEST_CASE("sessions disagreeing on the user profile are rejected") {
  std::string two = std::string(kRecord) + "\n" +
                    patched("\"literacy\":\"high\"", "\"literacy\":\"low\"");
  // Same session_id, different literacy: second record must use turn 2 to
  // reach the user check rather than a duplicate-turn path.
  const auto at = two.rfind("\"turn_index\":1");
  two.replace(at, 14, "\"turn_index\":2");
  std::istringstream in(two);
  CHECK_THROWS_WITH_AS(parse_log(in), doctest::Contains("disagree"), ValidationError);
}

TEST_CASE("round trip and shuffle invariance on a synthetic log") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 21u);
  const std::string text = write_log_string(result.sessions);

  std::istringstream in(text);
  const auto parsed = parse_log(in);
  REQUIRE(parsed.size() == result.sessions.size());
  CHECK(parsed == result.sessions);

  // Shuffle the record lines; parsing must give the identical structure.
  std::vector<std::string> lines;
  std::istringstream splitter(text);
  std::string line;
  while (std::getline(splitter, line)) lines.push_back(line);
  Rng rng(5);
  rng.shuffle(std::span<std::string>(lines));
  std::string shuffled;
  for (const auto& l : lines) shuffled += l + "\n";
  std::istringstream sin(shuffled);
  CHECK(parse_log(sin) == parsed);
}

TEST_CASE("validate_sessions reports the rating rate exactly") {
  // 23 sessions; 350 turns; 280 rated -> 0.80.
  std::vector<Session> sessions;
  size_t turn_count = 0, rated_count = 0;
  for (int s = 0; s < 23; ++s) {
    Session session;
    session.session_id = "s" + std::to_string(s);
    session.user = {"u" + std::to_string(s % 7), Literacy::Low, Efficacy::High};
    const int turns = s < 5 ? 16 : 15;  // 5*16 + 18*15 = 350
    for (int t = 1; t <= turns; ++t) {
      LoggedTurn turn;
      turn.session_id = session.session_id;
      turn.features.turn_index = t;
      if (rated_count < 280 && turn_count % 5 != 4) {
        turn.rating = 4;
        ++rated_count;
      }
      ++turn_count;
      session.turns.push_back(turn);
    }
    sessions.push_back(session);
  }
  REQUIRE(turn_count == 350);
  REQUIRE(rated_count == 280);
  const ValidationReport report = validate_sessions(sessions);
  CHECK(report.n_sessions == 23);
  CHECK(report.n_turns == 350);
  CHECK(report.n_rated == 280);
  CHECK(report.rating_rate == doctest::Approx(0.80).epsilon(1e-12));
  CHECK(report.turn_index_conflicts == 0);
}

TEST_CASE("validate_sessions: all rated gives rate 1") {
  Session s;
  s.session_id = "s";
  for (int t = 1; t <= 4; ++t) {
    LoggedTurn turn;
    turn.session_id = "s";
    turn.features.turn_index = t;
    turn.rating = 3;
    s.turns.push_back(turn);
  }
  const auto report = validate_sessions(std::vector<Session>{s});
  CHECK(report.rating_rate == 1.0);
}

TEST_CASE("validate_sessions counts turn-index conflicts") {
  Session s;
  s.session_id = "s";
  for (int t : {1, 2, 2, 3}) {
    LoggedTurn turn;
    turn.session_id = "s";
    turn.features.turn_index = t;
    s.turns.push_back(turn);
  }
  CHECK(validate_sessions(std::vector<Session>{s}).turn_index_conflicts == 1);
}

TEST_CASE("archetype indexing is consistent") {
  CHECK(archetype_index(Literacy::High, Efficacy::High) == 0);
  CHECK(archetype_index(Literacy::High, Efficacy::Low) == 1);
  CHECK(archetype_index(Literacy::Low, Efficacy::Low) == 2);
  CHECK(archetype_index(Literacy::Low, Efficacy::High) == 3);
  for (int a = 0; a < kNumArchetypes; ++a) {
    CHECK(archetype_index(archetype_literacy(a), archetype_efficacy(a)) == a);
  }
  CHECK(archetype_name(3) == "L_low_E_high");
}

TEST_CASE("joint action index round trip") {
  for (int j = 0; j < kNumJointActions; ++j) {
    CHECK(ActionPair::from_joint_index(j).joint_index() == j);
  }
  CHECK(ActionPair{Tool::Search, Style::Detailed}.joint_index() == 3);
}
