#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "headope/errors.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// Factorized action space: two discrete decision heads.
// ---------------------------------------------------------------------------

enum class Tool : uint8_t { None = 0, Search = 1, Code = 2, Email = 3 };
enum class Style : uint8_t { Concise = 0, Detailed = 1 };

inline constexpr int kNumTools = 4;
inline constexpr int kNumStyles = 2;
inline constexpr int kNumJointActions = kNumTools * kNumStyles;

struct ActionPair {
  Tool tool = Tool::None;
  Style style = Style::Concise;

  // Flat index into the 4x2 joint action space.
  int joint_index() const { return static_cast<int>(tool) * kNumStyles + static_cast<int>(style); }
  static ActionPair from_joint_index(int idx);

  bool operator==(const ActionPair&) const = default;
};

enum class ToolOutcome : uint8_t { NotInvoked = 0, Success = 1, Failure = 2 };

// ---------------------------------------------------------------------------
// Users and archetypes.
// ---------------------------------------------------------------------------

enum class Literacy : uint8_t { Low = 0, High = 1 };
enum class Efficacy : uint8_t { Low = 0, High = 1 };

inline constexpr int kNumArchetypes = 4;

// Canonical archetype order used by every 4-vector in the project:
//   0: L_high x E_high   1: L_high x E_low   2: L_low x E_low   3: L_low x E_high
int archetype_index(Literacy lit, Efficacy eff);
Literacy archetype_literacy(int archetype);
Efficacy archetype_efficacy(int archetype);
const std::string& archetype_name(int archetype);

struct UserProfile {
  std::string user_id;
  Literacy literacy = Literacy::Low;
  Efficacy efficacy = Efficacy::Low;

  int archetype() const { return archetype_index(literacy, efficacy); }
  bool operator==(const UserProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Logged turns and sessions.
// ---------------------------------------------------------------------------

struct TurnFeatures {
  int turn_index = 1;             // 1-based within a session
  double latency_seconds = 0.0;
  int response_chars = 0;
  bool has_citation = false;
  bool has_structure = false;
  bool user_asked_explain = false;

  bool operator==(const TurnFeatures&) const = default;
};

struct LoggedTurn {
  std::string session_id;
  TurnFeatures features;
  ActionPair action;
  ToolOutcome outcome = ToolOutcome::NotInvoked;
  std::optional<int> rating;  // 1..5 when present

  bool rated() const { return rating.has_value(); }
  bool operator==(const LoggedTurn&) const = default;
};

// Unit of bootstrap resampling. Turns are kept sorted by turn_index.
struct Session {
  std::string session_id;
  UserProfile user;
  std::vector<LoggedTurn> turns;

  bool operator==(const Session&) const = default;
};

// ---------------------------------------------------------------------------
// Enum <-> wire-format names (the newline-delimited JSON log schema).
// ---------------------------------------------------------------------------

std::string to_string(Tool t);
std::string to_string(Style s);
std::string to_string(ToolOutcome o);
std::string to_string(Literacy l);
std::string to_string(Efficacy e);

Tool tool_from_string(const std::string& s);
Style style_from_string(const std::string& s);
ToolOutcome outcome_from_string(const std::string& s);
Literacy literacy_from_string(const std::string& s);
Efficacy efficacy_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Log ingestion / validation.
// ---------------------------------------------------------------------------

// Parses newline-delimited JSON, one object per turn. Groups records by
// session_id (sessions ordered by first appearance is NOT guaranteed stable
// across shuffles, so sessions are returned sorted by session_id) and sorts
// turns by turn_index. Per-record invariants are enforced here; turn-index
// duplicates/gaps are tolerated and surfaced by validate_sessions().
//
// Throws ParseError (naming the line number) on malformed records and
// ValidationError (naming the session) on invariant violations.
std::vector<Session> parse_log(std::istream& in);
std::vector<Session> parse_log_file(const std::string& path);

// Serializes sessions back to the wire format; parse_log(write_log(s)) == s.
void write_log(std::ostream& out, std::span<const Session> sessions);
std::string write_log_string(std::span<const Session> sessions);

struct ValidationReport {
  size_t n_sessions = 0;
  size_t n_users = 0;
  size_t n_turns = 0;
  size_t n_rated = 0;
  double rating_rate = 0.0;           // n_rated / n_turns, 0 when empty
  size_t turn_index_conflicts = 0;    // duplicate or non-contiguous turn indices
  std::vector<std::string> warnings;
};

// Report-only data-quality summary; never throws.
ValidationReport validate_sessions(std::span<const Session> sessions);

size_t total_turns(std::span<const Session> sessions);

}  // namespace headope
