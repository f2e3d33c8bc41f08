#include "headope/model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace headope {

using nlohmann::json;

ActionPair ActionPair::from_joint_index(int idx) {
  if (idx < 0 || idx >= kNumJointActions) throw ContractError("joint action index out of range");
  return ActionPair{static_cast<Tool>(idx / kNumStyles), static_cast<Style>(idx % kNumStyles)};
}

int archetype_index(Literacy lit, Efficacy eff) {
  if (lit == Literacy::High) return eff == Efficacy::High ? 0 : 1;
  return eff == Efficacy::High ? 3 : 2;
}

Literacy archetype_literacy(int a) { return (a == 0 || a == 1) ? Literacy::High : Literacy::Low; }
Efficacy archetype_efficacy(int a) { return (a == 0 || a == 3) ? Efficacy::High : Efficacy::Low; }

const std::string& archetype_name(int archetype) {
  static const std::array<std::string, kNumArchetypes> names = {
      "L_high_E_high", "L_high_E_low", "L_low_E_low", "L_low_E_high"};
  if (archetype < 0 || archetype >= kNumArchetypes) throw ContractError("archetype index out of range");
  return names[static_cast<size_t>(archetype)];
}

std::string to_string(Tool t) {
  switch (t) {
    case Tool::None: return "none";
    case Tool::Search: return "search";
    case Tool::Code: return "code";
    case Tool::Email: return "email";
  }
  throw ContractError("invalid Tool");
}

std::string to_string(Style s) { return s == Style::Concise ? "concise" : "detailed"; }

std::string to_string(ToolOutcome o) {
  switch (o) {
    case ToolOutcome::NotInvoked: return "not_invoked";
    case ToolOutcome::Success: return "success";
    case ToolOutcome::Failure: return "failure";
  }
  throw ContractError("invalid ToolOutcome");
}

std::string to_string(Literacy l) { return l == Literacy::Low ? "low" : "high"; }
std::string to_string(Efficacy e) { return e == Efficacy::Low ? "low" : "high"; }

Tool tool_from_string(const std::string& s) {
  if (s == "none") return Tool::None;
  if (s == "search") return Tool::Search;
  if (s == "code") return Tool::Code;
  if (s == "email") return Tool::Email;
  // Closed rubric: unknown tool names are rejected, not coerced.
  throw ValidationError("unknown tool name: '" + s + "'");
}

Style style_from_string(const std::string& s) {
  if (s == "concise") return Style::Concise;
  if (s == "detailed") return Style::Detailed;
  throw ValidationError("unknown style name: '" + s + "'");
}

ToolOutcome outcome_from_string(const std::string& s) {
  if (s == "not_invoked") return ToolOutcome::NotInvoked;
  if (s == "success") return ToolOutcome::Success;
  if (s == "failure") return ToolOutcome::Failure;
  throw ValidationError("unknown tool_outcome: '" + s + "'");
}

Literacy literacy_from_string(const std::string& s) {
  if (s == "low") return Literacy::Low;
  if (s == "high") return Literacy::High;
  throw ValidationError("literacy must be 'low' or 'high', got '" + s + "'");
}

Efficacy efficacy_from_string(const std::string& s) {
  if (s == "low") return Efficacy::Low;
  if (s == "high") return Efficacy::High;
  throw ValidationError("efficacy must be 'low' or 'high', got '" + s + "'");
}

namespace {

struct RawRecord {
  UserProfile user;
  LoggedTurn turn;
};

RawRecord decode_record(const json& j, size_t line_no) {
  auto require = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end()) {
      throw ParseError("line " + std::to_string(line_no) + ": missing field '" + field + "'");
    }
    return *it;
  };

  RawRecord rec;
  try {
    rec.turn.session_id = require("session_id").get<std::string>();
    rec.user.user_id = require("user_id").get<std::string>();
    rec.user.literacy = literacy_from_string(require("literacy").get<std::string>());
    rec.user.efficacy = efficacy_from_string(require("efficacy").get<std::string>());

    TurnFeatures& f = rec.turn.features;
    f.turn_index = require("turn_index").get<int>();
    f.latency_seconds = require("latency_seconds").get<double>();
    f.response_chars = require("response_chars").get<int>();
    f.has_citation = require("has_citation").get<bool>();
    f.has_structure = require("has_structure").get<bool>();
    f.user_asked_explain = require("user_asked_explain").get<bool>();

    rec.turn.action.tool = tool_from_string(require("tool").get<std::string>());
    rec.turn.action.style = style_from_string(require("style").get<std::string>());
    rec.turn.outcome = outcome_from_string(require("tool_outcome").get<std::string>());

    if (auto it = j.find("rating"); it != j.end() && !it->is_null()) {
      rec.turn.rating = it->get<int>();
    }
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
  }

  const std::string where = "session '" + rec.turn.session_id + "' (line " + std::to_string(line_no) + ")";
  if (rec.turn.rating && (*rec.turn.rating < 1 || *rec.turn.rating > 5)) {
    throw ValidationError(where + ": rating out of range [1,5]: " + std::to_string(*rec.turn.rating));
  }
  if (rec.turn.features.turn_index < 1) {
    throw ValidationError(where + ": turn_index must be >= 1");
  }
  if (rec.turn.features.latency_seconds < 0.0) {
    throw ValidationError(where + ": latency_seconds must be nonnegative");
  }
  if (rec.turn.features.response_chars < 0) {
    throw ValidationError(where + ": response_chars must be nonnegative");
  }
  const bool none_tool = rec.turn.action.tool == Tool::None;
  const bool not_invoked = rec.turn.outcome == ToolOutcome::NotInvoked;
  if (none_tool != not_invoked) {
    throw ValidationError(where + ": tool_outcome must be 'not_invoked' iff tool is 'none'");
  }
  return rec;
}

json encode_record(const Session& s, const LoggedTurn& t) {
  json j;
  j["session_id"] = t.session_id;
  j["user_id"] = s.user.user_id;
  j["literacy"] = to_string(s.user.literacy);
  j["efficacy"] = to_string(s.user.efficacy);
  j["turn_index"] = t.features.turn_index;
  j["latency_seconds"] = t.features.latency_seconds;
  j["response_chars"] = t.features.response_chars;
  j["has_citation"] = t.features.has_citation;
  j["has_structure"] = t.features.has_structure;
  j["user_asked_explain"] = t.features.user_asked_explain;
  j["tool"] = to_string(t.action.tool);
  j["style"] = to_string(t.action.style);
  j["tool_outcome"] = to_string(t.outcome);
  if (t.rating) j["rating"] = *t.rating;
  return j;
}

}  // namespace

std::vector<Session> parse_log(std::istream& in) {
  std::map<std::string, Session> by_id;  // sorted by session_id for order-insensitive parsing
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Tolerate blank lines and trailing whitespace-only lines.
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed JSON record");
    }
    RawRecord rec = decode_record(j, line_no);
    auto [it, inserted] = by_id.try_emplace(rec.turn.session_id);
    Session& s = it->second;
    if (inserted) {
      s.session_id = rec.turn.session_id;
      s.user = rec.user;
    } else if (!(s.user == rec.user)) {
      throw ValidationError("session '" + s.session_id + "': records disagree on user profile");
    }
    s.turns.push_back(std::move(rec.turn));
  }

  std::vector<Session> sessions;
  sessions.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    std::stable_sort(s.turns.begin(), s.turns.end(), [](const LoggedTurn& a, const LoggedTurn& b) {
      return a.features.turn_index < b.features.turn_index;
    });
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<Session> parse_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open log file: " + path);
  return parse_log(in);
}

void write_log(std::ostream& out, std::span<const Session> sessions) {
  for (const Session& s : sessions) {
    for (const LoggedTurn& t : s.turns) {
      out << encode_record(s, t).dump() << '\n';
    }
  }
}

std::string write_log_string(std::span<const Session> sessions) {
  std::ostringstream os;
  write_log(os, sessions);
  return os.str();
}

ValidationReport validate_sessions(std::span<const Session> sessions) {
  ValidationReport r;
  r.n_sessions = sessions.size();
  std::set<std::string> users;
  for (const Session& s : sessions) {
    users.insert(s.user.user_id);
    int expected = 1;
    std::set<int> seen;
    for (const LoggedTurn& t : s.turns) {
      ++r.n_turns;
      if (t.rated()) ++r.n_rated;
      const int idx = t.features.turn_index;
      if (!seen.insert(idx).second || idx != expected) {
        ++r.turn_index_conflicts;
        r.warnings.push_back("session '" + s.session_id + "': turn_index conflict at " +
                             std::to_string(idx));
      }
      expected = idx + 1;
    }
    if (s.turns.empty()) {
      r.warnings.push_back("session '" + s.session_id + "': empty session");
    }
  }
  r.n_users = users.size();
  r.rating_rate = r.n_turns == 0 ? 0.0 : static_cast<double>(r.n_rated) / static_cast<double>(r.n_turns);
  return r;
}

size_t total_turns(std::span<const Session> sessions) {
  size_t n = 0;
  for (const Session& s : sessions) n += s.turns.size();
  return n;
}

}  // namespace headope
