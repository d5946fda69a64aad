#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

namespace interleaf {

/// Word classes for the rule-based noun-phrase grammar. All entries are
/// lowercase single words.
struct Lexicon {
  std::set<std::string, std::less<>> determiners;
  std::set<std::string, std::less<>> adjectives;
  std::set<std::string, std::less<>> nouns;
  /// Prepositions that only ever introduce a postmodifier ("near", "beside").
  std::set<std::string, std::less<>> locative_prepositions;
  /// Prepositions that can mark the goal argument of the verb ("into", "on").
  /// The first one after an object phrase separates arguments; later ones
  /// attach as postmodifiers.
  std::set<std::string, std::less<>> goal_prepositions;

  bool is_determiner(std::string_view w) const { return determiners.contains(w); }
  bool is_adjective(std::string_view w) const { return adjectives.contains(w); }
  bool is_noun(std::string_view w) const { return nouns.contains(w); }
  bool is_locative(std::string_view w) const { return locative_prepositions.contains(w); }
  bool is_goal(std::string_view w) const { return goal_prepositions.contains(w); }
  bool is_preposition(std::string_view w) const { return is_locative(w) || is_goal(w); }

  /// Bundled tabletop-manipulation lexicon (also covers the synthetic world).
  static const Lexicon& builtin();

  /// Keys: determiners, adjectives, nouns, locative_prepositions,
  /// goal_prepositions (arrays of strings; missing keys are empty).
  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

}  // namespace interleaf
