#include "interleaf/instruction.hpp"

#include <cctype>
#include <optional>
#include <sstream>

#include "interleaf/backend.hpp"
#include "interleaf/errors.hpp"

namespace interleaf {

namespace {

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '\'' || c == '-' || u >= 0x80;
}

/// A whitespace-delimited token split into leading punctuation, word core
/// and trailing punctuation.
struct Token {
  std::string lead;
  std::string core;
  std::string trail;
  std::string lower;
};

Token split_token(const std::string& raw) {
  Token t;
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && !is_word_char(raw[b])) ++b;
  while (e > b && !is_word_char(raw[e - 1])) --e;
  t.lead = raw.substr(0, b);
  t.core = raw.substr(b, e - b);
  t.trail = raw.substr(e);
  t.lower = t.core;
  for (char& c : t.lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string escape_braces(std::string_view text) {
  std::string out;
  for (char c : text) {
    out.push_back(c);
    if (c == '{' || c == '}') out.push_back(c);
  }
  return out;
}

class PhraseMatcher {
 public:
  PhraseMatcher(const std::vector<Token>& tokens, const Lexicon& lexicon)
      : tokens_(tokens), lx_(lexicon) {}

  /// End (exclusive) of the longest determiner? adjective* noun+ match at
  /// `start`, if any.
  std::optional<std::size_t> match_core(std::size_t start) const {
    const std::size_t n = tokens_.size();
    std::size_t j = start;
    if (j < n && lx_.is_determiner(tokens_[j].lower) && tokens_[j].trail.empty()) {
      ++j;
    }
    std::optional<std::size_t> best;
    for (std::size_t k = j; k < n; ++k) {
      const Token& t = tokens_[k];
      if (t.core.empty() || (k > start && !t.lead.empty())) break;
      if (!lx_.is_adjective(t.lower) && !lx_.is_noun(t.lower)) break;
      if (valid_run(j, k + 1)) best = k + 1;
      if (!t.trail.empty()) break;
    }
    return best;
  }

 private:
  // adjective* noun+ over [lo, hi): some split point s with [lo, s) adjectives
  // and [s, hi) nouns, s < hi.
  bool valid_run(std::size_t lo, std::size_t hi) const {
    std::size_t noun_start = hi;
    while (noun_start > lo && lx_.is_noun(tokens_[noun_start - 1].lower)) --noun_start;
    std::size_t adj_end = lo;
    while (adj_end < hi && lx_.is_adjective(tokens_[adj_end].lower)) ++adj_end;
    return noun_start < hi && noun_start <= adj_end;
  }

  const std::vector<Token>& tokens_;
  const Lexicon& lx_;
};

struct Piece {
  bool placeholder = false;
  std::string text;  // literal text (unescaped) or placeholder index digits
};

std::vector<Piece> split_template(std::string_view tpl) {
  std::vector<Piece> pieces;
  std::string lit;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    const char c = tpl[i];
    if (c == '{') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '{') {
        lit.push_back('{');
        ++i;
        continue;
      }
      const std::size_t close = tpl.find('}', i);
      if (close == std::string_view::npos || close == i + 1) {
        throw ValidationError("malformed placeholder in template '" + std::string(tpl) + "'");
      }
      const std::string_view digits = tpl.substr(i + 1, close - i - 1);
      for (char d : digits) {
        if (!std::isdigit(static_cast<unsigned char>(d))) {
          throw ValidationError("malformed placeholder in template '" + std::string(tpl) + "'");
        }
      }
      if (!lit.empty()) pieces.push_back({false, std::move(lit)});
      lit.clear();
      pieces.push_back({true, std::string(digits)});
      i = close;
    } else if (c == '}') {
      if (i + 1 < tpl.size() && tpl[i + 1] == '}') {
        lit.push_back('}');
        ++i;
        continue;
      }
      throw ValidationError("unmatched '}' in template '" + std::string(tpl) + "'");
    } else {
      lit.push_back(c);
    }
  }
  if (!lit.empty()) pieces.push_back({false, std::move(lit)});
  return pieces;
}

/// Validates that placeholders are exactly {0}, {1}, ... in order.
std::size_t checked_placeholders(const std::vector<Piece>& pieces) {
  std::size_t next = 0;
  for (const Piece& p : pieces) {
    if (!p.placeholder) continue;
    if (p.text != std::to_string(next)) {
      throw ValidationError("template placeholders must be {0}, {1}, ... in order");
    }
    ++next;
  }
  return next;
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  for (const std::string& w : split_words(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

ParsedInstruction extract_key_objects(std::string_view instruction, const Lexicon& lexicon) {
  const std::vector<std::string> words = split_words(instruction);
  if (words.empty()) {
    throw ValidationError("instruction is empty");
  }
  if (words.size() > kRuleParserMaxWords) {
    throw NeedsService("instruction has " + std::to_string(words.size()) +
                       " words; rule parser handles at most " +
                       std::to_string(kRuleParserMaxWords));
  }
  std::vector<Token> tokens;
  tokens.reserve(words.size());
  for (const auto& w : words) tokens.push_back(split_token(w));

  const PhraseMatcher matcher(tokens, lexicon);
  ParsedInstruction out;
  out.backend = ParseBackendKind::Rule;

  bool goal_seen = false;
  bool have_phrase = false;
  std::string tpl;
  auto append_literal = [&](std::string_view s) {
    if (!tpl.empty()) tpl.push_back(' ');
    tpl += escape_braces(s);
  };

  std::size_t i = 0;
  while (i < tokens.size()) {
    std::optional<std::size_t> end = matcher.match_core(i);
    if (!end) {
      if (have_phrase && lexicon.is_goal(tokens[i].lower)) goal_seen = true;
      append_literal(words[i]);
      ++i;
      continue;
    }
    std::size_t stop = *end;
    const Token& last = tokens[stop - 1];
    if (stop < tokens.size() && last.trail.empty()) {
      const Token& prep = tokens[stop];
      const bool attaches =
          prep.lead.empty() && prep.trail.empty() &&
          (lexicon.is_locative(prep.lower) || (goal_seen && lexicon.is_goal(prep.lower)));
      if (attaches && stop + 1 < tokens.size() && tokens[stop + 1].lead.empty()) {
        if (auto tail = matcher.match_core(stop + 1)) stop = *tail;
      }
    }

    std::string phrase = tokens[i].core;
    for (std::size_t k = i + 1; k < stop; ++k) {
      phrase.push_back(' ');
      phrase += (k + 1 == stop) ? tokens[k].lead + tokens[k].core : words[k];
    }
    std::string piece = escape_braces(tokens[i].lead) + "{" +
                        std::to_string(out.phrases.size()) + "}" +
                        escape_braces(tokens[stop - 1].trail);
    if (!tpl.empty()) tpl.push_back(' ');
    tpl += piece;
    out.phrases.push_back(std::move(phrase));
    have_phrase = true;
    i = stop;
  }
  out.template_text = std::move(tpl);
  return out;
}

std::size_t placeholder_count(std::string_view template_text) {
  return checked_placeholders(split_template(template_text));
}

bool reconstructs(const ParsedInstruction& parsed, std::string_view instruction) {
  try {
    std::vector<Filler> fillers;
    for (const auto& p : parsed.phrases) fillers.emplace_back(TextFiller{p});
    const auto segments = render_template(parsed, fillers);
    const std::string target = normalize_whitespace(instruction);
    if (segments.empty()) return target.empty();
    return segments.size() == 1 && segments[0].kind == SegmentKind::Text &&
           segments[0].text == target;
  } catch (const ValidationError&) {
    return false;
  }
}

ParsedInstruction extract_key_objects(std::string_view instruction, ModelBackend& service,
                                      const RequestContext& context) {
  if (normalize_whitespace(instruction).empty()) {
    throw ValidationError("instruction is empty");
  }
  ParseRequest req;
  req.instruction = std::string(instruction);
  req.context = context;
  const ParseResponse resp = service.parse(req);
  ParsedInstruction out;
  out.template_text = resp.template_text;
  out.phrases = resp.objects;
  out.backend = ParseBackendKind::Service;
  if (!reconstructs(out, instruction)) {
    throw ParseRejected("parse service result does not reconstruct the instruction: template '" +
                        resp.template_text + "'");
  }
  return out;
}

std::vector<Segment> render_template(const ParsedInstruction& parsed,
                                     const std::vector<Filler>& fillers) {
  const std::vector<Piece> pieces = split_template(parsed.template_text);
  const std::size_t holes = checked_placeholders(pieces);
  if (holes != fillers.size()) {
    throw ValidationError("template has " + std::to_string(holes) + " placeholders but " +
                          std::to_string(fillers.size()) + " fillers were given");
  }

  std::vector<Segment> out;
  std::string text;
  auto flush = [&] {
    std::string t = normalize_whitespace(text);
    if (!t.empty()) out.push_back(Segment::make_text(std::move(t)));
    text.clear();
  };
  std::size_t hole = 0;
  for (const Piece& p : pieces) {
    if (!p.placeholder) {
      text += p.text;
      continue;
    }
    const Filler& f = fillers[hole++];
    if (const auto* tf = std::get_if<TextFiller>(&f)) {
      text += tf->text;
    } else {
      flush();
      out.push_back(Segment::make_image(std::get<ImageFiller>(f).slot));
    }
  }
  flush();
  return out;
}

}  // namespace interleaf
