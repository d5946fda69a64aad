#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "interleaf/lexicon.hpp"
#include "interleaf/segment.hpp"

namespace interleaf {

class ModelBackend;
struct RequestContext;

enum class ParseBackendKind { Rule, Service };

/// Instructions longer than this are left to the parsing service.
inline constexpr std::size_t kRuleParserMaxWords = 64;

/// An instruction split into a template with ordered holes {0}, {1}, ... and
/// the key-object phrases that fill them. Literal braces in the template are
/// doubled ("{{", "}}").
struct ParsedInstruction {
  std::string template_text;
  std::vector<std::string> phrases;
  ParseBackendKind backend = ParseBackendKind::Rule;

  bool operator==(const ParsedInstruction&) const = default;
};

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string normalize_whitespace(std::string_view text);

/// Rule backend: determiner? adjective* noun+ postmodifier? over the lexicon.
/// Throws ValidationError on empty input, NeedsService above 64 words.
ParsedInstruction extract_key_objects(std::string_view instruction, const Lexicon& lexicon);

/// Service backend: forwards to the parse endpoint and checks the
/// reconstruction invariant. Throws ParseRejected when it does not hold,
/// StageUnavailable when the service is down.
ParsedInstruction extract_key_objects(std::string_view instruction, ModelBackend& service,
                                      const RequestContext& context);

/// Checks placeholder order/count and that substituting the phrases
/// reproduces `instruction` (whitespace-normalized).
bool reconstructs(const ParsedInstruction& parsed, std::string_view instruction);

struct TextFiller {
  std::string text;
};
struct ImageFiller {
  std::size_t slot = 0;
};
using Filler = std::variant<TextFiller, ImageFiller>;

/// Splices fillers into the template. Text fillers merge into the
/// surrounding text; image fillers become Image segments. Text segments are
/// trimmed and empty ones dropped. Throws ValidationError on arity mismatch.
std::vector<Segment> render_template(const ParsedInstruction& parsed,
                                     const std::vector<Filler>& fillers);

/// Number of placeholders in a template; throws ValidationError on a
/// malformed template.
std::size_t placeholder_count(std::string_view template_text);

}  // namespace interleaf
