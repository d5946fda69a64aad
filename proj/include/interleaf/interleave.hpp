#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "interleaf/segment.hpp"

namespace interleaf {

// Interleaved layout: each image becomes
//   <BOI> <image>_{n+1} ... <image>_{n+P} <EOI>
// with one ordinal space shared by every image in the sequence, and text
// tokens appear verbatim between image spans.

enum class TokenKind { Text, Image, Boi, Eoi };

struct Token {
  TokenKind kind = TokenKind::Text;
  /// Index into InterleavedSequence::vocab (Text only).
  std::optional<std::uint32_t> text_id;
  /// 1-based global image-token index (Image only).
  std::optional<std::uint64_t> image_ordinal;

  bool operator==(const Token&) const = default;
};

enum class TextTokenizer { Whitespace, ByteLevel };

std::string_view to_string(TextTokenizer t);
TextTokenizer text_tokenizer_from_string(std::string_view s);

struct TokenizerConfig {
  /// Image tokens per image span.
  std::size_t patch_count = 256;
  TextTokenizer text_tokenizer = TextTokenizer::Whitespace;
  std::string boi = "<BOI>";
  std::string eoi = "<EOI>";
  std::string image_prefix = "<image>_";
};

struct SpanInfo {
  SegmentKind kind = SegmentKind::Text;
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const SpanInfo&) const = default;
};

struct InterleavedSequence {
  std::vector<Token> tokens;
  std::vector<SpanInfo> segments;
  std::size_t patch_count = 0;
  /// Surface strings for text ids.
  std::vector<std::string> vocab;
  std::string boi = "<BOI>";
  std::string eoi = "<EOI>";
  std::string image_prefix = "<image>_";

  std::size_t image_count() const;
  std::size_t text_token_count() const;
};

/// Builds the token sequence. Throws ValidationError on an empty segment
/// list, P < 1, or an unknown segment kind.
InterleavedSequence assemble_sequence(std::span<const Segment> segments,
                                      const TokenizerConfig& cfg);

struct Violation {
  std::size_t position = 0;
  std::string message;
};

struct Verdict {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every layout invariant; violations are reported, never thrown.
Verdict validate_sequence(const InterleavedSequence& seq);

/// Single-space-separated surface form. Throws ValidationError when the
/// sequence is invalid.
std::string render_canonical(const InterleavedSequence& seq);

}  // namespace interleaf
