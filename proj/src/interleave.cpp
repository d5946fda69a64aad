#include "interleaf/interleave.hpp"

#include <cctype>
#include <unordered_map>

#include <fmt/format.h>

#include "interleaf/errors.hpp"

namespace interleaf {

std::string_view to_string(TextTokenizer t) {
  return t == TextTokenizer::Whitespace ? "whitespace" : "byte-level";
}

TextTokenizer text_tokenizer_from_string(std::string_view s) {
  if (s == "whitespace") return TextTokenizer::Whitespace;
  if (s == "byte-level") return TextTokenizer::ByteLevel;
  throw ValidationError("unknown text tokenizer '" + std::string(s) + "'");
}

std::size_t InterleavedSequence::image_count() const {
  std::size_t n = 0;
  for (const Token& t : tokens) n += t.kind == TokenKind::Boi;
  return n;
}

std::size_t InterleavedSequence::text_token_count() const {
  std::size_t n = 0;
  for (const Token& t : tokens) n += t.kind == TokenKind::Text;
  return n;
}

namespace {

std::vector<std::string> byte_vocab() {
  std::vector<std::string> v(256);
  for (int b = 0; b < 256; ++b) {
    if (b > 0x20 && b < 0x7f) {
      v[b] = std::string(1, static_cast<char>(b));
    } else {
      v[b] = fmt::format("<0x{:02X}>", b);
    }
  }
  return v;
}

class TextEncoder {
 public:
  TextEncoder(TextTokenizer kind, std::vector<std::string>& vocab) : kind_(kind), vocab_(vocab) {
    if (kind_ == TextTokenizer::ByteLevel) vocab_ = byte_vocab();
  }

  void encode(std::string_view text, std::vector<Token>& out) {
    if (kind_ == TextTokenizer::ByteLevel) {
      for (unsigned char c : text) {
        out.push_back({TokenKind::Text, static_cast<std::uint32_t>(c), std::nullopt});
      }
      return;
    }
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      auto [it, inserted] = ids_.try_emplace(word, static_cast<std::uint32_t>(vocab_.size()));
      if (inserted) vocab_.push_back(word);
      out.push_back({TokenKind::Text, it->second, std::nullopt});
      word.clear();
    };
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        word.push_back(c);
      }
    }
    flush();
  }

 private:
  TextTokenizer kind_;
  std::vector<std::string>& vocab_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

}  // namespace

InterleavedSequence assemble_sequence(std::span<const Segment> segments,
                                      const TokenizerConfig& cfg) {
  if (segments.empty()) {
    throw ValidationError("cannot assemble an empty segment list");
  }
  if (cfg.patch_count < 1) {
    throw ValidationError("patch_count must be at least 1");
  }
  InterleavedSequence seq;
  seq.patch_count = cfg.patch_count;
  seq.boi = cfg.boi;
  seq.eoi = cfg.eoi;
  seq.image_prefix = cfg.image_prefix;
  TextEncoder encoder(cfg.text_tokenizer, seq.vocab);

  std::uint64_t next_ordinal = 1;
  for (const Segment& s : segments) {
    const std::size_t start = seq.tokens.size();
    switch (s.kind) {
      case SegmentKind::Image:
        seq.tokens.push_back({TokenKind::Boi, std::nullopt, std::nullopt});
        for (std::size_t p = 0; p < cfg.patch_count; ++p) {
          seq.tokens.push_back({TokenKind::Image, std::nullopt, next_ordinal++});
        }
        seq.tokens.push_back({TokenKind::Eoi, std::nullopt, std::nullopt});
        break;
      case SegmentKind::Text:
        encoder.encode(s.text, seq.tokens);
        break;
      default:
        throw ValidationError("unknown segment kind");
    }
    if (seq.tokens.size() > start) {
      seq.segments.push_back({s.kind, start, seq.tokens.size() - start});
    }
  }
  return seq;
}

Verdict validate_sequence(const InterleavedSequence& seq) {
  Verdict v;
  auto flag = [&](std::size_t pos, std::string msg) {
    v.violations.push_back({pos, std::move(msg)});
  };
  if (seq.patch_count < 1) flag(0, "patch count must be at least 1");

  bool open = false;
  std::size_t open_at = 0;
  std::size_t images_in_span = 0;
  std::uint64_t expected_ordinal = 1;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const Token& t = seq.tokens[i];
    switch (t.kind) {
      case TokenKind::Boi:
        if (t.text_id || t.image_ordinal) flag(i, fmt::format("separator carries a payload at position {}", i));
        if (open) {
          flag(i, fmt::format("unbalanced separator at position {}", i));
        }
        open = true;
        open_at = i;
        images_in_span = 0;
        break;
      case TokenKind::Eoi:
        if (t.text_id || t.image_ordinal) flag(i, fmt::format("separator carries a payload at position {}", i));
        if (!open) {
          flag(i, fmt::format("unbalanced separator at position {}", i));
          break;
        }
        if (images_in_span != seq.patch_count) {
          flag(open_at, fmt::format("image span at position {} has {} image tokens, expected {}",
                                    open_at, images_in_span, seq.patch_count));
        }
        open = false;
        break;
      case TokenKind::Image:
        if (!t.image_ordinal || t.text_id) {
          flag(i, fmt::format("image token without a single ordinal payload at position {}", i));
        } else if (*t.image_ordinal != expected_ordinal) {
          flag(i, fmt::format("image ordinal {} out of sequence at position {} (expected {})",
                              *t.image_ordinal, i, expected_ordinal));
          expected_ordinal = *t.image_ordinal + 1;
        } else {
          ++expected_ordinal;
        }
        if (!open) {
          flag(i, fmt::format("image token outside image span at position {}", i));
        } else {
          ++images_in_span;
        }
        break;
      case TokenKind::Text:
        if (!t.text_id || t.image_ordinal) {
          flag(i, fmt::format("text token without a single vocabulary payload at position {}", i));
        } else if (*t.text_id >= seq.vocab.size()) {
          flag(i, fmt::format("text id {} outside vocabulary at position {}", *t.text_id, i));
        }
        if (open) flag(i, fmt::format("text token inside image span at position {}", i));
        break;
      default:
        flag(i, fmt::format("unknown token kind at position {}", i));
    }
  }
  if (open) flag(open_at, fmt::format("unbalanced separator at position {}", open_at));

  // Segment spans must tile the token list in order.
  std::size_t cursor = 0;
  for (const SpanInfo& s : seq.segments) {
    if (s.start != cursor || s.length == 0 || s.start + s.length > seq.tokens.size()) {
      flag(s.start, fmt::format("segment span at position {} does not tile the sequence", s.start));
      break;
    }
    if (s.kind == SegmentKind::Image &&
        (s.length != seq.patch_count + 2 || seq.tokens[s.start].kind != TokenKind::Boi)) {
      flag(s.start, fmt::format("image segment at position {} is not a full image span", s.start));
    }
    cursor = s.start + s.length;
  }
  if (!seq.segments.empty() && cursor != seq.tokens.size()) {
    flag(cursor, fmt::format("segment spans stop at position {} of {}", cursor, seq.tokens.size()));
  }
  return v;
}

std::string render_canonical(const InterleavedSequence& seq) {
  const Verdict v = validate_sequence(seq);
  if (!v.ok()) {
    throw ValidationError("cannot render invalid sequence: " + v.violations.front().message);
  }
  std::string out;
  for (const Token& t : seq.tokens) {
    if (!out.empty()) out.push_back(' ');
    switch (t.kind) {
      case TokenKind::Boi: out += seq.boi; break;
      case TokenKind::Eoi: out += seq.eoi; break;
      case TokenKind::Image:
        out += seq.image_prefix;
        out += std::to_string(*t.image_ordinal);
        break;
      case TokenKind::Text: out += seq.vocab[*t.text_id]; break;
    }
  }
  return out;
}

}  // namespace interleaf
