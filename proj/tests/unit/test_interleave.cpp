#include <gtest/gtest.h>

#include <sstream>

#include "interleaf/errors.hpp"
#include "interleaf/interleave.hpp"
#include "interleaf/rng.hpp"

using namespace interleaf;

namespace {

TokenizerConfig with_p(std::size_t p) {
  TokenizerConfig c;
  c.patch_count = p;
  return c;
}

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Test-only inverse of the whitespace rendering: image spans back to image
// segments, word runs back to text segments. Also checks ordinals.
std::vector<Segment> parse_back(const std::string& rendered, std::size_t p) {
  std::vector<Segment> out;
  const auto words = split(rendered);
  std::uint64_t ordinal = 1;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < words.size();) {
    if (words[i] == "<BOI>") {
      for (std::size_t k = 1; k <= p; ++k) {
        if (words.at(i + k) != "<image>_" + std::to_string(ordinal++)) throw std::runtime_error("ordinal");
      }
      if (words.at(i + p + 1) != "<EOI>") throw std::runtime_error("eoi");
      out.push_back(Segment::make_image(slot++));
      i += p + 2;
      continue;
    }
    std::string text;
    while (i < words.size() && words[i] != "<BOI>") {
      if (!text.empty()) text.push_back(' ');
      text += words[i++];
    }
    out.push_back(Segment::make_text(text));
  }
  return out;
}

}  // namespace

TEST(Assemble, OneImagePlusPick) {
  const std::vector<Segment> segs{Segment::make_image(0), Segment::make_text("pick")};
  const auto seq = assemble_sequence(segs, with_p(256));
  ASSERT_EQ(seq.tokens.size(), 259u);
  int boi = 0, eoi = 0, img = 0, txt = 0;
  for (const auto& t : seq.tokens) {
    boi += t.kind == TokenKind::Boi;
    eoi += t.kind == TokenKind::Eoi;
    img += t.kind == TokenKind::Image;
    txt += t.kind == TokenKind::Text;
  }
  EXPECT_EQ(boi, 1);
  EXPECT_EQ(eoi, 1);
  EXPECT_EQ(img, 256);
  EXPECT_EQ(txt, 1);
  EXPECT_TRUE(validate_sequence(seq).ok());
}

TEST(Assemble, TextOnly) {
  const std::vector<Segment> segs{Segment::make_text("move forward")};
  const auto seq = assemble_sequence(segs, with_p(256));
  EXPECT_EQ(seq.image_count(), 0u);
  EXPECT_EQ(seq.tokens.size(), 2u);
  EXPECT_EQ(render_canonical(seq), "move forward");
}

TEST(Assemble, TwoImagesOrdinals) {
  const std::vector<Segment> segs{Segment::make_image(0), Segment::make_text("into"),
                                  Segment::make_image(1)};
  const auto seq = assemble_sequence(segs, with_p(256));
  std::vector<std::uint64_t> second;
  for (std::size_t i = 258; i < seq.tokens.size(); ++i)
    if (seq.tokens[i].kind == TokenKind::Image) second.push_back(*seq.tokens[i].image_ordinal);
  ASSERT_EQ(second.size(), 256u);
  EXPECT_EQ(second.front(), 257u);
  EXPECT_EQ(second.back(), 512u);
  const std::string r = render_canonical(seq);
  const auto at = r.find("<BOI>", r.find("<BOI>") + 1);
  EXPECT_EQ(r.substr(at, 18), "<BOI> <image>_257 ");
}

TEST(Render, PatchTwo) {
  const std::vector<Segment> segs{Segment::make_image(0), Segment::make_text("pick")};
  EXPECT_EQ(render_canonical(assemble_sequence(segs, with_p(2))), "<BOI> <image>_1 <image>_2 <EOI> pick");
}

TEST(Render, ByteLevel) {
  TokenizerConfig c = with_p(1);
  c.text_tokenizer = TextTokenizer::ByteLevel;
  const std::vector<Segment> segs{Segment::make_text("a b")};
  EXPECT_EQ(render_canonical(assemble_sequence(segs, c)), "a <0x20> b");
}

TEST(Assemble, Errors) {
  EXPECT_THROW(assemble_sequence(std::span<const Segment>{}, with_p(4)), ValidationError);
  const std::vector<Segment> segs{Segment::make_text("x")};
  EXPECT_THROW(assemble_sequence(segs, with_p(0)), ValidationError);
  Segment bogus;
  bogus.kind = static_cast<SegmentKind>(7);
  const std::vector<Segment> bad{bogus};
  EXPECT_THROW(assemble_sequence(bad, with_p(1)), ValidationError);
}

TEST(Validate, DanglingBoi) {
  const std::vector<Segment> segs{Segment::make_text("pick"), Segment::make_image(0)};
  auto seq = assemble_sequence(segs, with_p(2));
  seq.tokens.pop_back();  // drop the EOI
  seq.segments.back().length -= 1;
  const Verdict v = validate_sequence(seq);
  ASSERT_FALSE(v.ok());
  bool found = false;
  for (const auto& x : v.violations) found |= x.message == "unbalanced separator at position 1";
  EXPECT_TRUE(found);
  EXPECT_THROW(render_canonical(seq), ValidationError);
}

TEST(Validate, ImageOutsideSpan) {
  const std::vector<Segment> segs{Segment::make_text("pick up")};
  auto seq = assemble_sequence(segs, with_p(2));
  seq.tokens[1] = Token{TokenKind::Image, std::nullopt, 1};
  const Verdict v = validate_sequence(seq);
  ASSERT_FALSE(v.ok());
  EXPECT_NE(v.violations[0].message.find("image token outside image span"), std::string::npos);
  EXPECT_EQ(v.violations[0].position, 1u);
}

TEST(Validate, OtherCounterexamples) {
  const std::vector<Segment> segs{Segment::make_image(0), Segment::make_image(1)};
  const auto good = assemble_sequence(segs, with_p(3));
  auto a = good;
  a.tokens[2].image_ordinal = 9;  // out of order
  EXPECT_FALSE(validate_sequence(a).ok());
  auto b = good;
  b.tokens.erase(b.tokens.begin() + 1);  // short span
  EXPECT_FALSE(validate_sequence(b).ok());
  auto c = good;
  c.vocab = {"x"};
  c.tokens[2] = Token{TokenKind::Text, 0u, std::nullopt};  // text inside span
  EXPECT_FALSE(validate_sequence(c).ok());
  auto d = good;
  d.tokens[0].text_id = 0;  // payload on separator
  EXPECT_FALSE(validate_sequence(d).ok());
}

// Fuzz: k in 0..8 images, P in {1, 4, 256}, random text runs.
TEST(Assemble, PropertyFuzzLayout) {
  const std::vector<std::string> words{"put", "the", "red", "block", "on", "{x}", "<tag>", "é", "a.b"};
  rng::Stream rs(123);
  for (int trial = 0; trial < 600; ++trial) {
    const std::size_t p = std::vector<std::size_t>{1, 4, 256}[trial % 3];
    const auto k = static_cast<std::size_t>(rs.uniform_int(0, 8));
    std::vector<Segment> segs;
    std::size_t text_tokens = 0;
    std::size_t slot = 0;
    std::size_t images = 0;
    // Alternate so that parse-back can recover the structure exactly.
    bool want_text = rs.bernoulli(0.5) || k == 0;
    while (images < k || want_text) {
      if (want_text) {
        const auto n = rs.uniform_int(1, 5);
        std::string t;
        for (int i = 0; i < n; ++i) {
          if (i) t += rs.bernoulli(0.3) ? "   " : " ";
          t += words[static_cast<std::size_t>(rs.uniform_int(0, words.size() - 1))];
        }
        text_tokens += static_cast<std::size_t>(n);
        segs.push_back(Segment::make_text(t));
        want_text = false;
        if (images == k) break;
      } else {
        segs.push_back(Segment::make_image(slot++));
        ++images;
        want_text = rs.bernoulli(0.7);
      }
    }
    const auto seq = assemble_sequence(segs, with_p(p));
    ASSERT_TRUE(validate_sequence(seq).ok());
    ASSERT_EQ(seq.tokens.size(), p * k + text_tokens + 2 * k);
    ASSERT_EQ(seq.image_count(), k);
    std::uint64_t ord = 0;
    for (const auto& t : seq.tokens)
      if (t.kind == TokenKind::Image) ASSERT_EQ(*t.image_ordinal, ++ord);
    ASSERT_EQ(ord, p * k);

    std::vector<Segment> expect;
    for (const auto& s : segs) {
      if (s.kind == SegmentKind::Text) {
        std::string norm;
        for (const auto& w : split(s.text)) norm += (norm.empty() ? "" : " ") + w;
        expect.push_back(Segment::make_text(norm));
      } else {
        expect.push_back(s);
      }
    }
    ASSERT_EQ(parse_back(render_canonical(seq), p), expect);
  }
}
