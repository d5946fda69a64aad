#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace interleaf {

enum class SegmentKind { Text, Image };

/// One piece of an interleaved instruction: a run of text, or an image slot.
struct Segment {
  SegmentKind kind = SegmentKind::Text;
  /// Text content for Text segments.
  std::string text;
  /// Placeholder slot that produced an Image segment.
  std::optional<std::size_t> slot;

  static Segment make_text(std::string t) { return {SegmentKind::Text, std::move(t), std::nullopt}; }
  static Segment make_image(std::size_t s) { return {SegmentKind::Image, {}, s}; }

  bool operator==(const Segment&) const = default;
};

}  // namespace interleaf
