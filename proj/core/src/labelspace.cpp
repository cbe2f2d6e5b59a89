#include "msmo/labelspace.hpp"

#include <algorithm>

namespace msmo {

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Pos: return "POS";
    case Polarity::Neu: return "NEU";
    case Polarity::Neg: return "NEG";
  }
  return "?";
}

Polarity parse_polarity(std::string_view s) {
  if (s == "POS") return Polarity::Pos;
  if (s == "NEU") return Polarity::Neu;
  if (s == "NEG") return Polarity::Neg;
  throw std::invalid_argument("unknown polarity '" + std::string(s) + "'");
}

Tag Tag::from_id(std::size_t id) {
  if (id >= kNumTags) throw std::invalid_argument("tag id " + std::to_string(id) + " out of range");
  return Tag(static_cast<std::uint8_t>(id));
}

std::string to_string(Tag t) {
  if (t.is_outside()) return "O";
  static constexpr char kPos[] = {'B', 'I', 'E', 'S'};
  std::string out(1, kPos[static_cast<int>(t.position())]);
  out += '-';
  out += to_string(t.polarity());
  return out;
}

Tag parse_tag(std::string_view s) {
  if (s == "O") return Tag::outside();
  if (s.size() == 5 && s[1] == '-') {
    Position pos;
    switch (s[0]) {
      case 'B': pos = Position::B; break;
      case 'I': pos = Position::I; break;
      case 'E': pos = Position::E; break;
      case 'S': pos = Position::S; break;
      default: throw std::invalid_argument("unknown tag '" + std::string(s) + "'");
    }
    return Tag::of(pos, parse_polarity(s.substr(2)));
  }
  throw std::invalid_argument("unknown tag '" + std::string(s) + "'");
}

LabelError::LabelError(std::size_t position, const std::string& reason)
    : std::invalid_argument("at index " + std::to_string(position) + ": " + reason),
      position_(position) {}

std::vector<Tag> encode_spans(std::span<const AspectSpan> spans, std::size_t length) {
  std::vector<Tag> tags(length, Tag::outside());
  std::vector<bool> used(length, false);
  for (const auto& s : spans) {
    if (s.start > s.end || s.end >= length) {
      throw LabelError(s.start, "span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                    ") out of range for length " + std::to_string(length));
    }
    for (std::size_t i = s.start; i <= s.end; ++i) {
      if (used[i]) {
        throw LabelError(i, "span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                                ") overlaps another span");
      }
      used[i] = true;
    }
    if (s.start == s.end) {
      tags[s.start] = Tag::of(Position::S, s.polarity);
    } else {
      tags[s.start] = Tag::of(Position::B, s.polarity);
      for (std::size_t i = s.start + 1; i < s.end; ++i) tags[i] = Tag::of(Position::I, s.polarity);
      tags[s.end] = Tag::of(Position::E, s.polarity);
    }
  }
  return tags;
}

std::vector<AspectSpan> decode_strict(std::span<const Tag> tags) {
  std::vector<AspectSpan> spans;
  std::optional<AspectSpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag t = tags[i];
    if (open) {
      if (t.is_outside() || t.polarity() != open->polarity ||
          (t.position() != Position::I && t.position() != Position::E)) {
        throw LabelError(i, "expected I-/E-" + std::string(to_string(open->polarity)) +
                                " after span start, got " + to_string(t));
      }
      if (t.position() == Position::E) {
        open->end = i;
        spans.push_back(*open);
        open.reset();
      }
      continue;
    }
    if (t.is_outside()) continue;
    switch (t.position()) {
      case Position::S: spans.push_back({i, i, t.polarity()}); break;
      case Position::B: open = AspectSpan{i, i, t.polarity()}; break;
      default: throw LabelError(i, to_string(t) + " without an open span");
    }
  }
  if (open) throw LabelError(tags.size(), "span opened at " + std::to_string(open->start) + " is never closed");
  return spans;
}

std::vector<AspectSpan> decode_lenient(std::span<const Tag> tags) {
  std::vector<AspectSpan> spans;
  std::size_t i = 0;
  const std::size_t n = tags.size();
  while (i < n) {
    const Tag t = tags[i];
    if (t.is_outside()) { ++i; continue; }
    if (t.position() == Position::S) {
      spans.push_back({i, i, t.polarity()});
      ++i;
      continue;
    }
    if (t.position() != Position::B) { ++i; continue; }
    const Tag inside = Tag::of(Position::I, t.polarity());
    const Tag close = Tag::of(Position::E, t.polarity());
    std::size_t j = i + 1;
    while (j < n && tags[j] == inside) ++j;
    if (j < n && tags[j] == close) {
      spans.push_back({i, j, t.polarity()});
      i = j + 1;
    } else {
      // resume at the offending token; it may start a span of its own
      i = j;
    }
  }
  return spans;
}

}  // namespace msmo
