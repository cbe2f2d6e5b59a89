#pragma once

// The BIES x {POS, NEU, NEG} + O tag alphabet and span <-> tag conversion.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msmo {

enum class Polarity : std::uint8_t { Pos = 0, Neu = 1, Neg = 2 };
inline constexpr std::array<Polarity, 3> kPolarities{Polarity::Pos, Polarity::Neu, Polarity::Neg};

enum class Position : std::uint8_t { B = 0, I = 1, E = 2, S = 3 };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view s);

inline constexpr std::size_t kNumTags = 13;

// Tag ids are frozen: O = 0, then B/I/E/S for POS, NEU, NEG in that order.
class Tag {
 public:
  constexpr Tag() = default;
  static constexpr Tag outside() { return Tag(0); }
  static constexpr Tag of(Position pos, Polarity pol) {
    return Tag(static_cast<std::uint8_t>(1 + 4 * static_cast<int>(pol) + static_cast<int>(pos)));
  }
  static Tag from_id(std::size_t id);

  constexpr std::size_t id() const { return id_; }
  constexpr bool is_outside() const { return id_ == 0; }
  // Only valid when !is_outside().
  constexpr Position position() const { return static_cast<Position>((id_ - 1) % 4); }
  constexpr Polarity polarity() const { return static_cast<Polarity>((id_ - 1) / 4); }

  constexpr auto operator<=>(const Tag&) const = default;

 private:
  constexpr explicit Tag(std::uint8_t id) : id_(id) {}
  std::uint8_t id_ = 0;
};

std::string to_string(Tag t);
Tag parse_tag(std::string_view s);

struct AspectSpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  Polarity polarity = Polarity::Pos;

  std::size_t length() const { return end - start + 1; }
  auto operator<=>(const AspectSpan&) const = default;
};

class LabelError : public std::invalid_argument {
 public:
  LabelError(std::size_t position, const std::string& reason);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Spans may be given in any order; they must be in range and disjoint.
std::vector<Tag> encode_spans(std::span<const AspectSpan> spans, std::size_t length);

// Inverse of encode_spans; rejects any malformed transition.
std::vector<AspectSpan> decode_strict(std::span<const Tag> tags);

// Emits only maximal well-formed S or B I* E runs of a single polarity and
// silently drops every malformed fragment.
std::vector<AspectSpan> decode_lenient(std::span<const Tag> tags);

}  // namespace msmo
