#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msmo/labelspace.hpp"

namespace msmo {

// The four aligned views of one example: source, translated target, and the
// two code-switched sentences (source context with target aspects, and the
// reverse).
enum class Variant : std::uint8_t { S = 0, T = 1, ST = 2, TS = 3 };
inline constexpr std::array<Variant, 4> kVariants{Variant::S, Variant::T, Variant::ST, Variant::TS};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaggedSentence {
  std::string id;
  std::string lang;
  Variant variant = Variant::S;
  std::vector<std::string> tokens;
  std::vector<Tag> tags;

  std::vector<AspectSpan> spans() const { return decode_strict(tags); }
  // Unique across a bundle; used as the sentence key when scoring.
  std::string key() const { return id + "@" + lang; }
};

struct PairAlignment {
  Variant a = Variant::S;
  std::size_t span_a = 0;
  Variant b = Variant::T;
  std::size_t span_b = 0;
  bool operator==(const PairAlignment&) const = default;
};

struct ParallelExample {
  std::string id;
  std::string target_lang;
  std::array<TaggedSentence, 4> views;  // indexed by Variant
  std::vector<PairAlignment> alignments;

  const TaggedSentence& view(Variant v) const { return views[static_cast<std::size_t>(v)]; }
  TaggedSentence& view(Variant v) { return views[static_cast<std::size_t>(v)]; }
};

enum class SplitName : std::uint8_t { Train = 0, Dev = 1, Test = 2 };
inline constexpr std::array<SplitName, 3> kSplits{SplitName::Train, SplitName::Dev, SplitName::Test};
std::string_view to_string(SplitName s);

struct CorpusBundle {
  std::string source_lang;
  std::vector<std::string> target_langs;
  std::array<std::vector<ParallelExample>, 3> splits;  // indexed by SplitName

  const std::vector<ParallelExample>& split(SplitName s) const { return splits[static_cast<std::size_t>(s)]; }
  std::vector<ParallelExample>& split(SplitName s) { return splits[static_cast<std::size_t>(s)]; }
  bool empty() const;

  // Examples of one split restricted to a target language.
  std::vector<const ParallelExample*> examples(SplitName s, std::string_view target) const;
  // Distinct sentences of `variant` in a split for a target (source sentences
  // are shared across targets and returned once).
  std::vector<const TaggedSentence*> sentences(SplitName s, Variant variant, std::string_view target = {}) const;
};

// Tag-free view of a target-language sentence. Distillation code only ever
// sees these, never the gold tags.
struct UnlabeledSentence {
  std::string id;
  std::string lang;
  std::vector<std::string> tokens;
  std::string key() const { return id + "@" + lang; }
};
std::vector<UnlabeledSentence> unlabeled_targets(const CorpusBundle& bundle, SplitName s, std::string_view target);

// ---- marker-annotated raw text ------------------------------------------

struct MarkedSpan {
  AspectSpan span;
  int index = 0;  // cross-language alignment index
};

struct RawParse {
  std::vector<std::string> tokens;
  std::vector<MarkedSpan> spans;  // in textual order
};

// Parses "The {1:POS service} was great". Errors carry a character offset.
RawParse parse_raw(std::string_view line);

class RawFormatError : public FormatError {
 public:
  RawFormatError(std::size_t offset, const std::string& reason);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Replaces every aspect run of `into` by the index-matched run of `from`,
// re-encoding tags for the new lengths. Context tokens are untouched.
RawParse code_switch(const RawParse& into, const RawParse& from);

// Builds the full four-view example (with alignments) from a parsed
// source/target pair.
ParallelExample make_parallel_example(std::string id, const std::string& source_lang,
                                      const std::string& target_lang, const RawParse& source,
                                      const RawParse& target);

// Reads a raw marker file: groups of (source line, target line) separated by
// blank lines.
CorpusBundle import_raw(const std::filesystem::path& path, const std::string& source_lang,
                        const std::string& target_lang, SplitName split = SplitName::Train);

// ---- vocabulary ----------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // reserved entries added first
  static Vocabulary from_bundle(const CorpusBundle& bundle);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---- JSONL persistence ---------------------------------------------------

// A bundle is a directory holding train.jsonl, dev.jsonl and test.jsonl.
void save_bundle(const CorpusBundle& bundle, const std::filesystem::path& dir);
CorpusBundle load_bundle(const std::filesystem::path& dir);

// One split file. Errors carry the 1-based line number.
std::string write_split_jsonl(const CorpusBundle& bundle, SplitName split);
void read_split_jsonl(std::string_view text, SplitName split, CorpusBundle& into);

struct SplitStats {
  std::string lang;
  std::string split;
  std::size_t sentences = 0;
  std::size_t aspects = 0;
};
std::vector<SplitStats> corpus_stats(const CorpusBundle& bundle);
std::string format_stats(const std::vector<SplitStats>& stats);

}  // namespace msmo
