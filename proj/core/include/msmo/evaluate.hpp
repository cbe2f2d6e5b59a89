#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msmo/corpus.hpp"
#include "msmo/model.hpp"

namespace msmo {

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t matched = 0;
  bool operator==(const Score&) const = default;
};

Score score_from_counts(std::size_t gold, std::size_t predicted, std::size_t matched);

// Sentence key -> spans.
using SpanTable = std::map<std::string, std::vector<AspectSpan>>;

// Corpus-level tuple F1: a prediction counts only on exact
// (sentence, start, end, polarity) equality.
Score micro_f1(const SpanTable& gold, const SpanTable& pred);

struct SeedScore {
  std::uint64_t seed = 0;
  Score score;
};

struct LanguageReport {
  std::string lang;
  std::vector<SeedScore> seeds;
  double mean_f1 = 0.0;
};

struct EvalReport {
  std::vector<LanguageReport> languages;

  const LanguageReport* find(const std::string& lang) const;
  // Mean of the per-language means over `langs` (all when empty).
  double average_f1(const std::vector<std::string>& langs = {}) const;
};

Score evaluate_sentences(const Model& model, std::span<const TaggedSentence* const> sentences);

// Scores each language on a split: the source language on its S sentences,
// a target on its T sentences.
EvalReport evaluate_model(const Model& model, const CorpusBundle& bundle, SplitName split,
                          const std::vector<std::string>& langs, std::uint64_t seed = 0);

// Pools per-seed entries by language and averages F1.
EvalReport aggregate(std::span<const EvalReport> reports);

std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_csv(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem = "report");

}  // namespace msmo
