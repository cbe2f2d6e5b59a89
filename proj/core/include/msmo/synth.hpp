#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msmo/corpus.hpp"

namespace msmo {

// Synthetic review corpus: a source language built from clause templates and
// one or more target languages obtained by a bijective token map, a fixed
// per-template word-order permutation and a dictionary of aspect terms.
// Train, dev and test never share an aspect term; held-out terms are new
// combinations of tokens seen in training terms. Punctuation and a fraction
// of nouns keep their surface form in every target language.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t train_sentences = 400;
  std::size_t dev_sentences = 100;
  std::size_t test_sentences = 150;
  std::size_t aspect_lexicon_size = 60;
  std::size_t sentiment_words = 4;  // per polarity, 3..6
  std::size_t target_languages = 1;
};

struct SynthLanguage {
  std::string name;
  std::map<std::string, std::string> token_map;             // source token -> target token
  std::map<std::string, std::vector<std::string>> aspects;  // source term -> target term tokens
};

struct SynthResult {
  CorpusBundle bundle;
  std::vector<SynthLanguage> languages;                 // one per target
  std::vector<std::vector<std::string>> aspect_terms;  // per split, as joined source strings
};

SynthResult synth_bilingual_detailed(const SynthConfig& cfg);
CorpusBundle synth_bilingual(const SynthConfig& cfg);

}  // namespace msmo
