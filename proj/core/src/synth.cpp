#include "msmo/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "msmo/random.hpp"

namespace msmo {
namespace {

constexpr std::array<std::array<const char*, 6>, 3> kSentiment{{
    {"great", "excellent", "delicious", "superb", "lovely", "fantastic"},
    {"okay", "average", "decent", "ordinary", "standard", "acceptable"},
    {"awful", "terrible", "bland", "rude", "poor", "horrible"},
}};

constexpr std::array<const char*, 56> kNouns{
    "service", "food",     "staff",   "pizza",   "pasta",    "wine",    "salad",   "dessert",
    "menu",    "waiter",   "ambience", "music",  "decor",    "price",   "portion", "steak",
    "sushi",   "coffee",   "tea",     "bread",   "soup",     "burger",  "fries",   "sauce",
    "cheese",  "chicken",  "fish",    "beer",    "cocktail", "table",   "terrace", "view",
    "bar",     "kitchen",  "chef",    "manager", "hostess",  "bill",    "parking", "seating",
    "lighting", "noodles", "curry",   "rice",    "dumplings", "tacos",  "salmon",  "lamb",
    "pork",    "shrimp",   "oysters", "cake",    "pie",      "espresso", "juice",  "risotto"};

constexpr std::array<const char*, 8> kModifiers{"house", "grilled", "fresh", "spicy",
                                                "chocolate", "daily", "side", "lunch"};

// "<A>" marks the aspect slot and "<S>" the sentiment word.
const std::vector<std::vector<std::string>> kTemplates{
    {"the", "<A>", "was", "<S>"},
    {"the", "<A>", "is", "really", "<S>"},
    {"<S>", "<A>", "here"},
    {"i", "found", "the", "<A>", "<S>"},
    {"we", "thought", "the", "<A>", "looked", "<S>"},
    {"their", "<A>", "tastes", "<S>"},
};

const std::vector<std::vector<std::string>> kFillers{
    {"we", "went", "there", "on", "friday"},
    {"it", "was", "busy"},
    {"my", "friend", "paid"},
    {"we", "sat", "outside"},
};

const std::vector<std::string> kConnectors{"and", "but", ","};

struct Clause {
  int template_id = -1;  // -1 for filler
  int filler_id = -1;
  std::vector<std::string> term;  // aspect term (source tokens)
  std::string sentiment;
  Polarity polarity = Polarity::Pos;
};

struct SourceSentence {
  std::vector<Clause> clauses;
  std::vector<std::string> connectors;  // clauses.size() - 1 entries
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

class WordFactory {
 public:
  explicit WordFactory(std::set<std::string> taken) : taken_(std::move(taken)) {}
  std::string make(Rng& rng) {
    static constexpr char kC[] = "bdfgklmnprstvz";
    static constexpr char kV[] = "aeiou";
    for (;;) {
      const std::size_t syl = 2 + uniform_index(rng, 2);
      std::string w;
      for (std::size_t i = 0; i < syl; ++i) {
        w += kC[uniform_index(rng, sizeof kC - 1)];
        w += kV[uniform_index(rng, sizeof kV - 1)];
      }
      if (uniform01(rng) < 0.3) w += kC[uniform_index(rng, sizeof kC - 1)];
      if (taken_.insert(w).second) return w;
    }
  }

 private:
  std::set<std::string> taken_;
};

}  // namespace

SynthResult synth_bilingual_detailed(const SynthConfig& cfg) {
  if (cfg.sentiment_words < 3 || cfg.sentiment_words > kSentiment[0].size())
    throw std::invalid_argument("synth: sentiment_words must be in [3, 6]");
  if (cfg.aspect_lexicon_size < 3) throw std::invalid_argument("synth: aspect_lexicon_size must be at least 3");
  const std::size_t max_terms = kNouns.size() * (kModifiers.size() + 1);
  if (cfg.aspect_lexicon_size > max_terms)
    throw std::invalid_argument("synth: aspect_lexicon_size exceeds " + std::to_string(max_terms));
  if (cfg.target_languages < 1) throw std::invalid_argument("synth: need at least one target language");

  SynthResult result;
  Rng lex_rng = make_rng(cfg.seed, 1);

  // Aspect lexicon: train terms are drawn first; dev and test terms are
  // unseen combinations whose individual tokens all occur in train terms.
  std::array<std::vector<std::vector<std::string>>, 3> split_terms;
  std::vector<std::vector<std::string>> terms;
  {
    std::vector<std::vector<std::string>> combos;
    for (const auto& n : kNouns) {
      combos.push_back({n});
      for (const auto& m : kModifiers) combos.push_back({m, n});
    }
    shuffle(combos, lex_rng);
    const std::size_t n = cfg.aspect_lexicon_size;
    const std::size_t n_dev = std::max<std::size_t>(1, n / 5);
    const std::size_t n_test = std::max<std::size_t>(1, n / 5);
    const std::size_t n_train = n - n_dev - n_test;
    std::set<std::string> train_tokens;
    std::vector<bool> used(combos.size(), false);
    for (std::size_t k = 0; k < combos.size() && split_terms[0].size() < n_train; ++k) {
      split_terms[0].push_back(combos[k]);
      train_tokens.insert(combos[k].begin(), combos[k].end());
      used[k] = true;
    }
    for (std::size_t s : {std::size_t{1}, std::size_t{2}}) {
      const std::size_t want = s == 1 ? n_dev : n_test;
      for (std::size_t k = 0; k < combos.size() && split_terms[s].size() < want; ++k) {
        if (used[k]) continue;
        const bool covered = std::all_of(combos[k].begin(), combos[k].end(),
                                         [&](const std::string& w) { return train_tokens.count(w) > 0; });
        if (!covered) continue;
        split_terms[s].push_back(combos[k]);
        used[k] = true;
      }
      if (split_terms[s].size() < want)
        throw std::invalid_argument("synth: aspect_lexicon_size too small to cover held-out terms");
    }
    for (const auto& st : split_terms) terms.insert(terms.end(), st.begin(), st.end());
  }
  result.aspect_terms.resize(3);
  for (std::size_t s = 0; s < 3; ++s)
    for (const auto& t : split_terms[s]) result.aspect_terms[s].push_back(join(t));

  // Source-language vocabulary (everything a target language must map).
  std::set<std::string> source_vocab;
  for (const auto& t : kTemplates)
    for (const auto& w : t)
      if (w[0] != '<') source_vocab.insert(w);
  for (const auto& f : kFillers) source_vocab.insert(f.begin(), f.end());
  source_vocab.insert(kConnectors.begin(), kConnectors.end());
  source_vocab.insert(".");
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t k = 0; k < cfg.sentiment_words; ++k) source_vocab.insert(kSentiment[p][k]);
  for (const auto& t : terms) source_vocab.insert(t.begin(), t.end());

  // Target languages.
  WordFactory words(source_vocab);
  const std::set<std::string> punctuation{".", ","};
  std::vector<std::vector<std::vector<std::size_t>>> perms;  // [lang][template] -> order
  for (std::size_t li = 0; li < cfg.target_languages; ++li) {
    Rng rng = make_rng(cfg.seed, 100 + li);
    SynthLanguage lang;
    lang.name = "t" + std::to_string(li + 1);
    for (const auto& w : source_vocab) {
      const bool is_noun = std::find(kNouns.begin(), kNouns.end(), w) != kNouns.end();
      if (punctuation.count(w) || (is_noun && uniform01(rng) < 0.15)) {
        lang.token_map[w] = w;  // shared surface form
      } else {
        lang.token_map[w] = words.make(rng);
      }
    }
    const std::array<std::string, 2> articles{words.make(rng), words.make(rng)};
    const bool modifier_after_noun = uniform01(rng) < 0.5;
    for (const auto& t : terms) {
      std::vector<std::string> out;
      for (const auto& w : t) out.push_back(lang.token_map.at(w));
      if (out.size() > 1 && modifier_after_noun) std::reverse(out.begin(), out.end());
      if (uniform01(rng) < 0.4) out.insert(out.begin(), articles[uniform_index(rng, 2)]);
      lang.aspects[join(t)] = out;
    }
    std::vector<std::vector<std::size_t>> lang_perms;
    for (const auto& t : kTemplates) {
      std::vector<std::size_t> order(t.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle(order, rng);
      lang_perms.push_back(order);
    }
    perms.push_back(std::move(lang_perms));
    result.languages.push_back(std::move(lang));
  }

  CorpusBundle& bundle = result.bundle;
  bundle.source_lang = "src";
  for (const auto& l : result.languages) bundle.target_langs.push_back(l.name);

  const std::array<std::size_t, 3> counts{cfg.train_sentences, cfg.dev_sentences, cfg.test_sentences};
  for (std::size_t s = 0; s < 3; ++s) {
    Rng rng = make_rng(cfg.seed, 10 + s);
    for (std::size_t n = 0; n < counts[s]; ++n) {
      // Sample the source sentence structure.
      SourceSentence src;
      const double u = uniform01(rng);
      const std::size_t n_aspects = u < 0.15 ? 0 : (u < 0.65 ? 1 : (u < 0.9 ? 2 : 3));
      std::size_t n_fillers = uniform01(rng) < 0.3 ? 1 : 0;
      if (n_aspects == 0) n_fillers += 1;
      std::set<std::string> used_terms;
      for (std::size_t a = 0; a < n_aspects; ++a) {
        Clause c;
        c.template_id = static_cast<int>(uniform_index(rng, kTemplates.size()));
        do {
          c.term = split_terms[s][uniform_index(rng, split_terms[s].size())];
        } while (split_terms[s].size() > n_aspects && !used_terms.insert(join(c.term)).second);
        c.polarity = kPolarities[uniform_index(rng, 3)];
        c.sentiment = kSentiment[static_cast<std::size_t>(c.polarity)][uniform_index(rng, cfg.sentiment_words)];
        src.clauses.push_back(c);
      }
      for (std::size_t f = 0; f < n_fillers; ++f) {
        Clause c;
        c.filler_id = static_cast<int>(uniform_index(rng, kFillers.size()));
        src.clauses.insert(src.clauses.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, src.clauses.size() + 1)), c);
      }
      for (std::size_t k = 1; k < src.clauses.size(); ++k)
        src.connectors.push_back(kConnectors[uniform_index(rng, kConnectors.size())]);

      // Render source and every target.
      auto render = [&](const SynthLanguage* lang, const std::vector<std::vector<std::size_t>>* lperm) {
        RawParse out;
        auto map = [&](const std::string& w) { return lang ? lang->token_map.at(w) : w; };
        int index = 0;
        for (std::size_t k = 0; k < src.clauses.size(); ++k) {
          if (k > 0) out.tokens.push_back(map(src.connectors[k - 1]));
          const Clause& c = src.clauses[k];
          if (c.template_id < 0) {
            auto f = kFillers[static_cast<std::size_t>(c.filler_id)];
            if (lang) std::reverse(f.begin(), f.end());
            for (const auto& w : f) out.tokens.push_back(map(w));
            continue;
          }
          const auto& tpl = kTemplates[static_cast<std::size_t>(c.template_id)];
          ++index;
          for (std::size_t p = 0; p < tpl.size(); ++p) {
            const std::string& w = tpl[lperm ? (*lperm)[static_cast<std::size_t>(c.template_id)][p] : p];
            if (w == "<A>") {
              const std::vector<std::string> term = lang ? lang->aspects.at(join(c.term)) : c.term;
              const std::size_t start = out.tokens.size();
              out.tokens.insert(out.tokens.end(), term.begin(), term.end());
              out.spans.push_back({AspectSpan{start, out.tokens.size() - 1, c.polarity}, index});
            } else if (w == "<S>") {
              out.tokens.push_back(map(c.sentiment));
            } else {
              out.tokens.push_back(map(w));
            }
          }
        }
        out.tokens.push_back(".");
        return out;
      };

      const RawParse source = render(nullptr, nullptr);
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05zu", std::string(to_string(kSplits[s])).c_str(), n);
      for (std::size_t li = 0; li < result.languages.size(); ++li) {
        const RawParse target = render(&result.languages[li], &perms[li]);
        bundle.splits[s].push_back(
            make_parallel_example(id, bundle.source_lang, result.languages[li].name, source, target));
      }
    }
  }
  return result;
}

CorpusBundle synth_bilingual(const SynthConfig& cfg) { return synth_bilingual_detailed(cfg).bundle; }

}  // namespace msmo
