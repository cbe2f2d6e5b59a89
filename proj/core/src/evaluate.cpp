#include "msmo/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

Score score_from_counts(std::size_t gold, std::size_t predicted, std::size_t matched) {
  Score s;
  s.gold = gold;
  s.predicted = predicted;
  s.matched = matched;
  s.precision = predicted == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(predicted);
  s.recall = gold == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(gold);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

Score micro_f1(const SpanTable& gold, const SpanTable& pred) {
  if (gold.size() != pred.size() ||
      !std::equal(gold.begin(), gold.end(), pred.begin(), [](const auto& a, const auto& b) { return a.first == b.first; }))
    throw std::invalid_argument("micro_f1: gold and predicted sentence ids differ");
  std::size_t g = 0, p = 0, m = 0;
  for (auto gi = gold.begin(), pi = pred.begin(); gi != gold.end(); ++gi, ++pi) {
    std::set<AspectSpan> gs(gi->second.begin(), gi->second.end());
    std::set<AspectSpan> ps(pi->second.begin(), pi->second.end());
    g += gs.size();
    p += ps.size();
    for (const auto& s : ps) m += gs.count(s);
  }
  return score_from_counts(g, p, m);
}

const LanguageReport* EvalReport::find(const std::string& lang) const {
  for (const auto& l : languages)
    if (l.lang == lang) return &l;
  return nullptr;
}

double EvalReport::average_f1(const std::vector<std::string>& langs) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& l : languages) {
    if (!langs.empty() && std::find(langs.begin(), langs.end(), l.lang) == langs.end()) continue;
    total += l.mean_f1;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

Score evaluate_sentences(const Model& model, std::span<const TaggedSentence* const> sentences) {
  SpanTable gold, pred;
  for (const auto* s : sentences) {
    gold[s->key()] = s->spans();
    pred[s->key()] = decode_lenient(model.predict(s->tokens));
  }
  return micro_f1(gold, pred);
}

EvalReport evaluate_model(const Model& model, const CorpusBundle& bundle, SplitName split,
                          const std::vector<std::string>& langs, std::uint64_t seed) {
  EvalReport report;
  for (const auto& lang : langs) {
    const auto sentences = lang == bundle.source_lang ? bundle.sentences(split, Variant::S)
                                                      : bundle.sentences(split, Variant::T, lang);
    Score s = evaluate_sentences(model, sentences);
    report.languages.push_back({lang, {{seed, s}}, s.f1});
  }
  return report;
}

EvalReport aggregate(std::span<const EvalReport> reports) {
  EvalReport out;
  for (const auto& r : reports) {
    for (const auto& l : r.languages) {
      auto it = std::find_if(out.languages.begin(), out.languages.end(),
                             [&](const LanguageReport& x) { return x.lang == l.lang; });
      if (it == out.languages.end()) {
        out.languages.push_back({l.lang, {}, 0.0});
        it = out.languages.end() - 1;
      }
      it->seeds.insert(it->seeds.end(), l.seeds.begin(), l.seeds.end());
    }
  }
  for (auto& l : out.languages) {
    // Sum in seed order so the mean does not depend on report order.
    std::vector<double> f1s;
    for (const auto& s : l.seeds) f1s.push_back(s.score.f1);
    std::sort(f1s.begin(), f1s.end());
    double total = 0.0;
    for (double f : f1s) total += f;
    l.mean_f1 = f1s.empty() ? 0.0 : total / static_cast<double>(f1s.size());
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  ordered_json langs = ordered_json::array();
  for (const auto& l : report.languages) {
    ordered_json seeds = ordered_json::array();
    for (const auto& s : l.seeds) {
      seeds.push_back({{"seed", s.seed},
                       {"precision", s.score.precision},
                       {"recall", s.score.recall},
                       {"f1", s.score.f1},
                       {"gold", s.score.gold},
                       {"predicted", s.score.predicted},
                       {"matched", s.score.matched}});
    }
    langs.push_back({{"lang", l.lang}, {"mean_f1", l.mean_f1}, {"seeds", seeds}});
  }
  ordered_json j;
  j["languages"] = langs;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    auto j = ordered_json::parse(text);
    for (const auto& l : j.at("languages")) {
      LanguageReport lr;
      lr.lang = l.at("lang").get<std::string>();
      lr.mean_f1 = l.at("mean_f1").get<double>();
      for (const auto& s : l.at("seeds")) {
        SeedScore ss;
        ss.seed = s.at("seed").get<std::uint64_t>();
        ss.score.precision = s.at("precision").get<double>();
        ss.score.recall = s.at("recall").get<double>();
        ss.score.f1 = s.at("f1").get<double>();
        ss.score.gold = s.at("gold").get<std::size_t>();
        ss.score.predicted = s.at("predicted").get<std::size_t>();
        ss.score.matched = s.at("matched").get<std::size_t>();
        lr.seeds.push_back(ss);
      }
      r.languages.push_back(std::move(lr));
    }
  } catch (const std::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "language,seed,precision,recall,f1\n";
  char buf[160];
  for (const auto& l : report.languages)
    for (const auto& s : l.seeds) {
      std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f,%.6f\n", l.lang.c_str(),
                    static_cast<unsigned long long>(s.seed), s.score.precision, s.score.recall, s.score.f1);
      out += buf;
    }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (stem + ".json"), std::ios::binary) << report_json(report) << "\n";
  std::ofstream(dir / (stem + ".csv"), std::ios::binary) << report_csv(report);
}

}  // namespace msmo
