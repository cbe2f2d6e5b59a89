#include "msmo/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace msmo {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::S: return "S";
    case Variant::T: return "T";
    case Variant::ST: return "S_T";
    case Variant::TS: return "T_S";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "S") return Variant::S;
  if (s == "T") return Variant::T;
  if (s == "S_T") return Variant::ST;
  if (s == "T_S") return Variant::TS;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Dev: return "dev";
    case SplitName::Test: return "test";
  }
  return "?";
}

bool CorpusBundle::empty() const {
  return std::all_of(splits.begin(), splits.end(), [](const auto& s) { return s.empty(); });
}

std::vector<const ParallelExample*> CorpusBundle::examples(SplitName s, std::string_view target) const {
  std::vector<const ParallelExample*> out;
  for (const auto& ex : split(s))
    if (target.empty() || ex.target_lang == target) out.push_back(&ex);
  return out;
}

std::vector<const TaggedSentence*> CorpusBundle::sentences(SplitName s, Variant variant,
                                                           std::string_view target) const {
  std::vector<const TaggedSentence*> out;
  std::set<std::string> seen;
  for (const auto* ex : examples(s, target)) {
    const TaggedSentence& t = ex->view(variant);
    if (seen.insert(t.key()).second) out.push_back(&t);
  }
  return out;
}

std::vector<UnlabeledSentence> unlabeled_targets(const CorpusBundle& bundle, SplitName s,
                                                 std::string_view target) {
  std::vector<UnlabeledSentence> out;
  for (const auto* t : bundle.sentences(s, Variant::T, target)) out.push_back({t->id, t->lang, t->tokens});
  return out;
}

// ---- raw marker format -----------------------------------------------------

RawFormatError::RawFormatError(std::size_t offset, const std::string& reason)
    : FormatError(reason + " at character " + std::to_string(offset)), offset_(offset) {}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace

RawParse parse_raw(std::string_view line) {
  RawParse out;
  std::set<int> indices;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    const char c = line[i];
    if (is_space(c)) { ++i; continue; }
    if (c == '}') throw RawFormatError(i, "unbalanced marker");
    if (c != '{') {
      std::size_t j = i;
      while (j < n && !is_space(line[j]) && line[j] != '{' && line[j] != '}') ++j;
      if (j < n && line[j] == '}') throw RawFormatError(j, "unbalanced marker");
      out.tokens.emplace_back(line.substr(i, j - i));
      i = j;
      continue;
    }
    // {idx:POL tok tok}
    const std::size_t open = i;
    const std::size_t close = line.find('}', open);
    const std::size_t nested = line.find('{', open + 1);
    if (close == std::string_view::npos) throw RawFormatError(open, "unbalanced marker");
    if (nested != std::string_view::npos && nested < close) throw RawFormatError(nested, "overlapping marker");
    std::string_view body = line.substr(open + 1, close - open - 1);
    const std::size_t colon = body.find(':');
    if (colon == std::string_view::npos || colon == 0) throw RawFormatError(open, "marker missing 'idx:'");
    int index = 0;
    try {
      std::size_t used = 0;
      index = std::stoi(std::string(body.substr(0, colon)), &used);
      if (used != colon) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw RawFormatError(open + 1, "marker index is not an integer");
    }
    if (!indices.insert(index).second) throw RawFormatError(open, "duplicate marker index " + std::to_string(index));
    std::string_view rest = body.substr(colon + 1);
    std::size_t k = 0;
    while (k < rest.size() && !is_space(rest[k])) ++k;
    Polarity pol;
    try {
      pol = parse_polarity(rest.substr(0, k));
    } catch (const std::exception&) {
      throw RawFormatError(open + 2 + colon, "unknown polarity '" + std::string(rest.substr(0, k)) + "'");
    }
    const std::size_t first = out.tokens.size();
    std::istringstream words{std::string(rest.substr(k))};
    for (std::string w; words >> w;) out.tokens.push_back(w);
    if (out.tokens.size() == first) throw RawFormatError(open, "empty aspect marker");
    out.spans.push_back({AspectSpan{first, out.tokens.size() - 1, pol}, index});
    i = close + 1;
  }
  return out;
}

RawParse code_switch(const RawParse& into, const RawParse& from) {
  RawParse out;
  std::size_t cursor = 0;
  for (const auto& ms : into.spans) {
    auto it = std::find_if(from.spans.begin(), from.spans.end(),
                           [&](const MarkedSpan& m) { return m.index == ms.index; });
    if (it == from.spans.end())
      throw FormatError("code_switch: no counterpart for aspect index " + std::to_string(ms.index));
    for (; cursor < ms.span.start; ++cursor) out.tokens.push_back(into.tokens[cursor]);
    const std::size_t start = out.tokens.size();
    for (std::size_t k = it->span.start; k <= it->span.end; ++k) out.tokens.push_back(from.tokens[k]);
    out.spans.push_back({AspectSpan{start, out.tokens.size() - 1, ms.span.polarity}, ms.index});
    cursor = ms.span.end + 1;
  }
  for (; cursor < into.tokens.size(); ++cursor) out.tokens.push_back(into.tokens[cursor]);
  return out;
}

namespace {

std::vector<AspectSpan> plain_spans(const RawParse& r) {
  std::vector<AspectSpan> s;
  for (const auto& m : r.spans) s.push_back(m.span);
  return s;
}

TaggedSentence to_sentence(std::string id, std::string lang, Variant v, const RawParse& r) {
  TaggedSentence s;
  s.id = std::move(id);
  s.lang = std::move(lang);
  s.variant = v;
  s.tokens = r.tokens;
  s.tags = encode_spans(plain_spans(r), r.tokens.size());
  return s;
}

// Position of a marked span within the sentence's start-ordered span list.
std::size_t ordinal(const RawParse& r, int index) {
  const auto& target = std::find_if(r.spans.begin(), r.spans.end(),
                                    [&](const MarkedSpan& m) { return m.index == index; })->span;
  std::size_t k = 0;
  for (const auto& m : r.spans)
    if (m.span.start < target.start) ++k;
  return k;
}

}  // namespace

ParallelExample make_parallel_example(std::string id, const std::string& source_lang,
                                      const std::string& target_lang, const RawParse& source,
                                      const RawParse& target) {
  std::set<int> si, ti;
  for (const auto& m : source.spans) si.insert(m.index);
  for (const auto& m : target.spans) ti.insert(m.index);
  if (si != ti) throw FormatError("example " + id + ": source and target marker indices differ");
  for (const auto& m : source.spans) {
    auto it = std::find_if(target.spans.begin(), target.spans.end(),
                           [&](const MarkedSpan& t) { return t.index == m.index; });
    if (it->span.polarity != m.span.polarity)
      throw FormatError("example " + id + ": aspect " + std::to_string(m.index) + " has different polarities");
  }

  const RawParse st = code_switch(source, target);
  const RawParse ts = code_switch(target, source);

  ParallelExample ex;
  ex.id = id;
  ex.target_lang = target_lang;
  ex.view(Variant::S) = to_sentence(id, source_lang, Variant::S, source);
  ex.view(Variant::T) = to_sentence(id, target_lang, Variant::T, target);
  // Code-switched views keep the parent's id with a variant suffix.
  ex.view(Variant::ST) = to_sentence(id + "/S_T", target_lang, Variant::ST, st);
  ex.view(Variant::TS) = to_sentence(id + "/T_S", target_lang, Variant::TS, ts);

  for (const auto& m : source.spans)
    ex.alignments.push_back({Variant::S, ordinal(source, m.index), Variant::T, ordinal(target, m.index)});
  for (const auto& m : source.spans)
    ex.alignments.push_back({Variant::S, ordinal(source, m.index), Variant::ST, ordinal(st, m.index)});
  for (const auto& m : target.spans)
    ex.alignments.push_back({Variant::T, ordinal(target, m.index), Variant::TS, ordinal(ts, m.index)});
  return ex;
}

CorpusBundle import_raw(const std::filesystem::path& path, const std::string& source_lang,
                        const std::string& target_lang, SplitName split) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  CorpusBundle bundle;
  bundle.source_lang = source_lang;
  bundle.target_langs = {target_lang};
  std::vector<std::pair<std::size_t, std::string>> group;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (group.empty()) return;
    if (group.size() != 2)
      throw FormatError("line " + std::to_string(group.front().first) + ": expected a source line and a target line");
    RawParse src, tgt;
    try {
      src = parse_raw(group[0].second);
    } catch (const RawFormatError& e) {
      throw FormatError("line " + std::to_string(group[0].first) + ": " + e.what());
    }
    try {
      tgt = parse_raw(group[1].second);
    } catch (const RawFormatError& e) {
      throw FormatError("line " + std::to_string(group[1].first) + ": " + e.what());
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "raw-%06zu", bundle.split(split).size());
    bundle.split(split).push_back(make_parallel_example(buf, source_lang, target_lang, src, tgt));
    group.clear();
  };
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) {
      flush();
    } else {
      group.emplace_back(line_no, line);
    }
  }
  flush();
  return bundle;
}

// ---- vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = {"<pad>", "<unk>"};
  for (const auto& t : tokens)
    if (t != "<pad>" && t != "<unk>") tokens_.push_back(t);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw std::invalid_argument("duplicate vocabulary entry '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::from_bundle(const CorpusBundle& bundle) {
  std::set<std::string> all;
  for (const auto& split : bundle.splits)
    for (const auto& ex : split)
      for (const auto& v : ex.views) all.insert(v.tokens.begin(), v.tokens.end());
  return Vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::vector<std::size_t> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

// ---- JSONL -----------------------------------------------------------------

namespace {

ordered_json record(const TaggedSentence& s, const std::vector<PairAlignment>& align) {
  ordered_json j;
  j["id"] = s.id;
  j["lang"] = s.lang;
  j["variant"] = std::string(to_string(s.variant));
  j["tokens"] = s.tokens;
  std::vector<std::string> tags;
  for (Tag t : s.tags) tags.push_back(to_string(t));
  j["tags"] = tags;
  ordered_json a = ordered_json::array();
  for (const auto& p : align)
    a.push_back({std::string(to_string(p.a)), p.span_a, std::string(to_string(p.b)), p.span_b});
  j["align"] = a;
  return j;
}

std::string strip_variant_suffix(const std::string& id) {
  for (std::string_view suf : {"/S_T", "/T_S"}) {
    if (id.size() > suf.size() && id.compare(id.size() - suf.size(), suf.size(), suf) == 0)
      return id.substr(0, id.size() - suf.size());
  }
  return id;
}

}  // namespace

std::string write_split_jsonl(const CorpusBundle& bundle, SplitName split) {
  std::string out;
  std::set<std::string> written_sources;
  for (const auto& ex : bundle.split(split)) {
    if (written_sources.insert(ex.view(Variant::S).id).second)
      out += record(ex.view(Variant::S), {}).dump() + "\n";
    for (Variant v : {Variant::T, Variant::ST, Variant::TS}) {
      std::vector<PairAlignment> mine;
      for (const auto& a : ex.alignments)
        if (a.b == v) mine.push_back(a);
      out += record(ex.view(v), mine).dump() + "\n";
    }
  }
  return out;
}

void read_split_jsonl(std::string_view text, SplitName split, CorpusBundle& into) {
  struct Group {
    ParallelExample ex;
    std::array<bool, 4> have{};
    std::size_t first_line = 0;
  };
  std::map<std::string, std::pair<TaggedSentence, std::size_t>> sources;
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> group_index;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    auto fail = [&](const std::string& why) -> FormatError {
      return FormatError("line " + std::to_string(line_no) + ": " + why);
    };
    TaggedSentence s;
    std::vector<PairAlignment> align;
    try {
      auto j = ordered_json::parse(line);
      for (const char* field : {"id", "lang", "variant", "tokens", "tags"})
        if (!j.contains(field)) throw fail(std::string("missing field \"") + field + "\"");
      s.id = j.at("id").get<std::string>();
      s.lang = j.at("lang").get<std::string>();
      s.variant = parse_variant(j.at("variant").get<std::string>());
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& t : j.at("tags").get<std::vector<std::string>>()) s.tags.push_back(parse_tag(t));
      if (j.contains("align")) {
        for (const auto& a : j.at("align")) {
          if (!a.is_array() || a.size() != 4) throw fail("alignment entries must have 4 elements");
          align.push_back({parse_variant(a[0].get<std::string>()), a[1].get<std::size_t>(),
                           parse_variant(a[2].get<std::string>()), a[3].get<std::size_t>()});
        }
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
    if (s.tokens.size() != s.tags.size())
      throw fail("tokens and tags differ in length (" + std::to_string(s.tokens.size()) + " vs " +
                 std::to_string(s.tags.size()) + ")");
    try {
      (void)decode_strict(s.tags);
    } catch (const LabelError& e) {
      throw fail(std::string("malformed tags: ") + e.what());
    }

    if (s.variant == Variant::S) {
      if (into.source_lang.empty()) into.source_lang = s.lang;
      if (s.lang != into.source_lang) throw fail("source sentences in more than one language");
      std::string id = s.id;
      sources[id] = {std::move(s), line_no};
      continue;
    }
    const std::string base = strip_variant_suffix(s.id);
    auto key = std::make_pair(base, s.lang);
    auto [it, fresh] = group_index.emplace(key, groups.size());
    if (fresh) {
      groups.emplace_back();
      groups.back().ex.id = base;
      groups.back().ex.target_lang = s.lang;
      groups.back().first_line = line_no;
    }
    Group& g = groups[it->second];
    const auto vi = static_cast<std::size_t>(s.variant);
    if (g.have[vi]) throw fail("duplicate " + std::string(to_string(s.variant)) + " record for " + base);
    g.have[vi] = true;
    g.ex.alignments.insert(g.ex.alignments.end(), align.begin(), align.end());
    g.ex.view(s.variant) = std::move(s);
  }

  for (auto& g : groups) {
    auto line = [&] { return "line " + std::to_string(g.first_line) + ": "; };
    auto src = sources.find(g.ex.id);
    if (src == sources.end()) throw FormatError(line() + "no source sentence with id " + g.ex.id);
    g.ex.view(Variant::S) = src->second.first;
    for (Variant v : {Variant::T, Variant::ST, Variant::TS})
      if (!g.have[static_cast<std::size_t>(v)])
        throw FormatError(line() + "example " + g.ex.id + " lacks its " + std::string(to_string(v)) + " record");
    // Alignments are stored per record; restore the canonical order.
    std::stable_sort(g.ex.alignments.begin(), g.ex.alignments.end(),
                     [](const PairAlignment& a, const PairAlignment& b) { return a.b < b.b; });
    for (const auto& a : g.ex.alignments) {
      const auto na = g.ex.view(a.a).spans();
      const auto nb = g.ex.view(a.b).spans();
      if (a.span_a >= na.size() || a.span_b >= nb.size())
        throw FormatError(line() + "alignment refers to a missing span in " + g.ex.id);
      if (na[a.span_a].polarity != nb[a.span_b].polarity)
        throw FormatError(line() + "aligned spans differ in polarity in " + g.ex.id);
    }
    if (std::find(into.target_langs.begin(), into.target_langs.end(), g.ex.target_lang) == into.target_langs.end())
      into.target_langs.push_back(g.ex.target_lang);
    into.split(split).push_back(std::move(g.ex));
  }
}

void save_bundle(const CorpusBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (SplitName s : kSplits) {
    std::ofstream out(dir / (std::string(to_string(s)) + ".jsonl"), std::ios::binary);
    if (!out) throw FormatError("cannot write to " + dir.string());
    out << write_split_jsonl(bundle, s);
  }
}

CorpusBundle load_bundle(const std::filesystem::path& dir) {
  CorpusBundle bundle;
  for (SplitName s : kSplits) {
    const auto file = dir / (std::string(to_string(s)) + ".jsonl");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      read_split_jsonl(buf.str(), s, bundle);
    } catch (const FormatError& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
  }
  return bundle;
}

std::vector<SplitStats> corpus_stats(const CorpusBundle& bundle) {
  std::vector<SplitStats> out;
  auto add = [&](const std::string& lang, SplitName s, const std::vector<const TaggedSentence*>& sents) {
    SplitStats st{lang, std::string(to_string(s)), sents.size(), 0};
    for (const auto* t : sents) st.aspects += t->spans().size();
    out.push_back(st);
  };
  for (SplitName s : kSplits) add(bundle.source_lang, s, bundle.sentences(s, Variant::S));
  for (const auto& lang : bundle.target_langs)
    for (SplitName s : kSplits) add(lang, s, bundle.sentences(s, Variant::T, lang));
  return out;
}

std::string format_stats(const std::vector<SplitStats>& stats) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-8s %-6s %8s %8s\n", "lang", "split", "#S", "#A");
  os << buf;
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%-8s %-6s %8zu %8zu\n", s.lang.c_str(), s.split.c_str(), s.sentences, s.aspects);
    os << buf;
  }
  return os.str();
}

}  // namespace msmo
