#include "linker.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace teko {

static std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : content) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

LinkerLexicon parse_lexicon(const std::string& content, const std::string& origin) {
  LinkerLexicon lex;
  auto lines = lines_of(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    double prior = 0;
    if (!parse_double(trim(fields[2]), &prior))
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1) + ": bad prior");
    if (prior < 0.0 || prior > 1.0)
      fail(Err::PriorOutOfRange, fields[2] + " for phrase '" + fields[0] + "'");
    std::string phrase = normalize_phrase(fields[0]);
    if (phrase.empty()) fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    lex.surface_forms[phrase].emplace_back(fields[1], prior);
  }
  for (auto& [phrase, cands] : lex.surface_forms) {
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    size_t tokens = static_cast<size_t>(std::count(phrase.begin(), phrase.end(), ' ')) + 1;
    lex.max_phrase_tokens = std::max(lex.max_phrase_tokens, tokens);
  }
  return lex;
}

LinkerLexicon load_lexicon(const std::string& path) {
  return parse_lexicon(read_file(path), path);
}

std::vector<Mention> annotate(const DocumentSet& docs, const LinkerLexicon& lexicon) {
  std::vector<Mention> out;
  if (lexicon.surface_forms.empty()) return out;
  for (const auto& doc : docs.docs) {
    auto toks = tokenize(doc.text, true, 1);
    size_t i = 0;
    while (i < toks.size()) {
      size_t longest = std::min(lexicon.max_phrase_tokens, toks.size() - i);
      bool matched = false;
      for (size_t len = longest; len >= 1; --len) {
        std::string phrase;
        for (size_t k = 0; k < len; ++k) {
          if (k) phrase.push_back(' ');
          phrase += toks[i + k].text;
        }
        auto it = lexicon.surface_forms.find(phrase);
        if (it == lexicon.surface_forms.end() || it->second.empty()) continue;
        const auto& top = it->second.front();
        Mention m;
        m.doc_id = doc.id;
        m.entity_id = top.first;
        m.begin = toks[i].begin;
        m.end = toks[i + len - 1].end;
        m.score = top.second;
        out.push_back(std::move(m));
        i += len;
        matched = true;
        break;
      }
      if (!matched) ++i;
    }
  }
  return out;
}

AnnotationSet filter_mentions(const std::vector<Mention>& mentions, double delta_tag) {
  if (delta_tag < 0.0 || delta_tag > 1.0) fail(Err::ThresholdOutOfRange, fmt_double(delta_tag));
  AnnotationSet set;
  set.threshold_used = delta_tag;
  std::map<std::pair<std::string, std::string>, Mention> best;
  for (const auto& m : mentions) {
    if (m.score < delta_tag) continue;
    auto key = std::make_pair(m.doc_id, m.entity_id);
    auto it = best.find(key);
    if (it == best.end() || m.score > it->second.score ||
        (m.score == it->second.score && m.begin < it->second.begin)) {
      best[key] = m;
    }
  }
  set.mentions.reserve(best.size());
  for (auto& [key, m] : best) set.mentions.push_back(m);
  return set;
}

std::vector<Mention> parse_annotations(const std::string& content, const DocumentSet& docs,
                                       const std::string& origin) {
  std::vector<Mention> out;
  auto lines = lines_of(content);
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3 && fields.size() != 5)
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1));
    Mention m;
    m.doc_id = fields[0];
    m.entity_id = fields[1];
    if (!docs.contains(m.doc_id)) fail(Err::UnknownId, m.doc_id);
    if (!parse_double(trim(fields[2]), &m.score))
      fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1) + ": bad score");
    if (m.score < 0.0 || m.score > 1.0) fail(Err::ScoreOutOfRange, fields[2]);
    if (fields.size() == 5) {
      long long b = 0, e = 0;
      if (!parse_long(trim(fields[3]), &b) || !parse_long(trim(fields[4]), &e) || b < 0 || e < b)
        fail(Err::MalformedRecord, origin + " line " + std::to_string(ln + 1) + ": bad span");
      m.begin = static_cast<size_t>(b);
      m.end = static_cast<size_t>(e);
    } else {
      m.span_unknown = true;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mention> load_annotations(const std::string& path, const DocumentSet& docs) {
  return parse_annotations(read_file(path), docs, path);
}

std::string format_annotations(const std::vector<Mention>& mentions) {
  std::ostringstream ss;
  for (const auto& m : mentions) {
    ss << m.doc_id << '\t' << m.entity_id << '\t' << fmt_double(m.score);
    if (!m.span_unknown) ss << '\t' << m.begin << '\t' << m.end;
    ss << '\n';
  }
  return ss.str();
}

void save_annotations(const std::string& path, const std::vector<Mention>& mentions) {
  write_file_atomic(path, format_annotations(mentions));
}

std::vector<std::string> annotated_entities(const AnnotationSet& ann) {
  std::set<std::string> ids;
  for (const auto& m : ann.mentions) ids.insert(m.entity_id);
  return {ids.begin(), ids.end()};
}

}  // namespace teko
