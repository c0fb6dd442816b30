#pragma once

#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace teko {

// Dictionary linker: a local stand-in for a remote annotation service.
// Surface forms are normalized phrases mapping to (entity, prior) candidates.
struct LinkerLexicon {
  // candidates sorted by prior descending, then entity id ascending
  std::map<std::string, std::vector<std::pair<std::string, double>>> surface_forms;
  size_t max_phrase_tokens = 0;
};

struct Mention {
  std::string doc_id;
  std::string entity_id;
  size_t begin = 0;
  size_t end = 0;
  double score = 0.0;
  bool span_unknown = false;
};

struct AnnotationSet {
  std::vector<Mention> mentions;  // deduplicated per (doc, entity), max score kept
  double threshold_used = 0.0;
};

// lexicon file: phrase <TAB> entity_id <TAB> prior
LinkerLexicon load_lexicon(const std::string& path);
LinkerLexicon parse_lexicon(const std::string& content, const std::string& origin);

// Greedy longest-match left-to-right over the tokenized document text;
// matched spans do not overlap. Each match emits one mention for the
// top-prior candidate, score = prior. Output is ordered by (doc order,
// span start) and is a pure function of the inputs.
std::vector<Mention> annotate(const DocumentSet& docs, const LinkerLexicon& lexicon);

// Keeps mentions with score >= delta_tag (inclusive), deduplicates per
// (doc, entity) keeping the highest-scoring mention.
AnnotationSet filter_mentions(const std::vector<Mention>& mentions, double delta_tag);

// annotations file: doc_id <TAB> entity_id <TAB> score [<TAB> begin <TAB> end]
std::vector<Mention> load_annotations(const std::string& path, const DocumentSet& docs);
std::vector<Mention> parse_annotations(const std::string& content, const DocumentSet& docs,
                                       const std::string& origin);
std::string format_annotations(const std::vector<Mention>& mentions);
void save_annotations(const std::string& path, const std::vector<Mention>& mentions);

// Sorted unique entity ids appearing in an annotation set.
std::vector<std::string> annotated_entities(const AnnotationSet& ann);

}  // namespace teko
