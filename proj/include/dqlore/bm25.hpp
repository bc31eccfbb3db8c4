#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dqlore/corpus.hpp"

namespace dqlore {

enum class FieldMode { kQuestionOnly, kQuestionAndCot };

const char* to_string(FieldMode m);
FieldMode field_mode_from_string(const std::string& s);

// Okapi BM25 with idf(t) = ln((N - df + 0.5)/(df + 0.5) + 1)
class Bm25Index {
 public:
  static Bm25Index build(const Pool& pool, FieldMode mode, double k1 = 1.5,
                         double b = 0.75);

  double score(const std::vector<std::string>& query_tokens,
               const std::string& doc_id) const;

  // Descending score, ties broken by ascending id. Zero-score docs are kept
  // so the ranking always covers the whole pool minus exclusions.
  std::vector<std::pair<std::string, double>> top_k(
      const std::string& query_text, std::size_t k,
      const std::set<std::string>& exclude = {}) const;

  std::size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  std::size_t df(const std::string& term) const;
  double k1() const { return k1_; }
  double b() const { return b_; }
  FieldMode field_mode() const { return mode_; }

  void save(const std::string& path) const;
  static Bm25Index load(const std::string& path);

 private:
  std::vector<std::string> doc_ids_;                       // load order
  std::map<std::string, std::size_t> doc_index_;           // id -> position
  std::vector<std::map<std::string, std::size_t>> tfs_;    // per doc
  std::vector<std::size_t> doc_lens_;
  std::map<std::string, std::size_t> df_;
  double avg_doc_len_ = 0.0;
  double k1_ = 1.5;
  double b_ = 0.75;
  FieldMode mode_ = FieldMode::kQuestionAndCot;

  double score_at(const std::vector<std::string>& query_tokens,
                  std::size_t doc) const;
};

}  // namespace dqlore
