#include "dqlore/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace dqlore {

const char* to_string(FieldMode m) {
  return m == FieldMode::kQuestionOnly ? "question" : "question+cot";
}

FieldMode field_mode_from_string(const std::string& s) {
  if (s == "question") return FieldMode::kQuestionOnly;
  if (s == "question+cot") return FieldMode::kQuestionAndCot;
  throw ValidationError("unknown field mode '" + s +
                        "' (expected question or question+cot)");
}

Bm25Index Bm25Index::build(const Pool& pool, FieldMode mode, double k1,
                           double b) {
  if (pool.size() == 0) throw ValidationError("bm25: cannot index an empty pool");
  if (!(k1 > 0.0)) throw ValidationError("bm25: k1 must be positive");
  if (b < 0.0 || b > 1.0) throw ValidationError("bm25: b must be in [0, 1]");

  Bm25Index idx;
  idx.k1_ = k1;
  idx.b_ = b;
  idx.mode_ = mode;

  std::size_t total_len = 0;
  for (const Exemplar& e : pool.items()) {
    std::string text = e.question;
    if (mode == FieldMode::kQuestionAndCot && !e.cot.empty())
      text += " " + e.cot;
    auto tokens = tokenize(text);

    std::map<std::string, std::size_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, n] : tf) ++idx.df_[term];

    idx.doc_index_[e.id] = idx.doc_ids_.size();
    idx.doc_ids_.push_back(e.id);
    idx.doc_lens_.push_back(tokens.size());
    idx.tfs_.push_back(std::move(tf));
    total_len += tokens.size();
  }
  idx.avg_doc_len_ =
      static_cast<double>(total_len) / static_cast<double>(pool.size());
  return idx;
}

std::size_t Bm25Index::df(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double Bm25Index::score_at(const std::vector<std::string>& query_tokens,
                           std::size_t doc) const {
  const auto& tf = tfs_[doc];
  double n = static_cast<double>(doc_ids_.size());
  double dl = static_cast<double>(doc_lens_[doc]);
  double norm = avg_doc_len_ > 0.0 ? dl / avg_doc_len_ : 0.0;
  double total = 0.0;
  for (const auto& term : query_tokens) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    double f = static_cast<double>(it->second);
    double d = static_cast<double>(df_.at(term));
    double idf = std::log((n - d + 0.5) / (d + 0.5) + 1.0);
    total += idf * f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * norm));
  }
  return total;
}

double Bm25Index::score(const std::vector<std::string>& query_tokens,
                        const std::string& doc_id) const {
  auto it = doc_index_.find(doc_id);
  if (it == doc_index_.end())
    throw ValidationError("bm25: unknown doc id '" + doc_id + "'");
  return score_at(query_tokens, it->second);
}

std::vector<std::pair<std::string, double>> Bm25Index::top_k(
    const std::string& query_text, std::size_t k,
    const std::set<std::string>& exclude) const {
  if (k == 0) throw ValidationError("bm25: k must be at least 1");
  auto query = tokenize(query_text);
  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(doc_ids_.size());
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    if (exclude.count(doc_ids_[i])) continue;
    ranked.emplace_back(doc_ids_[i], score_at(query, i));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

void Bm25Index::save(const std::string& path) const {
  nlohmann::json j;
  j["k1"] = k1_;
  j["b"] = b_;
  j["field_mode"] = to_string(mode_);
  j["avg_doc_len"] = avg_doc_len_;
  j["doc_ids"] = doc_ids_;
  j["doc_lens"] = doc_lens_;
  j["df"] = df_;
  nlohmann::json tfs = nlohmann::json::array();
  for (const auto& tf : tfs_) tfs.push_back(tf);
  j["tfs"] = std::move(tfs);
  std::ofstream out(path);
  if (!out) throw Error("cannot write index file: " + path);
  out << j.dump(2) << "\n";
}

Bm25Index Bm25Index::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open index file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": invalid JSON: " + ex.what());
  }
  Bm25Index idx;
  try {
    idx.k1_ = j.at("k1").get<double>();
    idx.b_ = j.at("b").get<double>();
    idx.mode_ = field_mode_from_string(j.at("field_mode").get<std::string>());
    idx.avg_doc_len_ = j.at("avg_doc_len").get<double>();
    idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
    idx.doc_lens_ = j.at("doc_lens").get<std::vector<std::size_t>>();
    idx.df_ = j.at("df").get<std::map<std::string, std::size_t>>();
    for (const auto& tf : j.at("tfs"))
      idx.tfs_.push_back(tf.get<std::map<std::string, std::size_t>>());
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": bad index layout: " + ex.what());
  }
  for (std::size_t i = 0; i < idx.doc_ids_.size(); ++i)
    idx.doc_index_[idx.doc_ids_[i]] = i;
  if (idx.tfs_.size() != idx.doc_ids_.size() ||
      idx.doc_lens_.size() != idx.doc_ids_.size())
    throw ValidationError(path + ": inconsistent index arrays");
  return idx;
}

}  // namespace dqlore
