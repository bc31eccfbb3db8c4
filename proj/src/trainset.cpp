#include "dqlore/trainset.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "dqlore/pipeline.hpp"
#include "json.hpp"

namespace dqlore {

void validate_instance(const ContrastiveInstance& inst) {
  if (inst.positives.size() != inst.negatives.size())
    throw ValidationError("instance '" + inst.anchor_id +
                          "': positive/negative counts differ");
  std::set<std::string> pos(inst.positives.begin(), inst.positives.end());
  std::set<std::string> neg(inst.negatives.begin(), inst.negatives.end());
  if (pos.size() != inst.positives.size() || neg.size() != inst.negatives.size())
    throw ValidationError("instance '" + inst.anchor_id + "': repeated ids");
  for (const auto& id : pos)
    if (neg.count(id))
      throw ValidationError("instance '" + inst.anchor_id + "': id '" + id +
                            "' is both positive and negative");
  if (pos.count(inst.anchor_id) || neg.count(inst.anchor_id))
    throw ValidationError("instance '" + inst.anchor_id +
                          "': anchor appears among its own pairs");

  std::map<std::string, double> score;
  for (const auto& sc : inst.all_scored) score[sc.id] = sc.lm_score;
  double min_pos = std::numeric_limits<double>::infinity();
  double max_neg = -std::numeric_limits<double>::infinity();
  for (const auto& id : inst.positives) {
    auto it = score.find(id);
    if (it == score.end())
      throw ValidationError("instance '" + inst.anchor_id + "': positive '" +
                            id + "' missing from all_scored");
    min_pos = std::min(min_pos, it->second);
  }
  for (const auto& id : inst.negatives) {
    auto it = score.find(id);
    if (it == score.end())
      throw ValidationError("instance '" + inst.anchor_id + "': negative '" +
                            id + "' missing from all_scored");
    max_neg = std::max(max_neg, it->second);
  }
  if (!inst.positives.empty() && min_pos < max_neg)
    throw ValidationError("instance '" + inst.anchor_id +
                          "': a negative outscores a positive");
}

std::vector<std::string> mine_candidates(const Exemplar& anchor,
                                         const Pool& pool,
                                         const Bm25Index& index,
                                         std::size_t k) {
  if (k == 0) throw ValidationError("mine_candidates: k must be at least 1");
  if (!pool.contains(anchor.id))
    throw ValidationError("mine_candidates: anchor '" + anchor.id +
                          "' not in pool");
  if (pool.size() < 2)
    throw ValidationError("mine_candidates: pool has no candidates besides the anchor");
  auto ranked = index.top_k(anchor.question, k, {anchor.id});
  std::vector<std::string> ids;
  ids.reserve(ranked.size());
  for (auto& [id, s] : ranked) ids.push_back(id);
  return ids;
}

std::vector<ScoredCandidate> score_candidates(
    const Exemplar& anchor, const std::vector<std::string>& candidate_ids,
    const Pool& pool, LmClient& backend) {
  if (candidate_ids.empty())
    throw ValidationError("score_candidates: no candidates for anchor '" +
                          anchor.id + "'");
  std::vector<ScoredCandidate> out;
  out.reserve(candidate_ids.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    const Exemplar& cand = pool.by_id(candidate_ids[i]);
    std::string context = render_exemplar(cand) + "\n\nQuestion: " +
                          anchor.question + "\nA: Let's think step by step\n";
    ScoredCandidate sc;
    sc.id = cand.id;
    sc.bm25_rank = i + 1;
    try {
      sc.lm_score = backend.score_completion(context, anchor.cot);
    } catch (const Error& ex) {
      throw Error("scoring candidate '" + cand.id + "' for anchor '" +
                  anchor.id + "': " + ex.what());
    }
    out.push_back(std::move(sc));
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_pos_neg(
    std::vector<ScoredCandidate> scored, std::size_t t) {
  if (t == 0) throw ValidationError("split_pos_neg: t must be at least 1");
  if (2 * t > scored.size())
    throw ValidationError("split_pos_neg: need at least 2t=" +
                          std::to_string(2 * t) + " scored candidates, have " +
                          std::to_string(scored.size()));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.lm_score != b.lm_score) return a.lm_score > b.lm_score;
    if (a.bm25_rank != b.bm25_rank) return a.bm25_rank < b.bm25_rank;
    return a.id < b.id;
  });
  std::vector<std::string> pos, neg;
  for (std::size_t i = 0; i < t; ++i) pos.push_back(scored[i].id);
  for (std::size_t i = scored.size() - t; i < scored.size(); ++i)
    neg.push_back(scored[i].id);
  return {std::move(pos), std::move(neg)};
}

std::vector<ContrastiveInstance> build_trainset(
    const Pool& pool, const Bm25Index& index, LmClient& backend, std::size_t k,
    std::size_t t, const std::vector<std::string>* anchors) {
  std::vector<Exemplar> selected;
  if (anchors) {
    for (const auto& id : *anchors) selected.push_back(pool.by_id(id));
  } else {
    selected = pool.items();
  }
  std::vector<ContrastiveInstance> out;
  for (const Exemplar& anchor : selected) {
    if (anchor.cot.empty()) continue;
    auto candidates = mine_candidates(anchor, pool, index, k);
    if (candidates.size() < 2 * t) {
      std::cerr << "warning: skipping anchor '" << anchor.id << "': only "
                << candidates.size() << " candidates, need " << 2 * t << "\n";
      continue;
    }
    ContrastiveInstance inst;
    inst.anchor_id = anchor.id;
    inst.all_scored = score_candidates(anchor, candidates, pool, backend);
    std::tie(inst.positives, inst.negatives) = split_pos_neg(inst.all_scored, t);
    validate_instance(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

void save_trainset(const std::vector<ContrastiveInstance>& instances,
                   const std::string& path,
                   const std::string& run_config_json) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trainset file: " + path);
  if (!run_config_json.empty()) {
    nlohmann::json header;
    header["run_config"] = nlohmann::json::parse(run_config_json);
    out << header.dump() << "\n";
  }
  for (const auto& inst : instances) {
    nlohmann::json j;
    j["anchor_id"] = inst.anchor_id;
    j["positives"] = inst.positives;
    j["negatives"] = inst.negatives;
    nlohmann::json scored = nlohmann::json::array();
    for (const auto& sc : inst.all_scored)
      scored.push_back({{"id", sc.id},
                        {"bm25_rank", sc.bm25_rank},
                        {"lm_score", sc.lm_score}});
    j["all_scored"] = std::move(scored);
    out << j.dump() << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

std::vector<ContrastiveInstance> load_trainset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trainset file: " + path);
  std::vector<ContrastiveInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": invalid JSON: " + ex.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    if (!j.contains("anchor_id")) continue;  // config header line
    ContrastiveInstance inst;
    try {
      inst.anchor_id = j.at("anchor_id").get<std::string>();
      inst.positives = j.at("positives").get<std::vector<std::string>>();
      inst.negatives = j.at("negatives").get<std::vector<std::string>>();
      for (const auto& sc : j.at("all_scored")) {
        ScoredCandidate s;
        s.id = sc.at("id").get<std::string>();
        s.bm25_rank = sc.at("bm25_rank").get<std::size_t>();
        s.lm_score = sc.at("lm_score").get<double>();
        inst.all_scored.push_back(std::move(s));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": bad instance layout: " + ex.what());
    }
    validate_instance(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace dqlore
