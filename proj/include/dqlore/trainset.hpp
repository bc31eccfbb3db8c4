#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dqlore/bm25.hpp"
#include "dqlore/corpus.hpp"
#include "dqlore/lm.hpp"

namespace dqlore {

struct ScoredCandidate {
  std::string id;
  std::size_t bm25_rank = 0;  // 1-based rank in the mined candidate list
  double lm_score = 0.0;      // ln P(anchor.cot | candidate shot + question)
};

struct ContrastiveInstance {
  std::string anchor_id;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::vector<ScoredCandidate> all_scored;
};

// throws ValidationError if the positive/negative structure is inconsistent
void validate_instance(const ContrastiveInstance& inst);

// BM25 top-k over the anchor's question, anchor excluded
std::vector<std::string> mine_candidates(const Exemplar& anchor,
                                         const Pool& pool,
                                         const Bm25Index& index, std::size_t k);

// Scores each candidate by how likely the model is to produce the anchor's
// chain of thought when shown the candidate as a one-shot demonstration.
std::vector<ScoredCandidate> score_candidates(
    const Exemplar& anchor, const std::vector<std::string>& candidate_ids,
    const Pool& pool, LmClient& backend);

// top t by score become positives, bottom t become hard negatives
std::pair<std::vector<std::string>, std::vector<std::string>> split_pos_neg(
    std::vector<ScoredCandidate> scored, std::size_t t);

// anchors limits which pool items become anchors (candidates still come from
// the whole pool); null means every annotated exemplar
std::vector<ContrastiveInstance> build_trainset(
    const Pool& pool, const Bm25Index& index, LmClient& backend, std::size_t k,
    std::size_t t, const std::vector<std::string>* anchors = nullptr);

// JSONL; an optional leading header object carries the run configuration and
// is ignored by the loader
void save_trainset(const std::vector<ContrastiveInstance>& instances,
                   const std::string& path,
                   const std::string& run_config_json = "");
std::vector<ContrastiveInstance> load_trainset(const std::string& path);

}  // namespace dqlore
