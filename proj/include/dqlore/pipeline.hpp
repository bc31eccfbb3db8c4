#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dqlore/corpus.hpp"
#include "dqlore/encoder.hpp"
#include "dqlore/lm.hpp"
#include "dqlore/lore.hpp"

namespace dqlore {

enum class InitialStrategy { kComplexCot, kBm25, kRandom };
const char* to_string(InitialStrategy s);
InitialStrategy initial_strategy_from_string(const std::string& s);

struct Ablations {
  bool disable_dual_queries = false;  // skip the CoT query, retrieve by question alone
  bool disable_lore = false;          // keep the raw top-n of the dense ranking
  bool random_selection = false;      // ignore retrieval entirely (baseline)
};

// order of exemplars inside the final prompt
enum class PromptOrder { kAscendingSimilarity, kDescendingSimilarity };

struct PipelineConfig {
  std::size_t n_shots = 8;
  InitialStrategy initial_strategy = InitialStrategy::kComplexCot;
  LoreConfig lore;
  Ablations ablations;
  PromptOrder prompt_order = PromptOrder::kAscendingSimilarity;
  std::uint64_t seed = 0;
};

struct SelectionTrace {
  std::string question_id;
  std::string generated_cot;
  std::vector<std::string> initial_ids;
  std::vector<std::pair<std::string, double>> top_m;      // dense scores
  std::vector<std::pair<std::string, double>> final_ids;  // re-ranked scores
  Ablations ablations;
};

void validate_trace(const SelectionTrace& trace, std::size_t n);
std::string trace_to_json(const SelectionTrace& trace);

// "Question: {q}\nA: Let's think step by step\n{cot}\n\n" blocks followed by
// the bare question block; exemplars appear in the given order
std::string render_exemplar(const Exemplar& e);
std::string assemble_prompt(const std::vector<Exemplar>& exemplars,
                            const std::string& question);

// complex-cot: most reasoning steps first (ties: cot length, then id);
// bm25: top-n lexical matches against the question; random: seeded draw
std::vector<Exemplar> select_initial(const Pool& pool, std::size_t n,
                                     InitialStrategy strategy,
                                     std::uint64_t seed,
                                     const std::string& question = "");

// Asks the backend for a chain of thought. On a context-length error the
// least complex shot is dropped and the call retried, down to a single shot.
std::string first_query(LmClient& backend, std::vector<Exemplar> initial,
                        const std::string& question);

// dense retrieval: score every annotated exemplar against the embedding of
// question + "\n" + cot, return top M descending (ties by id)
std::vector<std::pair<std::string, double>> second_query(
    const EncoderModel& model, const Pool& pool, const std::string& question,
    const std::string& cot, std::size_t M,
    const std::string& question_id = "query");

// Full selection: initial shots -> generated CoT -> dense top-M -> re-rank
// to n. The returned exemplars are in prompt order (per config.prompt_order);
// the trace keeps ranked order, best first.
std::pair<std::vector<Exemplar>, SelectionTrace> dq_lore_select(
    const PipelineConfig& config, const EncoderModel& model, const Pool& pool,
    LmClient& backend, const std::string& question,
    const std::string& question_id);

}  // namespace dqlore
