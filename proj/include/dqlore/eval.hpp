#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dqlore/corpus.hpp"
#include "dqlore/encoder.hpp"
#include "dqlore/lm.hpp"
#include "dqlore/pipeline.hpp"

namespace dqlore {

extern const char* const kExtractionFailed;

// Pulls the answer out of the last "The answer is ..." sentence
// (case-insensitive) and canonicalizes it. Returns kExtractionFailed when no
// such sentence exists; never throws.
std::string extract_answer(const std::string& text);

// numeric compare with |a-b| <= 1e-6 when both parse as numbers, otherwise
// case-folded string compare
bool answers_equal(const std::string& a, const std::string& b);

enum class EvalMode { kIid, kShift };
const char* to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct ItemRecord {
  std::string question_id;
  SelectionTrace trace;
  std::string generated;  // raw completion for the final prompt
  std::string extracted;  // canonical extracted answer
  std::string gold;       // canonical gold answer
  bool correct = false;
  std::string error_note;  // non-empty when the item failed with an error
};

struct EvalReport {
  double accuracy = 0.0;
  EvalMode mode = EvalMode::kIid;
  std::uint64_t seed = 0;
  std::string test_pool;
  std::string retrieval_pool;
  std::vector<ItemRecord> records;
  bool has_timing = false;
  double select_ms = 0.0;
  double generate_ms = 0.0;
};

struct EvalSetup {
  const Pool* test_pool = nullptr;
  const Pool* retrieval_pool = nullptr;
  const EncoderModel* model = nullptr;
  LmClient* backend = nullptr;
  PipelineConfig pipeline;
  EvalMode mode = EvalMode::kIid;
  std::uint64_t seed = 0;
  bool record_timing = false;  // wall clock makes reports non-reproducible
};

// One full pass over the test pool at one seed. Per-item LM failures are
// recorded as incorrect with an error note; the run keeps going.
EvalReport run_eval(const EvalSetup& setup);

// single report as a JSON object string (run_config carried verbatim)
std::string report_to_json(const EvalReport& report,
                           const std::string& run_config_json = "");

// Deterministic templated word problems in five arithmetic families. Train
// and test parameterizations are disjoint; ids look like
// "{family}-train-007" with dashes stripped from the family token.
std::pair<Pool, Pool> gen_synthetic(std::uint64_t seed,
                                    const std::vector<std::string>& families,
                                    std::size_t per_family);

}  // namespace dqlore
