#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dqlore/corpus.hpp"

namespace dqlore {

struct LmOptions {
  std::string model_name = "mock";
  double temperature = 0.0;
  int max_tokens = 512;
  int max_in_flight = 4;
  int max_retries = 3;
  int base_backoff_ms = 100;
  int timeout_ms = 30000;
  bool length_normalize = false;  // divide scores by continuation token count
};

class LmClient {
 public:
  virtual ~LmClient() = default;

  // ln P(continuation | context), summed over continuation tokens
  virtual double score_completion(const std::string& context,
                                  const std::string& continuation) = 0;

  // completion text, truncated at the first stop sequence
  virtual std::string generate(const std::string& prompt,
                               const std::vector<std::string>& stop) = 0;
};

struct MockLmSpec {
  std::uint64_t seed = 0;
  double score_alpha = 1.0;
  // "pool-echo": answer known questions verbatim from the registered pool.
  // "family-sensitive": answer correctly only when at least two prompt
  // exemplars share the question's family (id prefix before the first '-').
  std::string generation_rule = "pool-echo";
  bool length_normalize = false;
};

// Deterministic offline stand-in for a real model. Scoring charges
// score_alpha per continuation token that never appears in the context, so
// lexically close exemplar/anchor pairs score higher.
class MockLm : public LmClient {
 public:
  explicit MockLm(MockLmSpec spec);

  // makes the mock able to "solve" this pool's questions
  void register_pool(const Pool& pool);

  double score_completion(const std::string& context,
                          const std::string& continuation) override;
  std::string generate(const std::string& prompt,
                       const std::vector<std::string>& stop) override;

  const MockLmSpec& spec() const { return spec_; }

 private:
  MockLmSpec spec_;
  struct Known {
    std::string cot;
    std::string answer;
    std::string family;
  };
  std::unordered_map<std::string, Known> by_question_;

  std::string answer_for(const std::string& prompt) const;
};

// extracts "family" from ids shaped like "add-train-003" -> "add"
std::string family_of_id(const std::string& id);

// splits a prompt into its "Question:" blocks; returns the question text of
// the final block and the questions of the preceding exemplar blocks
struct PromptView {
  std::vector<std::string> shot_questions;
  std::string final_question;
};
PromptView parse_prompt(const std::string& prompt);

std::string truncate_at_stop(const std::string& text,
                             const std::vector<std::string>& stop);

// OpenAI-style HTTP backend. Scoring calls POST {endpoint}/v1/completions
// with echo+logprobs and sums the logprobs of tokens at character offsets
// past the context; generation calls POST {endpoint}/v1/chat/completions.
class HttpLm : public LmClient {
 public:
  HttpLm(std::string endpoint, LmOptions opts);
  ~HttpLm() override;

  double score_completion(const std::string& context,
                          const std::string& continuation) override;
  std::string generate(const std::string& prompt,
                       const std::vector<std::string>& stop) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct BackendChoice {
  std::string kind = "mock";  // mock | http
  std::string endpoint;
  LmOptions options;
  MockLmSpec mock;
};

std::unique_ptr<LmClient> make_backend(const BackendChoice& choice);

}  // namespace dqlore
