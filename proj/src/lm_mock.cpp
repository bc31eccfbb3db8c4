#include <unordered_set>

#include "dqlore/lm.hpp"

namespace dqlore {

std::string family_of_id(const std::string& id) {
  std::size_t dash = id.find('-');
  return dash == std::string::npos ? id : id.substr(0, dash);
}

namespace {

const char kQuestionPrefix[] = "Question: ";

std::string rstrip(const std::string& s) {
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return e == std::string::npos ? "" : s.substr(0, e + 1);
}

}  // namespace

PromptView parse_prompt(const std::string& prompt) {
  PromptView view;
  std::vector<std::string> questions;
  std::size_t pos = 0;
  std::string current;
  bool in_question = false;
  while (pos <= prompt.size()) {
    std::size_t eol = prompt.find('\n', pos);
    std::string line = eol == std::string::npos
                           ? prompt.substr(pos)
                           : prompt.substr(pos, eol - pos);
    if (line.rfind(kQuestionPrefix, 0) == 0) {
      if (in_question) questions.push_back(rstrip(current));
      current = line.substr(sizeof(kQuestionPrefix) - 1);
      in_question = true;
    } else if (in_question) {
      if (line.rfind("A:", 0) == 0) {
        questions.push_back(rstrip(current));
        in_question = false;
      } else {
        current += "\n" + line;
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  if (in_question) questions.push_back(rstrip(current));
  if (!questions.empty()) {
    view.final_question = questions.back();
    questions.pop_back();
    view.shot_questions = std::move(questions);
  }
  return view;
}

std::string truncate_at_stop(const std::string& text,
                             const std::vector<std::string>& stop) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    std::size_t p = text.find(s);
    if (p != std::string::npos && p < cut) cut = p;
  }
  return cut == std::string::npos ? text : text.substr(0, cut);
}

MockLm::MockLm(MockLmSpec spec) : spec_(std::move(spec)) {
  if (spec_.generation_rule != "pool-echo" &&
      spec_.generation_rule != "family-sensitive")
    throw ValidationError("mock lm: unknown generation rule '" +
                          spec_.generation_rule + "'");
}

void MockLm::register_pool(const Pool& pool) {
  for (const Exemplar& e : pool.items())
    by_question_[e.question] = Known{e.cot, e.answer, family_of_id(e.id)};
}

double MockLm::score_completion(const std::string& context,
                                const std::string& continuation) {
  if (continuation.empty())
    throw ValidationError("score_completion: empty continuation");
  std::unordered_set<std::string> ctx;
  for (const auto& t : tokenize(context)) ctx.insert(t);
  auto cont_tokens = tokenize(continuation);
  std::unordered_set<std::string> novel;
  for (const auto& t : cont_tokens)
    if (!ctx.count(t)) novel.insert(t);
  double score = -spec_.score_alpha * static_cast<double>(novel.size());
  if (spec_.length_normalize && !cont_tokens.empty())
    score /= static_cast<double>(cont_tokens.size());
  return score;
}

std::string MockLm::answer_for(const std::string& prompt) const {
  static const std::string kGiveUp = "I cannot solve this.\nThe answer is 0.";
  PromptView view = parse_prompt(prompt);
  auto it = by_question_.find(view.final_question);
  if (it == by_question_.end()) return kGiveUp;

  if (spec_.generation_rule == "family-sensitive") {
    std::size_t same_family = 0;
    for (const auto& q : view.shot_questions) {
      auto shot = by_question_.find(q);
      if (shot != by_question_.end() && shot->second.family == it->second.family)
        ++same_family;
    }
    if (same_family < 2) return kGiveUp;
  }
  return it->second.cot;
}

std::string MockLm::generate(const std::string& prompt,
                             const std::vector<std::string>& stop) {
  if (prompt.empty()) throw ValidationError("generate: empty prompt");
  return truncate_at_stop(answer_for(prompt), stop);
}

std::unique_ptr<LmClient> make_backend(const BackendChoice& choice) {
  if (choice.kind == "mock") return std::make_unique<MockLm>(choice.mock);
  if (choice.kind == "http") {
    if (choice.endpoint.empty())
      throw ValidationError("http backend requires an endpoint");
    return std::make_unique<HttpLm>(choice.endpoint, choice.options);
  }
  throw ValidationError("unknown lm backend '" + choice.kind + "'");
}

}  // namespace dqlore
