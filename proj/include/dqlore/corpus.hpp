#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dqlore/common.hpp"

namespace dqlore {

// one worked example: a question, its chain-of-thought, and the final answer
struct Exemplar {
  std::string id;
  std::string question;
  std::string cot;
  std::string answer;
};

class Pool {
 public:
  Pool() = default;
  Pool(std::string name, std::vector<Exemplar> items);

  const std::string& name() const { return name_; }
  std::size_t size() const { return items_.size(); }
  const std::vector<Exemplar>& items() const { return items_; }
  const Exemplar& at(std::size_t i) const { return items_[i]; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const Exemplar& by_id(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;

 private:
  std::string name_;
  std::vector<Exemplar> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSONL, one object per line: {"id","question","cot","answer"}.
// cot/answer may be empty strings; id/question must not be.
Pool load_pool(const std::string& path);
void save_pool(const Pool& pool, const std::string& path);

// lowercase, split on anything that is not [a-z0-9]
std::vector<std::string> tokenize(const std::string& text);

// reasoning-step count: lines of the chain-of-thought containing at least one
// non-whitespace character
std::size_t cot_complexity(const Exemplar& e);

// Normalizes an answer string for comparison: trim whitespace, drop trailing
// periods, strip commas and '$'. If the result parses fully as a number it is
// reformatted with %.10g, so "7.0" and "7" collide.
std::string canonicalize_answer(const std::string& raw);

}  // namespace dqlore
