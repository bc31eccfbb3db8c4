#include "dqlore/corpus.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dqlore {

Pool::Pool(std::string name, std::vector<Exemplar> items)
    : name_(std::move(name)), items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Exemplar& e = items_[i];
    if (e.id.empty())
      throw ValidationError("pool '" + name_ + "': item " + std::to_string(i) +
                            " has an empty id");
    if (e.question.empty())
      throw ValidationError("pool '" + name_ + "': item '" + e.id +
                            "' has an empty question");
    auto [it, fresh] = index_.emplace(e.id, i);
    if (!fresh)
      throw ValidationError("pool '" + name_ + "': duplicate id '" + e.id + "'");
  }
}

const Exemplar& Pool::by_id(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw ValidationError("pool '" + name_ + "': unknown id '" + id + "'");
  return items_[it->second];
}

std::size_t Pool::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw ValidationError("pool '" + name_ + "': unknown id '" + id + "'");
  return it->second;
}

namespace {

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(where + ": missing field \"" + key + "\"");
  if (!it->is_string())
    throw ParseError(where + ": field \"" + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

Pool load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pool file: " + path);

  std::vector<Exemplar> items;
  std::unordered_map<std::string, std::size_t> seen;  // id -> line number
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": invalid JSON: " + ex.what());
    }
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    Exemplar e;
    e.id = require_string(obj, "id", where);
    e.question = require_string(obj, "question", where);
    e.cot = require_string(obj, "cot", where);
    e.answer = require_string(obj, "answer", where);
    if (e.id.empty()) throw ValidationError(where + ": empty id");
    if (e.question.empty())
      throw ValidationError(where + ": empty question for id '" + e.id + "'");
    auto [it, fresh] = seen.emplace(e.id, lineno);
    if (!fresh)
      throw ValidationError(where + ": duplicate id '" + e.id +
                            "' (first seen at line " +
                            std::to_string(it->second) + ")");
    items.push_back(std::move(e));
  }
  std::string name = std::filesystem::path(path).stem().string();
  return Pool(name, std::move(items));
}

void save_pool(const Pool& pool, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write pool file: " + path);
  for (const Exemplar& e : pool.items()) {
    nlohmann::json obj;
    obj["id"] = e.id;
    obj["question"] = e.question;
    obj["cot"] = e.cot;
    obj["answer"] = e.answer;
    out << obj.dump() << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char ch : text) {
    unsigned char lc = static_cast<unsigned char>(std::tolower(ch));
    if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9')) {
      cur.push_back(static_cast<char>(lc));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

std::size_t cot_complexity(const Exemplar& e) {
  std::size_t steps = 0;
  std::istringstream in(e.cot);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) ++steps;
  }
  return steps;
}

std::string canonicalize_answer(const std::string& raw) {
  std::size_t b = raw.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = raw.find_last_not_of(" \t\r\n");
  std::string s = raw.substr(b, e - b + 1);
  while (!s.empty() && s.back() == '.') s.pop_back();
  std::string t;
  t.reserve(s.size());
  for (char ch : s) {
    if (ch == ',' || ch == '$') continue;
    t.push_back(ch);
  }
  while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.pop_back();

  // Numeric collapse when the leading token is entirely a number: units or
  // other trailing words are dropped ("2173 dollars" -> "2173"), but mixed
  // tokens like "3/4" survive verbatim.
  if (!t.empty()) {
    std::size_t sp = t.find_first_of(" \t");
    std::string head = sp == std::string::npos ? t : t.substr(0, sp);
    char* endp = nullptr;
    double v = std::strtod(head.c_str(), &endp);
    if (endp != head.c_str() && *endp == '\0') {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.10g", v);
      return buf;
    }
  }
  return t;
}

}  // namespace dqlore
