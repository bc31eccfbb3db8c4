#include "dqlore/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "json.hpp"

namespace dqlore {

const char* const kExtractionFailed = "[extraction-failed]";

std::string extract_answer(const std::string& text) {
  static const std::string kNeedle = "the answer is";
  std::string lower(text.size(), '\0');
  std::transform(text.begin(), text.end(), lower.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  std::size_t pos = lower.rfind(kNeedle);
  if (pos == std::string::npos) return kExtractionFailed;

  std::size_t start = pos + kNeedle.size();
  while (start < text.size() && (text[start] == ' ' || text[start] == ':'))
    ++start;
  std::size_t end = start;
  while (end < text.size()) {
    char c = text[end];
    if (c == '\n') break;
    if (c == '.') {
      // keep decimal points: "3.5" continues, "3." ends the sentence
      if (end + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[end + 1]))) {
        ++end;
        continue;
      }
      break;
    }
    ++end;
  }
  std::string canon = canonicalize_answer(text.substr(start, end - start));
  return canon.empty() ? kExtractionFailed : canon;
}

namespace {

bool parse_full_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* endp = nullptr;
  out = std::strtod(s.c_str(), &endp);
  return endp != s.c_str() && *endp == '\0';
}

std::string fold_case(const std::string& s) {
  std::string out(s.size(), '\0');
  std::transform(s.begin(), s.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace

bool answers_equal(const std::string& a, const std::string& b) {
  double x, y;
  if (parse_full_number(a, x) && parse_full_number(b, y))
    return std::abs(x - y) <= 1e-6;
  return fold_case(a) == fold_case(b);
}

const char* to_string(EvalMode m) {
  return m == EvalMode::kIid ? "iid" : "shift";
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "iid") return EvalMode::kIid;
  if (s == "shift") return EvalMode::kShift;
  throw ValidationError("unknown eval mode '" + s + "' (expected iid or shift)");
}

EvalReport run_eval(const EvalSetup& setup) {
  if (!setup.test_pool || !setup.retrieval_pool || !setup.model ||
      !setup.backend)
    throw ValidationError("run_eval: setup is missing a component");

  EvalReport report;
  report.mode = setup.mode;
  report.seed = setup.seed;
  report.test_pool = setup.test_pool->name();
  report.retrieval_pool = setup.retrieval_pool->name();
  report.has_timing = setup.record_timing;

  PipelineConfig pipeline = setup.pipeline;
  pipeline.seed = setup.seed;

  std::size_t n_correct = 0;
  using Clock = std::chrono::steady_clock;
  const std::vector<std::string> stop = {"Question:"};

  for (const Exemplar& item : setup.test_pool->items()) {
    ItemRecord rec;
    rec.question_id = item.id;
    rec.gold = canonicalize_answer(item.answer);
    try {
      auto t0 = Clock::now();
      auto [exemplars, trace] =
          dq_lore_select(pipeline, *setup.model, *setup.retrieval_pool,
                         *setup.backend, item.question, item.id);
      auto t1 = Clock::now();
      rec.trace = std::move(trace);
      rec.generated = setup.backend->generate(
          assemble_prompt(exemplars, item.question), stop);
      auto t2 = Clock::now();
      if (setup.record_timing) {
        report.select_ms +=
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        report.generate_ms +=
            std::chrono::duration<double, std::milli>(t2 - t1).count();
      }
      rec.extracted = extract_answer(rec.generated);
      rec.correct = rec.extracted != kExtractionFailed &&
                    answers_equal(rec.extracted, rec.gold);
    } catch (const Error& ex) {
      rec.error_note = ex.what();
      rec.extracted = kExtractionFailed;
      rec.correct = false;
    }
    if (rec.correct) ++n_correct;
    report.records.push_back(std::move(rec));
  }
  report.accuracy = report.records.empty()
                        ? 0.0
                        : static_cast<double>(n_correct) /
                              static_cast<double>(report.records.size());
  return report;
}

std::string report_to_json(const EvalReport& report,
                           const std::string& run_config_json) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["mode"] = to_string(report.mode);
  j["seed"] = report.seed;
  j["test_pool"] = report.test_pool;
  j["retrieval_pool"] = report.retrieval_pool;
  nlohmann::json records = nlohmann::json::array();
  for (const ItemRecord& rec : report.records) {
    nlohmann::json r;
    r["question_id"] = rec.question_id;
    nlohmann::json final_ids = nlohmann::json::array();
    for (const auto& [id, s] : rec.trace.final_ids) final_ids.push_back(id);
    r["final_ids"] = std::move(final_ids);
    r["trace"] = nlohmann::json::parse(trace_to_json(rec.trace));
    r["generated"] = rec.generated;
    r["extracted"] = rec.extracted;
    r["gold"] = rec.gold;
    r["correct"] = rec.correct;
    if (!rec.error_note.empty()) r["error_note"] = rec.error_note;
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  if (report.has_timing)
    j["timing_ms"] = {{"select", report.select_ms},
                      {"generate", report.generate_ms}};
  if (!run_config_json.empty())
    j["run_config"] = nlohmann::json::parse(run_config_json);
  return j.dump(2);
}

namespace {

struct Problem {
  std::string question;
  std::string cot;
  long long answer;
};

std::string num(long long v) { return std::to_string(v); }

Problem make_problem(const std::string& family, Rng& rng) {
  auto draw = [&rng](long long lo, long long hi) {
    return lo + static_cast<long long>(
                    rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  };
  Problem p;
  if (family == "add") {
    long long a = draw(2, 99), b = draw(2, 99);
    long long c = a + b;
    p.question = "Maya collects " + num(a) +
                 " seashells in the morning and finds " + num(b) +
                 " more seashells after lunch. How many seashells does she "
                 "have in total?";
    p.cot = "Maya starts with " + num(a) + " seashells.\nShe finds " + num(b) +
            " more seashells.\nSo she has " + num(a) + " + " + num(b) + " = " +
            num(c) + " seashells.\nThe answer is " + num(c) + ".";
    p.answer = c;
  } else if (family == "sub") {
    long long a = draw(20, 99), b = draw(2, a - 2);
    long long c = a - b;
    p.question = "A bakery had " + num(a) + " croissants and sold " + num(b) +
                 " of them before noon. How many croissants remain on the "
                 "shelf?";
    p.cot = "The bakery begins with " + num(a) + " croissants.\nSelling " +
            num(b) + " leaves " + num(a) + " - " + num(b) + " = " + num(c) +
            " croissants.\nThe answer is " + num(c) + ".";
    p.answer = c;
  } else if (family == "mul") {
    long long a = draw(2, 12), b = draw(2, 12);
    long long c = a * b;
    p.question = "Each crate holds " + num(a) +
                 " melons and the farmer packs " + num(b) +
                 " crates. How many melons get packed altogether?";
    p.cot = "One crate holds " + num(a) + " melons.\nPacking " + num(b) +
            " crates gives " + num(a) + " * " + num(b) + " = " + num(c) +
            " melons.\nThe answer is " + num(c) + ".";
    p.answer = c;
  } else if (family == "div") {
    long long b = draw(2, 12), q = draw(2, 12);
    long long a = b * q;
    p.question = "A teacher shares " + num(a) + " pencils equally among " +
                 num(b) + " students. How many pencils does each student "
                 "receive?";
    p.cot = "There are " + num(a) + " pencils for " + num(b) +
            " students.\nSharing equally gives " + num(a) + " / " + num(b) +
            " = " + num(q) + " pencils each.\nThe answer is " + num(q) + ".";
    p.answer = q;
  } else if (family == "two-step" || family == "twostep") {
    long long a = draw(2, 12), b = draw(3, 12);
    long long ab = a * b;
    long long c = draw(1, ab - 1);
    long long d = ab - c;
    p.question = "Liam buys " + num(a) + " boxes of markers with " + num(b) +
                 " markers in each box, then gives away " + num(c) +
                 " markers. How many markers does Liam keep?";
    p.cot = "Liam buys " + num(a) + " boxes of markers.\nEach box has " +
            num(b) + " markers.\nThat is " + num(a) + " * " + num(b) + " = " +
            num(ab) + " markers.\nGiving away " + num(c) + " leaves " +
            num(ab) + " - " + num(c) + " = " + num(d) + " markers.\nThe "
            "answer is " + num(d) + ".";
    p.answer = d;
  } else {
    throw ValidationError("gen_synthetic: unknown family '" + family +
                          "' (expected add, sub, mul, div or two-step)");
  }
  return p;
}

std::string id_token(const std::string& family) {
  std::string t;
  for (char c : family)
    if (c != '-') t.push_back(c);
  return t;
}

std::string pad3(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

}  // namespace

std::pair<Pool, Pool> gen_synthetic(std::uint64_t seed,
                                    const std::vector<std::string>& families,
                                    std::size_t per_family) {
  if (families.empty())
    throw ValidationError("gen_synthetic: need at least one family");
  if (per_family < 2)
    throw ValidationError(
        "gen_synthetic: per_family must be at least 2 (train/test split)");
  std::set<std::string> unique(families.begin(), families.end());
  if (unique.size() != families.size())
    throw ValidationError("gen_synthetic: repeated family name");

  Rng rng(seed);
  std::vector<Exemplar> train, test;
  for (const std::string& family : families) {
    std::set<std::string> seen_questions;
    std::vector<Problem> problems;
    std::size_t guard = 0;
    while (problems.size() < 2 * per_family) {
      if (++guard > 100000)
        throw Error("gen_synthetic: cannot draw enough distinct problems for "
                    "family '" + family + "'");
      Problem p = make_problem(family, rng);
      if (!seen_questions.insert(p.question).second) continue;
      problems.push_back(std::move(p));
    }
    std::string tok = id_token(family);
    for (std::size_t i = 0; i < per_family; ++i) {
      const Problem& p = problems[i];
      train.push_back(Exemplar{tok + "-train-" + pad3(i), p.question, p.cot,
                               num(p.answer)});
    }
    for (std::size_t i = 0; i < per_family; ++i) {
      const Problem& p = problems[per_family + i];
      test.push_back(Exemplar{tok + "-test-" + pad3(i), p.question, p.cot,
                              num(p.answer)});
    }
  }
  return {Pool("synthetic-train", std::move(train)),
          Pool("synthetic-test", std::move(test))};
}

}  // namespace dqlore
