#include "dqlore/pipeline.hpp"

#include <algorithm>
#include <set>

#include "dqlore/bm25.hpp"
#include "dqlore/kernels.hpp"
#include "json.hpp"

namespace dqlore {

const char* to_string(InitialStrategy s) {
  switch (s) {
    case InitialStrategy::kComplexCot: return "complex-cot";
    case InitialStrategy::kBm25: return "bm25";
    case InitialStrategy::kRandom: return "random";
  }
  return "?";
}

InitialStrategy initial_strategy_from_string(const std::string& s) {
  if (s == "complex-cot") return InitialStrategy::kComplexCot;
  if (s == "bm25") return InitialStrategy::kBm25;
  if (s == "random") return InitialStrategy::kRandom;
  throw ValidationError("unknown initial strategy '" + s +
                        "' (expected complex-cot, bm25 or random)");
}

void validate_trace(const SelectionTrace& trace, std::size_t n) {
  if (trace.final_ids.size() != n)
    throw ValidationError("trace for '" + trace.question_id + "': expected " +
                          std::to_string(n) + " final ids, have " +
                          std::to_string(trace.final_ids.size()));
  std::set<std::string> top;
  for (const auto& [id, s] : trace.top_m) top.insert(id);
  std::set<std::string> seen;
  for (const auto& [id, s] : trace.final_ids) {
    if (!top.count(id))
      throw ValidationError("trace for '" + trace.question_id + "': final id '" +
                            id + "' is not among the retrieved candidates");
    if (!seen.insert(id).second)
      throw ValidationError("trace for '" + trace.question_id +
                            "': duplicate final id '" + id + "'");
  }
}

std::string trace_to_json(const SelectionTrace& trace) {
  nlohmann::json j;
  j["question_id"] = trace.question_id;
  j["generated_cot"] = trace.generated_cot;
  j["initial_ids"] = trace.initial_ids;
  auto pairs = [](const std::vector<std::pair<std::string, double>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [id, s] : v)
      arr.push_back({{"id", id}, {"score", s}});
    return arr;
  };
  j["top_m"] = pairs(trace.top_m);
  j["final_ids"] = pairs(trace.final_ids);
  j["ablations"] = {{"disable_dual_queries", trace.ablations.disable_dual_queries},
                    {"disable_lore", trace.ablations.disable_lore},
                    {"random_selection", trace.ablations.random_selection}};
  return j.dump();
}

std::string render_exemplar(const Exemplar& e) {
  return "Question: " + e.question + "\nA: Let's think step by step\n" + e.cot;
}

std::string assemble_prompt(const std::vector<Exemplar>& exemplars,
                            const std::string& question) {
  std::string prompt;
  for (const Exemplar& e : exemplars) prompt += render_exemplar(e) + "\n\n";
  prompt += "Question: " + question + "\nA: Let's think step by step\n";
  return prompt;
}

namespace {

std::vector<std::size_t> annotated_indices(const Pool& pool) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!pool.at(i).cot.empty()) out.push_back(i);
  return out;
}

}  // namespace

std::vector<Exemplar> select_initial(const Pool& pool, std::size_t n,
                                     InitialStrategy strategy,
                                     std::uint64_t seed,
                                     const std::string& question) {
  if (n == 0) throw ValidationError("select_initial: n must be at least 1");
  auto annotated = annotated_indices(pool);
  if (annotated.size() < n)
    throw ValidationError("select_initial: need " + std::to_string(n) +
                          " exemplars with reasoning, pool has " +
                          std::to_string(annotated.size()));

  std::vector<Exemplar> out;
  if (strategy == InitialStrategy::kComplexCot) {
    std::sort(annotated.begin(), annotated.end(),
              [&pool](std::size_t a, std::size_t b) {
                const Exemplar& ea = pool.at(a);
                const Exemplar& eb = pool.at(b);
                std::size_t ca = cot_complexity(ea), cb = cot_complexity(eb);
                if (ca != cb) return ca > cb;
                if (ea.cot.size() != eb.cot.size())
                  return ea.cot.size() > eb.cot.size();
                return ea.id < eb.id;
              });
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool.at(annotated[i]));
  } else if (strategy == InitialStrategy::kBm25) {
    if (question.empty())
      throw ValidationError("select_initial: bm25 strategy needs the question");
    std::vector<Exemplar> items;
    for (std::size_t i : annotated) items.push_back(pool.at(i));
    Pool sub("initial-candidates", items);
    auto index = Bm25Index::build(sub, FieldMode::kQuestionOnly);
    for (auto& [id, s] : index.top_k(question, n)) out.push_back(sub.by_id(id));
  } else {
    Rng rng(seed);
    rng.shuffle(annotated);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool.at(annotated[i]));
  }
  return out;
}

std::string first_query(LmClient& backend, std::vector<Exemplar> initial,
                        const std::string& question) {
  const std::vector<std::string> stop = {"Question:"};
  while (true) {
    // most complex shot goes last, next to the question
    std::vector<Exemplar> ordered(initial.rbegin(), initial.rend());
    try {
      return backend.generate(assemble_prompt(ordered, question), stop);
    } catch (const ContextLengthError&) {
      if (initial.size() <= 1) throw;
      // drop the least complex shot and retry with a shorter prompt
      std::size_t drop = initial.size() - 1;
      for (std::size_t i = initial.size(); i-- > 0;) {
        if (cot_complexity(initial[i]) < cot_complexity(initial[drop]))
          drop = i;
      }
      initial.erase(initial.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }
}

std::vector<std::pair<std::string, double>> second_query(
    const EncoderModel& model, const Pool& pool, const std::string& question,
    const std::string& cot, std::size_t M, const std::string& question_id) {
  if (M == 0) throw ValidationError("second_query: M must be at least 1");
  auto annotated = annotated_indices(pool);
  if (annotated.size() < M)
    throw ValidationError("second_query: M=" + std::to_string(M) +
                          " exceeds the " + std::to_string(annotated.size()) +
                          " annotated exemplars");

  std::string query_text = cot.empty() ? question : question + "\n" + cot;
  Vec q = model.embed_text(question_id, query_text);

  Matrix bases(annotated.size(), model.d_in());
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    const Exemplar& e = pool.at(annotated[i]);
    Vec v = model.base.embed(e.id, anchor_text(e));
    std::copy(v.begin(), v.end(), bases.row(i));
  }
  Matrix projected;
  kernels::project_rows(model.W, bases, projected);
  Vec scores;
  kernels::dot_scores(q, projected, scores);

  std::vector<std::pair<std::string, double>> ranked;
  ranked.reserve(annotated.size());
  for (std::size_t i = 0; i < annotated.size(); ++i)
    ranked.emplace_back(pool.at(annotated[i]).id, scores[i]);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ranked.resize(M);
  return ranked;
}

std::pair<std::vector<Exemplar>, SelectionTrace> dq_lore_select(
    const PipelineConfig& config, const EncoderModel& model, const Pool& pool,
    LmClient& backend, const std::string& question,
    const std::string& question_id) {
  if (config.n_shots == 0)
    throw ValidationError("dq_lore_select: n_shots must be at least 1");
  if (!config.ablations.random_selection && config.lore.M < config.n_shots)
    throw ValidationError("dq_lore_select: M=" + std::to_string(config.lore.M) +
                          " must be at least n=" +
                          std::to_string(config.n_shots));

  SelectionTrace trace;
  trace.question_id = question_id;
  trace.ablations = config.ablations;

  std::uint64_t derived_seed = fnv1a64(question_id, config.seed);

  if (config.ablations.random_selection) {
    auto annotated = annotated_indices(pool);
    if (annotated.size() < config.n_shots)
      throw ValidationError("dq_lore_select: pool too small for " +
                            std::to_string(config.n_shots) + " random shots");
    Rng rng(derived_seed);
    rng.shuffle(annotated);
    std::vector<Exemplar> picked;
    for (std::size_t i = 0; i < config.n_shots; ++i) {
      const Exemplar& e = pool.at(annotated[i]);
      picked.push_back(e);
      trace.top_m.emplace_back(e.id, 0.0);
      trace.final_ids.emplace_back(e.id, 0.0);
    }
    validate_trace(trace, config.n_shots);
    return {std::move(picked), std::move(trace)};
  }

  if (!config.ablations.disable_dual_queries) {
    std::vector<Exemplar> initial;
    try {
      initial = select_initial(pool, config.n_shots, config.initial_strategy,
                               derived_seed, question);
    } catch (const Error& ex) {
      throw Error("initial selection for '" + question_id + "': " + ex.what());
    }
    for (const Exemplar& e : initial) trace.initial_ids.push_back(e.id);
    try {
      trace.generated_cot = first_query(backend, std::move(initial), question);
    } catch (const Error& ex) {
      throw Error("first query for '" + question_id + "': " + ex.what());
    }
  }

  try {
    trace.top_m = second_query(model, pool, question, trace.generated_cot,
                               config.lore.M, question_id);
  } catch (const Error& ex) {
    throw Error("second query for '" + question_id + "': " + ex.what());
  }

  if (config.ablations.disable_lore) {
    trace.final_ids.assign(trace.top_m.begin(),
                           trace.top_m.begin() +
                               static_cast<std::ptrdiff_t>(config.n_shots));
  } else {
    std::string query_text = trace.generated_cot.empty()
                                 ? question
                                 : question + "\n" + trace.generated_cot;
    Vec q = model.embed_text(question_id, query_text);
    std::vector<std::pair<std::string, Vec>> candidates;
    candidates.reserve(trace.top_m.size());
    for (const auto& [id, s] : trace.top_m)
      candidates.emplace_back(id, model.embed_anchor(pool.by_id(id)));
    try {
      trace.final_ids = lore_rerank(q, candidates, config.n_shots, config.lore);
    } catch (const Error& ex) {
      throw Error("re-ranking for '" + question_id + "': " + ex.what());
    }
  }

  validate_trace(trace, config.n_shots);

  std::vector<Exemplar> selected;
  selected.reserve(config.n_shots);
  for (const auto& [id, s] : trace.final_ids)
    selected.push_back(pool.by_id(id));
  if (config.prompt_order == PromptOrder::kAscendingSimilarity)
    std::reverse(selected.begin(), selected.end());
  return {std::move(selected), std::move(trace)};
}

}  // namespace dqlore
