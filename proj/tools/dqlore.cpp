#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "dqlore/bm25.hpp"
#include "dqlore/corpus.hpp"
#include "dqlore/encoder.hpp"
#include "dqlore/eval.hpp"
#include "dqlore/lm.hpp"
#include "dqlore/lore.hpp"
#include "dqlore/pipeline.hpp"
#include "dqlore/trainset.hpp"
#include "dqlore/viz.hpp"
#include "json.hpp"

namespace {

using dqlore::UsageError;
using nlohmann::json;

// Ties a CLI option, a config-file key and the run-config echo together.
// Precedence: explicit flag > config file value > compiled default.
class ConfigBinder {
 public:
  template <class T>
  CLI::Option* bind(CLI::App* app, const std::string& flag, T& var,
                    const std::string& desc) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    CLI::Option* opt = app->add_option(flag, var, desc);
    appliers_.push_back([opt, &var, key](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) {
        try {
          var = cfg.at(key).get<T>();
        } catch (const json::exception& ex) {
          throw UsageError("config key '" + key + "': " + ex.what());
        }
      }
    });
    echoers_.push_back([&var, key](json& out) { out[key] = var; });
    return opt;
  }

  CLI::Option* bind_flag(CLI::App* app, const std::string& flag, bool& var,
                         const std::string& desc) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    CLI::Option* opt = app->add_flag(flag, var, desc);
    appliers_.push_back([opt, &var, key](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) {
        if (!cfg.at(key).is_boolean())
          throw UsageError("config key '" + key + "' must be a boolean");
        var = cfg.at(key).get<bool>();
      }
    });
    echoers_.push_back([&var, key](json& out) { out[key] = var; });
    return opt;
  }

  void apply(const json& cfg) {
    for (auto& f : appliers_) f(cfg);
  }

  json echo() const {
    json out = json::object();
    for (auto& f : echoers_) f(out);
    return out;
  }

 private:
  std::vector<std::function<void(const json&)>> appliers_;
  std::vector<std::function<void(json&)>> echoers_;
};

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string lm = "mock";
  std::string endpoint;
  std::string model_name = "mock";
  double temperature = 0.0;
  int max_tokens = 512;
  int max_in_flight = 4;
  int retries = 3;
  int backoff_ms = 100;
  int timeout_ms = 30000;
  bool length_normalize = false;
  std::string mock_rule = "pool-echo";
  double mock_alpha = 1.0;
};

void bind_globals(ConfigBinder& binder, CLI::App* app, GlobalArgs& g) {
  app->add_option("--config", g.config_path,
                  "JSON config file; flags override its values");
  binder.bind(app, "--seed", g.seed, "global RNG seed");
  binder.bind(app, "--jobs", g.jobs, "max worker threads (0 = library default)");
  binder.bind(app, "--lm", g.lm, "LM backend: mock or http");
  binder.bind(app, "--endpoint", g.endpoint, "http backend base URL");
  binder.bind(app, "--model-name", g.model_name, "model name sent to the backend");
  binder.bind(app, "--temperature", g.temperature, "generation temperature");
  binder.bind(app, "--max-tokens", g.max_tokens, "generation token cap");
  binder.bind(app, "--max-in-flight", g.max_in_flight, "parallel request cap");
  binder.bind(app, "--retries", g.retries, "max retries per request");
  binder.bind(app, "--backoff-ms", g.backoff_ms, "base retry backoff");
  binder.bind(app, "--timeout-ms", g.timeout_ms, "per-request timeout");
  binder.bind_flag(app, "--length-normalize", g.length_normalize,
                   "divide LM scores by continuation token count");
  binder.bind(app, "--mock-rule", g.mock_rule,
              "mock generation rule: pool-echo or family-sensitive");
  binder.bind(app, "--mock-alpha", g.mock_alpha,
              "mock scoring penalty per novel token");
}

std::unique_ptr<dqlore::LmClient> build_backend(
    const GlobalArgs& g, const std::vector<const dqlore::Pool*>& known_pools) {
  dqlore::BackendChoice choice;
  choice.kind = g.lm;
  choice.endpoint = g.endpoint;
  choice.options.model_name = g.model_name;
  choice.options.temperature = g.temperature;
  choice.options.max_tokens = g.max_tokens;
  choice.options.max_in_flight = g.max_in_flight;
  choice.options.max_retries = g.retries;
  choice.options.base_backoff_ms = g.backoff_ms;
  choice.options.timeout_ms = g.timeout_ms;
  choice.options.length_normalize = g.length_normalize;
  choice.mock.seed = g.seed;
  choice.mock.generation_rule = g.mock_rule;
  choice.mock.score_alpha = g.mock_alpha;
  choice.mock.length_normalize = g.length_normalize;
  if (g.lm != "mock" && g.lm != "http")
    throw UsageError("--lm must be mock or http");
  auto backend = dqlore::make_backend(choice);
  if (auto* mock = dynamic_cast<dqlore::MockLm*>(backend.get()))
    for (const dqlore::Pool* pool : known_pools)
      if (pool) mock->register_pool(*pool);
  return backend;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& ex) {
    throw UsageError(path + ": invalid JSON: " + std::string(ex.what()));
  }
  if (!cfg.is_object()) throw UsageError(path + ": config must be an object");
  return cfg;
}

void apply_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_csv(s)) {
    try {
      out.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + part + "' in --seeds");
    }
  }
  if (out.empty()) throw UsageError("--seeds needs at least one value");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw dqlore::Error("cannot write " + path);
  out << text;
  if (!out) throw dqlore::Error("write failed: " + path);
}

dqlore::PipelineConfig build_pipeline_config(
    std::size_t shots, const std::string& initial, std::size_t M,
    std::size_t epsilon, const std::string& metric, double sigma, bool center,
    const std::string& order, const std::vector<std::string>& ablate,
    const std::string& baseline, std::uint64_t seed) {
  dqlore::PipelineConfig cfg;
  cfg.n_shots = shots;
  cfg.initial_strategy = dqlore::initial_strategy_from_string(initial);
  cfg.lore.M = M;
  cfg.lore.epsilon = epsilon;
  cfg.lore.metric = dqlore::lore_metric_from_string(metric);
  cfg.lore.sigma = sigma;
  cfg.lore.center = center;
  cfg.seed = seed;
  if (order == "asc")
    cfg.prompt_order = dqlore::PromptOrder::kAscendingSimilarity;
  else if (order == "desc")
    cfg.prompt_order = dqlore::PromptOrder::kDescendingSimilarity;
  else
    throw UsageError("--order must be asc or desc");
  for (const auto& a : ablate) {
    if (a == "dq")
      cfg.ablations.disable_dual_queries = true;
    else if (a == "lore")
      cfg.ablations.disable_lore = true;
    else
      throw UsageError("--ablate takes dq or lore, got '" + a + "'");
  }
  if (baseline == "random")
    cfg.ablations.random_selection = true;
  else if (!baseline.empty())
    throw UsageError("--baseline takes random, got '" + baseline + "'");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-query exemplar selection pipeline"};
  app.require_subcommand(1);

  ConfigBinder binder;
  GlobalArgs g;
  bind_globals(binder, &app, g);

  int rc = 0;
  auto run = [&](std::function<void()> body) {
    return [&, body]() {
      json cfg = load_config_file(g.config_path);
      binder.apply(cfg);
      apply_jobs(g.jobs);
      body();
    };
  };

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "write a synthetic train/test pool pair");
  gen->fallthrough();
  std::string gen_out_dir;
  std::string gen_families = "add,sub,mul,div,two-step";
  std::size_t gen_per_family = 12;
  gen->add_option("--out-dir", gen_out_dir, "output directory")->required();
  binder.bind(gen, "--families", gen_families, "comma-separated family list");
  binder.bind(gen, "--per-family", gen_per_family,
              "train (and test) items per family");
  gen->callback(run([&] {
    auto families = split_csv(gen_families);
    auto [train, test] = dqlore::gen_synthetic(g.seed, families, gen_per_family);
    std::filesystem::create_directories(gen_out_dir);
    dqlore::save_pool(train, gen_out_dir + "/train.jsonl");
    dqlore::save_pool(test, gen_out_dir + "/test.jsonl");
    json echo = binder.echo();
    echo["command"] = "gen-synthetic";
    write_text(gen_out_dir + "/gen_config.json", echo.dump(2) + "\n");
    std::cout << "wrote " << train.size() << " train and " << test.size()
              << " test items to " << gen_out_dir << "\n";
  }));

  // build-trainset
  auto* bts = app.add_subcommand("build-trainset",
                                 "mine + score contrastive training instances");
  bts->fallthrough();
  std::string bts_pool, bts_out;
  std::size_t bts_k = 49, bts_t = 5, bts_sample_n = 0;
  std::string bts_field = "question";
  double bts_k1 = 1.5, bts_b = 0.75;
  bts->add_option("--pool", bts_pool, "training pool JSONL")->required();
  bts->add_option("--out", bts_out, "output trainset JSONL")->required();
  binder.bind(bts, "--k", bts_k, "candidates per anchor");
  binder.bind(bts, "--t", bts_t, "positives/negatives per anchor");
  binder.bind(bts, "--field-mode", bts_field,
              "BM25 fields: question or question+cot");
  binder.bind(bts, "--k1", bts_k1, "BM25 k1");
  binder.bind(bts, "--b", bts_b, "BM25 b");
  binder.bind(bts, "--sample-n", bts_sample_n,
              "anchor subsample size (0 = all anchors, seeded)");
  bts->callback(run([&] {
    if (bts_t == 0) throw UsageError("--t must be at least 1");
    if (2 * bts_t > bts_k)
      throw UsageError("2t <= k violated: t=" + std::to_string(bts_t) +
                       ", k=" + std::to_string(bts_k));
    dqlore::Pool pool = dqlore::load_pool(bts_pool);
    auto index = dqlore::Bm25Index::build(
        pool, dqlore::field_mode_from_string(bts_field), bts_k1, bts_b);
    auto backend = build_backend(g, {&pool});

    std::vector<std::string> sampled;
    const std::vector<std::string>* anchors = nullptr;
    if (bts_sample_n > 0 && bts_sample_n < pool.size()) {
      std::vector<std::string> ids;
      for (const auto& e : pool.items())
        if (!e.cot.empty()) ids.push_back(e.id);
      dqlore::Rng rng(g.seed);
      rng.shuffle(ids);
      ids.resize(std::min(bts_sample_n, ids.size()));
      std::sort(ids.begin(), ids.end());
      sampled = std::move(ids);
      anchors = &sampled;
    }
    auto instances =
        dqlore::build_trainset(pool, index, *backend, bts_k, bts_t, anchors);
    json echo = binder.echo();
    echo["command"] = "build-trainset";
    echo["pool"] = bts_pool;
    dqlore::save_trainset(instances, bts_out, echo.dump());
    std::cout << "wrote " << instances.size() << " instances to " << bts_out
              << "\n";
  }));

  // train
  auto* tr = app.add_subcommand("train", "fit the projection head");
  tr->fallthrough();
  std::string tr_pool, tr_trainset, tr_out, tr_base = "hashing", tr_embeddings;
  std::size_t tr_epochs = 120, tr_batch = 16, tr_d_in = 768, tr_d_out = 256;
  double tr_lr = 1e-3;
  std::uint64_t tr_hash_seed = 0;
  tr->add_option("--pool", tr_pool, "training pool JSONL")->required();
  tr->add_option("--trainset", tr_trainset, "trainset JSONL")->required();
  tr->add_option("--out", tr_out, "output model JSON")->required();
  binder.bind(tr, "--epochs", tr_epochs, "training epochs");
  binder.bind(tr, "--batch-size", tr_batch, "anchors per batch");
  binder.bind(tr, "--lr", tr_lr, "Adam learning rate");
  binder.bind(tr, "--base", tr_base, "base embedder: hashing or file");
  binder.bind(tr, "--embeddings", tr_embeddings,
              "embedding JSONL (file embedder)");
  binder.bind(tr, "--d-in", tr_d_in, "hashing embedder dimension");
  binder.bind(tr, "--d-out", tr_d_out, "projection output dimension");
  binder.bind(tr, "--hash-seed", tr_hash_seed, "hashing embedder seed");
  tr->callback(run([&] {
    dqlore::Pool pool = dqlore::load_pool(tr_pool);
    auto instances = dqlore::load_trainset(tr_trainset);
    dqlore::BaseEmbedder base = [&] {
      if (tr_base == "hashing")
        return dqlore::BaseEmbedder::hashing(tr_d_in, tr_hash_seed);
      if (tr_base == "file") {
        if (tr_embeddings.empty())
          throw UsageError("--base file needs --embeddings");
        return dqlore::BaseEmbedder::from_file(tr_embeddings);
      }
      throw UsageError("--base must be hashing or file");
    }();
    dqlore::TrainConfig cfg;
    cfg.batch_size = tr_batch;
    cfg.learning_rate = tr_lr;
    cfg.epochs = tr_epochs;
    cfg.seed = g.seed;
    cfg.d_out = tr_d_out;
    auto model = dqlore::train(pool, instances, std::move(base), cfg);
    json echo = binder.echo();
    echo["command"] = "train";
    echo["pool"] = tr_pool;
    echo["trainset"] = tr_trainset;
    dqlore::save_model(model, tr_out, echo.dump());
    double last = model.loss_history.empty() ? 0.0 : model.loss_history.back();
    std::cout << "trained " << tr_epochs << " epochs, final mean loss "
              << last << ", wrote " << tr_out << "\n";
  }));

  // shared retrieval flags for select/eval/viz
  struct RetrievalArgs {
    std::size_t shots = 8, M = 16, epsilon = 256;
    std::string metric = "inner-product", initial = "complex-cot",
                order = "asc", baseline;
    double sigma = 0.5;
    bool no_center = false;
    std::vector<std::string> ablate;
  };
  auto bind_retrieval = [&](CLI::App* cmd, RetrievalArgs& r,
                            bool with_ablations) {
    binder.bind(cmd, "--shots", r.shots, "exemplars in the final prompt");
    binder.bind(cmd, "--M", r.M, "dense retrieval depth");
    binder.bind(cmd, "--epsilon", r.epsilon, "reduced dimension (capped by rank)");
    binder.bind(cmd, "--metric", r.metric,
                "re-ranking metric: inner-product or gaussian");
    binder.bind(cmd, "--sigma", r.sigma, "gaussian kernel width");
    binder.bind_flag(cmd, "--no-center", r.no_center, "skip PCA centering");
    binder.bind(cmd, "--initial", r.initial,
                "first-query shot choice: complex-cot, bm25 or random");
    binder.bind(cmd, "--order", r.order,
                "prompt order: asc (most similar last) or desc");
    if (with_ablations) {
      binder.bind(cmd, "--ablate", r.ablate,
                  "disable a stage: dq or lore (repeatable)");
      binder.bind(cmd, "--baseline", r.baseline,
                  "replace selection with a baseline: random");
    }
  };

  // select
  auto* sel = app.add_subcommand("select",
                                 "run selection for one question, print trace");
  sel->fallthrough();
  std::string sel_pool, sel_model, sel_question, sel_qid, sel_test, sel_out;
  RetrievalArgs sel_r;
  sel->add_option("--pool", sel_pool, "retrieval pool JSONL")->required();
  sel->add_option("--model", sel_model, "encoder model JSON")->required();
  sel->add_option("--question", sel_question, "question text");
  sel->add_option("--question-id", sel_qid, "question id within --test");
  sel->add_option("--test", sel_test, "test pool JSONL (for --question-id)");
  sel->add_option("--out", sel_out, "write the trace here instead of stdout");
  bind_retrieval(sel, sel_r, true);
  sel->callback(run([&] {
    dqlore::Pool pool = dqlore::load_pool(sel_pool);
    auto model = dqlore::load_model(sel_model);
    std::unique_ptr<dqlore::Pool> test;
    std::string question = sel_question;
    std::string qid = "query";
    if (!sel_qid.empty()) {
      if (sel_test.empty())
        throw UsageError("--question-id needs --test");
      test = std::make_unique<dqlore::Pool>(dqlore::load_pool(sel_test));
      question = test->by_id(sel_qid).question;
      qid = sel_qid;
    }
    if (question.empty())
      throw UsageError("give --question or --question-id with --test");
    auto backend = build_backend(g, {&pool, test.get()});
    auto cfg = build_pipeline_config(sel_r.shots, sel_r.initial, sel_r.M,
                                     sel_r.epsilon, sel_r.metric, sel_r.sigma,
                                     !sel_r.no_center, sel_r.order,
                                     sel_r.ablate, sel_r.baseline, g.seed);
    auto [exemplars, trace] =
        dqlore::dq_lore_select(cfg, model, pool, *backend, question, qid);
    json out = json::parse(dqlore::trace_to_json(trace));
    json echo = binder.echo();
    echo["command"] = "select";
    out["run_config"] = std::move(echo);
    std::string text = out.dump(2) + "\n";
    if (sel_out.empty())
      std::cout << text;
    else
      write_text(sel_out, text);
  }));

  // eval
  auto* ev = app.add_subcommand("eval", "accuracy over a test pool");
  ev->fallthrough();
  std::string ev_test, ev_pool, ev_model, ev_out, ev_traces;
  std::string ev_seeds = "0", ev_mode = "iid";
  bool ev_timing = false;
  RetrievalArgs ev_r;
  ev->add_option("--test", ev_test, "test pool JSONL")->required();
  ev->add_option("--pool", ev_pool, "retrieval pool JSONL")->required();
  ev->add_option("--model", ev_model, "encoder model JSON")->required();
  ev->add_option("--out", ev_out, "output report JSON")->required();
  ev->add_option("--traces", ev_traces, "also write selection traces (JSONL)");
  binder.bind(ev, "--seeds", ev_seeds, "comma-separated seed list");
  binder.bind(ev, "--mode", ev_mode, "iid or shift (label + provenance echo)");
  binder.bind_flag(ev, "--timing", ev_timing,
                   "record wall-clock (makes reports non-reproducible)");
  bind_retrieval(ev, ev_r, true);
  ev->callback(run([&] {
    dqlore::Pool test = dqlore::load_pool(ev_test);
    dqlore::Pool pool = dqlore::load_pool(ev_pool);
    auto model = dqlore::load_model(ev_model);
    auto backend = build_backend(g, {&pool, &test});
    auto seeds = parse_seeds(ev_seeds);

    json echo = binder.echo();
    echo["command"] = "eval";
    echo["test"] = ev_test;
    echo["pool"] = ev_pool;
    echo["model"] = ev_model;

    json runs = json::array();
    std::ofstream trace_out;
    if (!ev_traces.empty()) {
      trace_out.open(ev_traces);
      if (!trace_out) throw dqlore::Error("cannot write " + ev_traces);
    }
    double acc_sum = 0.0;
    for (std::uint64_t seed : seeds) {
      dqlore::EvalSetup setup;
      setup.test_pool = &test;
      setup.retrieval_pool = &pool;
      setup.model = &model;
      setup.backend = backend.get();
      setup.pipeline = build_pipeline_config(
          ev_r.shots, ev_r.initial, ev_r.M, ev_r.epsilon, ev_r.metric,
          ev_r.sigma, !ev_r.no_center, ev_r.order, ev_r.ablate, ev_r.baseline,
          seed);
      setup.mode = dqlore::eval_mode_from_string(ev_mode);
      setup.seed = seed;
      setup.record_timing = ev_timing;
      dqlore::EvalReport report = dqlore::run_eval(setup);
      acc_sum += report.accuracy;
      runs.push_back(json::parse(dqlore::report_to_json(report)));
      if (trace_out)
        for (const auto& rec : report.records)
          trace_out << dqlore::trace_to_json(rec.trace) << "\n";
    }
    json out;
    out["mean_accuracy"] = acc_sum / static_cast<double>(seeds.size());
    out["runs"] = std::move(runs);
    out["run_config"] = std::move(echo);
    write_text(ev_out, out.dump(2) + "\n");
    std::printf("mean accuracy %.4f over %zu seed(s), wrote %s\n",
                acc_sum / static_cast<double>(seeds.size()), seeds.size(),
                ev_out.c_str());
  }));

  // viz
  auto* vz = app.add_subcommand(
      "viz", "2D projections of good/bad candidates before and after re-ranking");
  vz->fallthrough();
  std::string vz_pool, vz_model, vz_test, vz_qid, vz_out_dir;
  std::string vz_method = "pca", vz_bad = "bottom";
  std::size_t vz_M = 16, vz_epsilon = 256, vz_iters = 500, vz_shots = 8;
  double vz_perplexity = 5.0, vz_lr = 50.0;
  bool vz_no_center = false;
  vz->add_option("--pool", vz_pool, "retrieval pool JSONL")->required();
  vz->add_option("--model", vz_model, "encoder model JSON")->required();
  vz->add_option("--test", vz_test, "test pool JSONL")->required();
  vz->add_option("--question-id", vz_qid, "test question id")->required();
  vz->add_option("--out-dir", vz_out_dir, "output directory")->required();
  binder.bind(vz, "--M", vz_M, "good/bad set size");
  binder.bind(vz, "--epsilon", vz_epsilon, "reduced dimension");
  binder.bind_flag(vz, "--no-center", vz_no_center, "skip PCA centering");
  binder.bind(vz, "--method", vz_method, "2D projector: pca or tsne");
  binder.bind(vz, "--perplexity", vz_perplexity, "tsne perplexity");
  binder.bind(vz, "--iters", vz_iters, "tsne iterations");
  binder.bind(vz, "--tsne-lr", vz_lr, "tsne learning rate");
  binder.bind(vz, "--shots", vz_shots, "shots for the CoT query");
  binder.bind(vz, "--bad", vz_bad,
              "bad set rule: bottom (by similarity) or farthest (euclidean)");
  vz->callback(run([&] {
    dqlore::Pool pool = dqlore::load_pool(vz_pool);
    dqlore::Pool test = dqlore::load_pool(vz_test);
    auto model = dqlore::load_model(vz_model);
    auto backend = build_backend(g, {&pool, &test});
    const dqlore::Exemplar& item = test.by_id(vz_qid);

    auto initial = dqlore::select_initial(
        pool, vz_shots, dqlore::InitialStrategy::kComplexCot, g.seed,
        item.question);
    std::string cot =
        dqlore::first_query(*backend, std::move(initial), item.question);

    std::size_t annotated = 0;
    for (const auto& e : pool.items())
      if (!e.cot.empty()) ++annotated;
    if (2 * vz_M > annotated)
      throw UsageError("--M too large: need 2M <= " + std::to_string(annotated) +
                       " annotated exemplars");
    auto ranking = dqlore::second_query(model, pool, item.question, cot,
                                        annotated, vz_qid);

    std::string query_text =
        cot.empty() ? item.question : item.question + "\n" + cot;
    dqlore::Vec q = model.embed_text(vz_qid, query_text);

    std::vector<std::pair<std::string, dqlore::Vec>> good, bad;
    for (std::size_t i = 0; i < vz_M; ++i) {
      const auto& id = ranking[i].first;
      good.emplace_back(id, model.embed_anchor(pool.by_id(id)));
    }
    if (vz_bad == "bottom") {
      for (std::size_t i = ranking.size() - vz_M; i < ranking.size(); ++i) {
        const auto& id = ranking[i].first;
        bad.emplace_back(id, model.embed_anchor(pool.by_id(id)));
      }
    } else if (vz_bad == "farthest") {
      std::vector<std::pair<double, std::string>> dist;
      for (const auto& [id, s] : ranking) {
        dqlore::Vec e = model.embed_anchor(pool.by_id(id));
        dist.emplace_back(-dqlore::squared_distance(q, e), id);
      }
      std::sort(dist.begin(), dist.end());
      for (std::size_t i = 0; i < vz_M; ++i) {
        const auto& id = dist[i].second;
        bad.emplace_back(id, model.embed_anchor(pool.by_id(id)));
      }
    } else {
      throw UsageError("--bad must be bottom or farthest");
    }

    auto project = [&](const dqlore::Matrix& rows) {
      if (vz_method == "pca") return dqlore::pca_2d(rows);
      if (vz_method == "tsne") {
        dqlore::TsneConfig tc;
        tc.perplexity = vz_perplexity;
        tc.iters = vz_iters;
        tc.learning_rate = vz_lr;
        tc.seed = g.seed;
        return dqlore::tsne(rows, tc);
      }
      throw UsageError("--method must be pca or tsne");
    };

    auto stack = [](const dqlore::Vec& first,
                    const std::vector<std::pair<std::string, dqlore::Vec>>& a,
                    const std::vector<std::pair<std::string, dqlore::Vec>>& b) {
      dqlore::Matrix m(1 + a.size() + b.size(), first.size());
      std::copy(first.begin(), first.end(), m.row(0));
      for (std::size_t i = 0; i < a.size(); ++i)
        std::copy(a[i].second.begin(), a[i].second.end(), m.row(1 + i));
      for (std::size_t i = 0; i < b.size(); ++i)
        std::copy(b[i].second.begin(), b[i].second.end(),
                  m.row(1 + a.size() + i));
      return m;
    };

    auto to_points = [&](const dqlore::Matrix& coords, const std::string& stage) {
      std::vector<dqlore::VizPoint> pts;
      pts.push_back({vz_qid, "query", stage, coords.at(0, 0), coords.at(0, 1)});
      for (std::size_t i = 0; i < good.size(); ++i)
        pts.push_back({good[i].first, "good", stage, coords.at(1 + i, 0),
                       coords.at(1 + i, 1)});
      for (std::size_t i = 0; i < bad.size(); ++i)
        pts.push_back({bad[i].first, "bad", stage,
                       coords.at(1 + good.size() + i, 0),
                       coords.at(1 + good.size() + i, 1)});
      return pts;
    };

    std::filesystem::create_directories(vz_out_dir);

    dqlore::Matrix pre = stack(q, good, bad);
    auto pre_pts = to_points(project(pre), "pre-lore");
    dqlore::export_scatter(pre_pts, vz_out_dir + "/pre_lore");

    // the re-ranker's own reduction: fit on retrieved (good) + query,
    // then map the bad points through the same projection
    dqlore::Matrix fit_rows(good.size() + 1, q.size());
    for (std::size_t i = 0; i < good.size(); ++i)
      std::copy(good[i].second.begin(), good[i].second.end(), fit_rows.row(i));
    std::copy(q.begin(), q.end(), fit_rows.row(good.size()));
    dqlore::PcaModel pca =
        dqlore::fit_pca(fit_rows, vz_epsilon, !vz_no_center);

    auto reduce = [&](const dqlore::Vec& v) { return dqlore::pca_transform(pca, v); };
    dqlore::Vec rq = reduce(q);
    dqlore::Matrix post(1 + good.size() + bad.size(), rq.size());
    std::copy(rq.begin(), rq.end(), post.row(0));
    for (std::size_t i = 0; i < good.size(); ++i) {
      dqlore::Vec r = reduce(good[i].second);
      std::copy(r.begin(), r.end(), post.row(1 + i));
    }
    for (std::size_t i = 0; i < bad.size(); ++i) {
      dqlore::Vec r = reduce(bad[i].second);
      std::copy(r.begin(), r.end(), post.row(1 + good.size() + i));
    }
    auto post_pts = to_points(project(post), "post-lore");
    dqlore::export_scatter(post_pts, vz_out_dir + "/post_lore");

    json echo = binder.echo();
    echo["command"] = "viz";
    echo["question_id"] = vz_qid;
    write_text(vz_out_dir + "/run_config.json", echo.dump(2) + "\n");
    std::cout << "wrote pre_lore.{csv,svg} and post_lore.{csv,svg} to "
              << vz_out_dir << "\n";
  }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
