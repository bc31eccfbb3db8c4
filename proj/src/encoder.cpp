#include "dqlore/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "dqlore/kernels.hpp"
#include "json.hpp"

namespace dqlore {

BaseEmbedder BaseEmbedder::hashing(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("hashing embedder: dim must be positive");
  BaseEmbedder b;
  b.kind_ = Kind::kHashing;
  b.dim_ = dim;
  b.seed_ = seed;
  return b;
}

BaseEmbedder BaseEmbedder::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);
  BaseEmbedder b;
  b.kind_ = Kind::kFile;
  b.path_ = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": invalid JSON: " + ex.what());
    }
    std::string id;
    Vec vec;
    try {
      id = j.at("id").get<std::string>();
      vec = j.at("vector").get<Vec>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": expected {\"id\", \"vector\"}: " + ex.what());
    }
    if (b.dim_ == 0) b.dim_ = vec.size();
    if (vec.size() != b.dim_)
      throw ValidationError(where + ": vector for '" + id + "' has dim " +
                            std::to_string(vec.size()) + ", expected " +
                            std::to_string(b.dim_));
    if (!b.table_.emplace(id, std::move(vec)).second)
      throw ValidationError(where + ": duplicate embedding id '" + id + "'");
  }
  if (b.table_.empty())
    throw ValidationError(path + ": embedding file is empty");
  return b;
}

Vec BaseEmbedder::embed(const std::string& id, const std::string& text) const {
  if (kind_ == Kind::kFile) {
    auto it = table_.find(id);
    if (it == table_.end())
      throw ValidationError("file embedder has no vector for id '" + id + "'");
    return it->second;
  }
  Vec v(dim_, 0.0);
  for (const auto& tok : tokenize(text)) v[fnv1a64(tok, seed_) % dim_] += 1.0;
  double norm = std::sqrt(dot(v, v));
  if (norm > 0.0)
    for (double& x : v) x /= norm;
  return v;
}

std::string BaseEmbedder::spec_json() const {
  nlohmann::json j;
  if (kind_ == Kind::kHashing) {
    j["kind"] = "hashing";
    j["dim"] = dim_;
    j["seed"] = seed_;
  } else {
    j["kind"] = "file";
    j["path"] = path_;
    j["dim"] = dim_;
  }
  return j.dump();
}

BaseEmbedder BaseEmbedder::from_spec_json(const std::string& spec) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(spec);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("bad embedder spec: ") + ex.what());
  }
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "hashing")
    return hashing(j.at("dim").get<std::size_t>(),
                   j.value("seed", std::uint64_t{0}));
  if (kind == "file") return from_file(j.at("path").get<std::string>());
  throw ValidationError("unknown embedder kind '" + kind + "'");
}

std::string anchor_text(const Exemplar& e) {
  return e.cot.empty() ? e.question : e.question + "\n" + e.cot;
}

Vec EncoderModel::embed_anchor(const Exemplar& e) const {
  return embed_text(e.id, anchor_text(e));
}

Vec EncoderModel::embed_text(const std::string& id,
                             const std::string& text) const {
  return matvec(W, base.embed(id, text));
}

double similarity(const Vec& u, const Vec& v) { return dot(u, v); }

std::vector<SampledPair> sample_pairs(
    const std::vector<ContrastiveInstance>& batch, Rng& rng) {
  std::vector<SampledPair> pairs;
  pairs.reserve(batch.size());
  for (const auto& inst : batch) {
    if (inst.positives.empty() || inst.negatives.empty())
      throw ValidationError("instance '" + inst.anchor_id +
                            "' lacks positives or negatives");
    SampledPair p;
    p.pos_id = inst.positives[rng.below(inst.positives.size())];
    p.neg_id = inst.negatives[rng.below(inst.negatives.size())];
    pairs.push_back(std::move(p));
  }
  return pairs;
}

double loss_from_sims(const Matrix& sims) {
  std::size_t b = sims.rows;
  if (b == 0 || sims.cols != 2 * b)
    throw ValidationError("loss_from_sims: sims must be b x 2b");
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = sims.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < 2 * b; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < 2 * b; ++j) denom += std::exp(row[j] - mx);
    total += -(row[i] - mx) + std::log(denom);
  }
  return total / static_cast<double>(b);
}

namespace {

struct BatchData {
  Matrix U;   // b x d_in anchor base vectors
  Matrix Vp;  // b x d_in sampled positive base vectors
  Matrix Vn;  // b x d_in sampled negative base vectors
};

BatchData gather_batch(const EncoderModel& model,
                       const std::vector<ContrastiveInstance>& batch,
                       const std::vector<SampledPair>& pairs,
                       const Pool& pool) {
  std::size_t b = batch.size();
  std::size_t d_in = model.d_in();
  BatchData data{Matrix(b, d_in), Matrix(b, d_in), Matrix(b, d_in)};
  for (std::size_t i = 0; i < b; ++i) {
    const Exemplar& anchor = pool.by_id(batch[i].anchor_id);
    const Exemplar& pos = pool.by_id(pairs[i].pos_id);
    const Exemplar& neg = pool.by_id(pairs[i].neg_id);
    Vec u = model.base.embed(anchor.id, anchor_text(anchor));
    Vec vp = model.base.embed(pos.id, anchor_text(pos));
    Vec vn = model.base.embed(neg.id, anchor_text(neg));
    std::copy(u.begin(), u.end(), data.U.row(i));
    std::copy(vp.begin(), vp.end(), data.Vp.row(i));
    std::copy(vn.begin(), vn.end(), data.Vn.row(i));
  }
  return data;
}

// similarities s(a_i, e_j) = (W u_i) . (W v_j) for the whole batch
Matrix batch_sims(const Matrix& W, const BatchData& data) {
  std::size_t b = data.U.rows;
  Matrix A, P, N;
  kernels::project_rows(W, data.U, A);
  kernels::project_rows(W, data.Vp, P);
  kernels::project_rows(W, data.Vn, N);
  Matrix sims(b, 2 * b);
  for (std::size_t i = 0; i < b; ++i) {
    const double* a = A.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      const double* p = P.row(j);
      const double* n = N.row(j);
      double sp = 0.0, sn = 0.0;
      for (std::size_t c = 0; c < A.cols; ++c) {
        sp += a[c] * p[c];
        sn += a[c] * n[c];
      }
      sims.at(i, j) = sp;
      sims.at(i, b + j) = sn;
    }
  }
  return sims;
}

// gradient of mean loss w.r.t. W:
//   d loss_i / d W = (W r_i) u_i^T + (W u_i) r_i^T
//   r_i = sum_j w_ij^+ vp_j + sum_j w_ij^- vn_j - vp_i   (softmax weights w)
Matrix batch_gradient(const Matrix& W, const BatchData& data,
                      const Matrix& sims) {
  std::size_t b = data.U.rows;
  std::size_t d_in = data.U.cols;
  Matrix G(W.rows, W.cols);
  Matrix A;
  kernels::project_rows(W, data.U, A);
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = sims.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < 2 * b; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < 2 * b; ++j) denom += std::exp(row[j] - mx);

    Vec r(d_in, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      double wp = std::exp(row[j] - mx) / denom;
      double wn = std::exp(row[b + j] - mx) / denom;
      const double* vp = data.Vp.row(j);
      const double* vn = data.Vn.row(j);
      for (std::size_t c = 0; c < d_in; ++c) r[c] += wp * vp[c] + wn * vn[c];
    }
    const double* vpi = data.Vp.row(i);
    for (std::size_t c = 0; c < d_in; ++c) r[c] -= vpi[c];

    Vec wr = matvec(W, r);
    const double* a = A.row(i);
    for (std::size_t o = 0; o < W.rows; ++o) {
      double* g = G.row(o);
      const double* u = data.U.row(i);
      for (std::size_t c = 0; c < d_in; ++c)
        g[c] += wr[o] * u[c] + a[o] * r[c];
    }
  }
  double inv_b = 1.0 / static_cast<double>(b);
  for (double& x : G.data) x *= inv_b;
  return G;
}

}  // namespace

std::pair<double, std::vector<SampledPair>> contrastive_loss(
    const EncoderModel& model, const std::vector<ContrastiveInstance>& batch,
    const Pool& pool, std::uint64_t seed) {
  if (batch.empty()) throw ValidationError("contrastive_loss: empty batch");
  Rng rng(seed);
  auto pairs = sample_pairs(batch, rng);
  BatchData data = gather_batch(model, batch, pairs, pool);
  double loss = loss_from_sims(batch_sims(model.W, data));
  return {loss, std::move(pairs)};
}

Matrix loss_gradient(const EncoderModel& model,
                     const std::vector<ContrastiveInstance>& batch,
                     const Pool& pool, std::uint64_t seed) {
  if (batch.empty()) throw ValidationError("loss_gradient: empty batch");
  Rng rng(seed);
  auto pairs = sample_pairs(batch, rng);
  BatchData data = gather_batch(model, batch, pairs, pool);
  Matrix sims = batch_sims(model.W, data);
  return batch_gradient(model.W, data, sims);
}

EncoderModel train(const Pool& pool,
                   const std::vector<ContrastiveInstance>& trainset,
                   BaseEmbedder base, const TrainConfig& config) {
  if (trainset.empty()) throw ValidationError("train: empty trainset");
  if (config.batch_size == 0)
    throw ValidationError("train: batch_size must be at least 1");
  if (!(config.learning_rate > 0.0))
    throw ValidationError("train: learning_rate must be positive");
  if (config.d_out == 0)
    throw ValidationError("train: d_out must be at least 1");

  EncoderModel model;
  model.train_config = config;
  std::size_t d_in = base.dim();
  model.base = std::move(base);
  model.W = Matrix(config.d_out, d_in);
  for (std::size_t i = 0; i < std::min(config.d_out, d_in); ++i)
    model.W.at(i, i) = 1.0;

  Matrix m(config.d_out, d_in), v(config.d_out, d_in);
  std::size_t step = 0;
  Rng rng(config.seed);

  std::vector<std::size_t> order(trainset.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      std::size_t end = std::min(start + config.batch_size, order.size());
      std::vector<ContrastiveInstance> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(trainset[order[i]]);

      auto pairs = sample_pairs(batch, rng);
      BatchData data = gather_batch(model, batch, pairs, pool);
      Matrix sims = batch_sims(model.W, data);
      double loss = loss_from_sims(sims);
      if (!std::isfinite(loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch starting at " + std::to_string(start));
      epoch_loss += loss * static_cast<double>(batch.size());
      Matrix grad = batch_gradient(model.W, data, sims);

      ++step;
      double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < model.W.data.size(); ++i) {
        double g = grad.data[i];
        m.data[i] = config.beta1 * m.data[i] + (1.0 - config.beta1) * g;
        v.data[i] = config.beta2 * v.data[i] + (1.0 - config.beta2) * g * g;
        double mhat = m.data[i] / bc1;
        double vhat = v.data[i] / bc2;
        model.W.data[i] -=
            config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
      }
    }
    model.loss_history.push_back(epoch_loss /
                                 static_cast<double>(order.size()));
  }
  return model;
}

void save_model(const EncoderModel& model, const std::string& path,
                const std::string& run_config_json) {
  nlohmann::json j;
  j["d_in"] = model.d_in();
  j["d_out"] = model.d_out();
  j["W"] = model.W.data;
  j["base_embedder"] = nlohmann::json::parse(model.base.spec_json());
  j["train_config"] = {
      {"batch_size", model.train_config.batch_size},
      {"learning_rate", model.train_config.learning_rate},
      {"epochs", model.train_config.epochs},
      {"seed", model.train_config.seed},
      {"d_out", model.train_config.d_out},
      {"beta1", model.train_config.beta1},
      {"beta2", model.train_config.beta2},
      {"adam_eps", model.train_config.adam_eps},
  };
  j["loss_history"] = model.loss_history;
  if (!run_config_json.empty())
    j["run_config"] = nlohmann::json::parse(run_config_json);
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

EncoderModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": invalid JSON: " + ex.what());
  }
  EncoderModel model;
  try {
    std::size_t d_in = j.at("d_in").get<std::size_t>();
    std::size_t d_out = j.at("d_out").get<std::size_t>();
    model.base = BaseEmbedder::from_spec_json(j.at("base_embedder").dump());
    model.W = Matrix(d_out, d_in);
    auto w = j.at("W").get<Vec>();
    if (w.size() != d_out * d_in)
      throw ValidationError(path + ": W has " + std::to_string(w.size()) +
                            " entries, expected " + std::to_string(d_out * d_in));
    model.W.data = std::move(w);
    const auto& tc = j.at("train_config");
    model.train_config.batch_size = tc.at("batch_size").get<std::size_t>();
    model.train_config.learning_rate = tc.at("learning_rate").get<double>();
    model.train_config.epochs = tc.at("epochs").get<std::size_t>();
    model.train_config.seed = tc.at("seed").get<std::uint64_t>();
    model.train_config.d_out = tc.value("d_out", d_out);
    model.train_config.beta1 = tc.value("beta1", 0.9);
    model.train_config.beta2 = tc.value("beta2", 0.999);
    model.train_config.adam_eps = tc.value("adam_eps", 1e-8);
    model.loss_history = j.value("loss_history", Vec{});
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path + ": bad model layout: " + ex.what());
  }
  if (model.base.dim() != model.d_in())
    throw ValidationError(path + ": base embedder dim " +
                          std::to_string(model.base.dim()) +
                          " does not match d_in " +
                          std::to_string(model.d_in()));
  for (double x : model.W.data)
    if (!std::isfinite(x))
      throw ValidationError(path + ": W contains non-finite entries");
  return model;
}

}  // namespace dqlore
