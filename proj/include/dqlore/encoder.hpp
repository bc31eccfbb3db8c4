#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dqlore/common.hpp"
#include "dqlore/corpus.hpp"
#include "dqlore/trainset.hpp"

namespace dqlore {

// Frozen text featurizer. The trainable part of the encoder is only the
// linear head on top, so real sentence embeddings can be swapped in through
// the file kind without touching training.
class BaseEmbedder {
 public:
  enum class Kind { kHashing, kFile };

  static BaseEmbedder hashing(std::size_t dim, std::uint64_t seed = 0);
  static BaseEmbedder from_file(const std::string& path);

  Vec embed(const std::string& id, const std::string& text) const;
  std::size_t dim() const { return dim_; }
  Kind kind() const { return kind_; }

  std::string spec_json() const;
  static BaseEmbedder from_spec_json(const std::string& spec);

 private:
  Kind kind_ = Kind::kHashing;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::string path_;
  std::unordered_map<std::string, Vec> table_;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t epochs = 120;
  std::uint64_t seed = 0;
  std::size_t d_out = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EncoderModel {
  BaseEmbedder base;
  Matrix W;  // d_out x d_in
  TrainConfig train_config;
  Vec loss_history;  // mean loss per epoch

  std::size_t d_in() const { return W.cols; }
  std::size_t d_out() const { return W.rows; }

  // anchor text is question + "\n" + cot (question alone when cot is empty)
  Vec embed_anchor(const Exemplar& e) const;
  // arbitrary text, e.g. a test question joined with a generated cot
  Vec embed_text(const std::string& id, const std::string& text) const;
};

std::string anchor_text(const Exemplar& e);

// plain inner product, dims must match
double similarity(const Vec& u, const Vec& v);

struct SampledPair {
  std::string pos_id;
  std::string neg_id;
};

// one positive and one negative per instance, drawn in batch order
std::vector<SampledPair> sample_pairs(
    const std::vector<ContrastiveInstance>& batch, Rng& rng);

// Mean batch loss from a precomputed similarity matrix. sims is b x 2b:
// column j < b holds sim(anchor_i, positive_j), column b + j holds
// sim(anchor_i, negative_j); anchor i's own positive sits at column i.
double loss_from_sims(const Matrix& sims);

// loss_i = -ln( exp(sim(a_i, p_i)) / (sum_j exp(sim(a_i, p_j))
//                                     + sum_j exp(sim(a_i, n_j))) )
std::pair<double, std::vector<SampledPair>> contrastive_loss(
    const EncoderModel& model, const std::vector<ContrastiveInstance>& batch,
    const Pool& pool, std::uint64_t seed);

// exact gradient of the mean loss w.r.t. W, same pair sampling as
// contrastive_loss at the same seed
Matrix loss_gradient(const EncoderModel& model,
                     const std::vector<ContrastiveInstance>& batch,
                     const Pool& pool, std::uint64_t seed);

EncoderModel train(const Pool& pool,
                   const std::vector<ContrastiveInstance>& trainset,
                   BaseEmbedder base, const TrainConfig& config);

// JSON model file; optional run_config block is carried verbatim
void save_model(const EncoderModel& model, const std::string& path,
                const std::string& run_config_json = "");
EncoderModel load_model(const std::string& path);

}  // namespace dqlore
