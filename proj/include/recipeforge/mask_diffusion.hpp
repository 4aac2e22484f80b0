#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "recipeforge/common.hpp"
#include "recipeforge/corpus.hpp"
#include "recipeforge/netcore.hpp"

namespace recipeforge {

/// Discrete noise levels beta_1..beta_T with cumulative products
/// alpha_bar_t = prod_{s<=t} (1 - beta_s), alpha_bar_0 = 1. T = 0 is allowed
/// and denotes a model that samples straight from the uniform prior.
class NoiseSchedule {
 public:
  NoiseSchedule() : alpha_bar_{1.0} {}
  /// Throws std::invalid_argument unless every beta lies in (0, 1].
  explicit NoiseSchedule(std::vector<double> betas);
  static NoiseSchedule linear(std::size_t steps, double beta_start, double beta_end);

  std::size_t steps() const { return betas_.size(); }
  /// 1-based.
  double beta(std::size_t t) const;
  /// Defined for 0 <= t <= T.
  double alpha_bar(std::size_t t) const;
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

// Binary multinomial kernels. Bits are passed as ints in {0, 1}.

/// q(x_t = 1 | x_{t-1}) = (1 - beta) x_{t-1} + beta / 2.
double forward_step_kernel(int x_prev, double beta);
/// q(x_t = 1 | x_0) = alpha_bar_t x_0 + (1 - alpha_bar_t) / 2, for 0 <= t <= T.
double marginal_kernel(int x0, std::size_t t, const NoiseSchedule& schedule);
/// q(x_{t-1} = 1 | x_t, x_0) for 2 <= t <= T.
double posterior(int x_t, int x0, std::size_t t, const NoiseSchedule& schedule);

/// Probability that x_{t-1} = 1 given x_t when x_0 is replaced by a
/// probability `x0_prob` of being present:
///   proportional to q(x_t | x_{t-1}) * (alpha_bar_prev * x0_prob + (1 - alpha_bar_prev) / 2).
/// With x0_prob in {0, 1} this is the exact posterior; with alpha_bar_prev = 1
/// it is the reconstruction distribution p(x_0 | x_1).
double reverse_probability(int x_t, double x0_prob, double beta_t, double alpha_bar_prev);

/// KL(Bernoulli(a) || Bernoulli(b)).
double bernoulli_kl(double a, double b);

/// Maps (x_t, t) to per-ingredient probabilities that x_0 = 1.
using MaskPredictor =
    std::function<void(std::span<const std::uint8_t> x_t, std::size_t t, std::span<double> x0_prob)>;

struct MaskTrainingProvenance {
  OptimizerState optimizer;
  std::vector<std::uint64_t> seed_lineage;
};

struct MaskDiffusionModel {
  NoiseSchedule schedule;
  Network denoiser;  // input: 2 x_t - 1 (K) then time features (3); output: K logits
  IngredientVocabulary vocabulary;
  std::optional<MaskTrainingProvenance> provenance;

  std::size_t ingredients() const { return denoiser.output_size(); }

  /// Logits are left in ws.output().
  void predict_logits(std::span<const std::uint8_t> x_t, std::size_t t, Workspace& ws,
                      std::vector<double>& input) const;
  MaskPredictor predictor() const;
};

/// Untrained model with the standard denoiser shape [K + 3, width x depth, K].
MaskDiffusionModel make_mask_model(const IngredientVocabulary& vocabulary, NoiseSchedule schedule,
                                   std::size_t hidden_width, std::size_t depth, std::uint64_t seed);

/// KL(q(x_T | x_0) || uniform), summed over ingredients.
double prior_kl(std::span<const std::uint8_t> x0, const NoiseSchedule& schedule);

/// Sum over ingredients of KL(q(x_{t-1} | x_t, x_0) || p(x_{t-1} | x_t)) for t >= 2,
/// and -log p(x_0 | x_1) for t = 1.
double elbo_term(std::span<const std::uint8_t> x0, std::span<const std::uint8_t> x_t, std::size_t t,
                 std::span<const double> x0_prob, const NoiseSchedule& schedule);

/// Single-draw unbiased estimate of the negative ELBO:
///   prior_kl + T * elbo_term(t) with t ~ U{1..T} and x_t ~ q(x_t | x_0).
double elbo_loss(const NoiseSchedule& schedule, const MaskPredictor& predictor,
                 std::span<const std::uint8_t> x0, Rng& rng);
double elbo_loss(const MaskDiffusionModel& model, std::span<const std::uint8_t> x0, std::uint64_t seed);

struct MaskTrainingConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 64;
  std::size_t hidden_width = 32;
  std::size_t depth = 3;
  AdamConfig adam;
  /// Learning rate decays linearly to this fraction of its initial value.
  double final_lr_fraction = 1.0;
  /// Weight of an auxiliary cross-entropy on the x_0 prediction (0 = pure ELBO).
  double aux_weight = 0.0;
  /// Monte-Carlo draws per recipe when estimating validation loss.
  std::size_t validation_draws = 4;
};

struct TrainingReport {
  double initial_validation_loss = 0.0;
  double final_validation_loss = 0.0;
  std::size_t iterations = 0;
};

/// Mean single-draw negative ELBO over `recipes`, with fixed per-recipe seeds.
double validation_loss(const MaskDiffusionModel& model, std::span<const Recipe> recipes,
                       std::size_t draws, std::uint64_t seed);

/// Trains on the corpus' training split (validation split is only scored).
/// Throws DataError if no trainable recipe exists.
MaskDiffusionModel train_mask_model(const Corpus& corpus, const NoiseSchedule& schedule,
                                    const MaskTrainingConfig& config, std::uint64_t seed,
                                    TrainingReport* report = nullptr);

/// Ancestral sampling: x_T uniform, then T reverse steps.
std::vector<std::uint8_t> sample_mask(const MaskDiffusionModel& model, std::uint64_t seed);
std::vector<std::uint8_t> sample_mask(const MaskDiffusionModel& model, Rng& rng, Workspace& ws);

/// Redraws all-zero masks from the same stream; `rejected` counts discards.
std::vector<std::uint8_t> sample_nonempty_mask(const MaskDiffusionModel& model, Rng& rng,
                                               Workspace& ws, std::size_t& rejected);

struct MaskBatch {
  std::vector<std::vector<std::uint8_t>> masks;
  std::size_t rejected_empty = 0;
};

/// Sample i uses seed derive_seed(seed, i); output is independent of `threads`.
MaskBatch sample_masks(const MaskDiffusionModel& model, std::size_t count, std::uint64_t seed,
                       unsigned threads);

nlohmann::json mask_model_to_json(const MaskDiffusionModel& model);
MaskDiffusionModel mask_model_from_json(const nlohmann::json& j);
void save_mask_model(const std::filesystem::path& path, const MaskDiffusionModel& model);
MaskDiffusionModel load_mask_model(const std::filesystem::path& path);

}  // namespace recipeforge
