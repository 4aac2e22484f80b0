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
#include "recipeforge/mask_diffusion.hpp"
#include "recipeforge/netcore.hpp"

namespace recipeforge {

/// Variance-preserving SDE dx = -1/2 beta(t) x dt + sqrt(beta(t)) dB on t in [0, 1]
/// with beta linear from beta_min to beta_max.
struct SdeSpec {
  double beta_min = 0.1;
  double beta_max = 20.0;
  std::size_t steps = 500;  // Euler-Maruyama steps for reverse integration

  void validate() const;
  double beta(double t) const { return beta_min + (beta_max - beta_min) * t; }
  double integrated_beta(double t) const { return beta_min * t + 0.5 * (beta_max - beta_min) * t * t; }
  double alpha_bar(double t) const { return std::exp(-integrated_beta(t)); }
  /// Standard deviation of the perturbation kernel, sqrt(1 - alpha_bar(t)).
  double sigma(double t) const { return std::sqrt(-std::expm1(-integrated_beta(t))); }
};

/// Per-ingredient standardization of log-grams. Ingredients never seen in
/// training get (0, 1).
struct WeightCodec {
  static constexpr double kMinSd = 1e-3;

  std::vector<double> log_mean;
  std::vector<double> log_sd;

  static WeightCodec fit(std::span<const Recipe> recipes, std::size_t ingredients);
  std::size_t size() const { return log_mean.size(); }
};

/// (log grams - mu_i) / sd_i where present, 0 elsewhere.
std::vector<double> encode_weights(const Recipe& recipe, const WeightCodec& codec);
/// grams = exp(sd_i z_i + mu_i) where mask = 1, rounded to whole grams with a
/// 1 g floor; 0 elsewhere. Throws NumericError on a non-finite input.
Recipe decode_weights(std::span<const double> encoded, std::span<const std::uint8_t> mask,
                      const WeightCodec& codec);

/// Exact VP marginal draw sqrt(ab) x0 + sqrt(1 - ab) eps. `noise` (if given)
/// receives eps.
std::vector<double> perturb(std::span<const double> x0, double t, const SdeSpec& sde, Rng& rng,
                            std::vector<double>* noise = nullptr);
std::vector<double> perturb(std::span<const double> x0, double t, const SdeSpec& sde, std::uint64_t seed);

/// Score evaluation callback: writes grad_x log p_t(x) into `score`.
using ScoreFn = std::function<void(std::span<const double> x, double t, std::span<double> score)>;

struct QuantityTrainingProvenance {
  OptimizerState optimizer;
  std::vector<std::uint64_t> seed_lineage;
};

/// Score model conditioned on a mask. The network predicts the perturbation
/// noise; the score is -prediction / sigma(t) on active coordinates.
struct QuantityScoreModel {
  SdeSpec sde;
  Network score_net;  // input: x (K), 2 mask - 1 (K), time features (3); output: K
  WeightCodec codec;
  IngredientVocabulary vocabulary;
  std::optional<QuantityTrainingProvenance> provenance;

  std::size_t ingredients() const { return score_net.output_size(); }

  /// Noise prediction left in ws.output().
  void predict_noise(std::span<const double> x, std::span<const std::uint8_t> mask, double t,
                     Workspace& ws, std::vector<double>& input) const;
  ScoreFn score_fn(std::span<const std::uint8_t> mask) const;
};

QuantityScoreModel make_quantity_model(const IngredientVocabulary& vocabulary, const SdeSpec& sde,
                                       WeightCodec codec, std::size_t hidden_width, std::size_t depth,
                                       std::uint64_t seed);

/// Denoising score-matching loss at a fixed t: ||s(x_t, t) - target||^2 over
/// active coordinates, target = -(x_t - sqrt(ab) x0) / (1 - ab).
double dsm_loss_at(const ScoreFn& score, const SdeSpec& sde, std::span<const double> x0,
                   std::span<const std::uint8_t> mask, double t, Rng& rng);
/// Same with t ~ U(t_min, 1].
double dsm_loss(const QuantityScoreModel& model, std::span<const double> x0,
                std::span<const std::uint8_t> mask, std::uint64_t seed);

struct QuantityTrainingConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 64;
  std::size_t hidden_width = 32;
  std::size_t depth = 3;
  AdamConfig adam;
  /// Learning rate decays linearly to this fraction of its initial value.
  double final_lr_fraction = 1.0;
  std::size_t validation_draws = 4;
  /// Lower end of the training time range; sampling never evaluates below 1/steps.
  double t_min = 1e-3;
};

double quantity_validation_loss(const QuantityScoreModel& model, std::span<const Recipe> recipes,
                                std::size_t draws, std::uint64_t seed);

QuantityScoreModel train_quantity_model(const Corpus& corpus, const SdeSpec& sde,
                                        const QuantityTrainingConfig& config, std::uint64_t seed,
                                        TrainingReport* report = nullptr);

/// Integrates the reverse-time SDE from t = 1 to 0 with sde.steps uniform
/// Euler-Maruyama steps, starting from N(0, I) on active coordinates. Inactive
/// coordinates stay at 0. Throws NumericError (with step and norm) on a
/// non-finite state.
std::vector<double> reverse_integrate(const ScoreFn& score, std::span<const std::uint8_t> mask,
                                      const SdeSpec& sde, Rng& rng);

Recipe reverse_sample(const QuantityScoreModel& model, std::span<const std::uint8_t> mask, Rng& rng);
Recipe reverse_sample(const QuantityScoreModel& model, std::span<const std::uint8_t> mask,
                      std::uint64_t seed);

nlohmann::json quantity_model_to_json(const QuantityScoreModel& model);
QuantityScoreModel quantity_model_from_json(const nlohmann::json& j);
void save_quantity_model(const std::filesystem::path& path, const QuantityScoreModel& model);
QuantityScoreModel load_quantity_model(const std::filesystem::path& path);

}  // namespace recipeforge
