#include "recipeforge/mask_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "recipeforge/common.hpp"

namespace recipeforge {
namespace {

constexpr double kProbFloor = 1e-15;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

void check_bit(int bit) {
  if (bit != 0 && bit != 1) throw std::invalid_argument("mask bit must be 0 or 1");
}

std::size_t sample_step(const NoiseSchedule& schedule, Rng& rng) {
  return 1 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(schedule.steps())) %
                 schedule.steps();
}

void noise_to(std::span<const std::uint8_t> x0, std::size_t t, const NoiseSchedule& schedule,
              Rng& rng, std::vector<std::uint8_t>& x_t) {
  x_t.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i)
    x_t[i] = uniform01(rng) < marginal_kernel(x0[i], t, schedule) ? 1 : 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedule and kernels

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  alpha_bar_.assign(1, 1.0);
  for (double b : betas_) {
    if (!(b > 0.0 && b <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
    alpha_bar_.push_back(alpha_bar_.back() * (1.0 - b));
  }
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  std::vector<double> betas(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(std::size_t t) const {
  if (t < 1 || t > steps()) throw std::invalid_argument("time step out of range");
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  if (t > steps()) throw std::invalid_argument("time step out of range");
  return alpha_bar_[t];
}

double forward_step_kernel(int x_prev, double beta) {
  check_bit(x_prev);
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  return (1.0 - beta) * x_prev + beta / 2.0;
}

double marginal_kernel(int x0, std::size_t t, const NoiseSchedule& schedule) {
  check_bit(x0);
  const double ab = schedule.alpha_bar(t);
  return ab * x0 + (1.0 - ab) / 2.0;
}

double reverse_probability(int x_t, double x0_prob, double beta_t, double alpha_bar_prev) {
  const double to_one = forward_step_kernel(1, beta_t);   // q(x_t = 1 | x_{t-1} = 1)
  const double to_zero = forward_step_kernel(0, beta_t);  // q(x_t = 1 | x_{t-1} = 0)
  const double like1 = x_t ? to_one : 1.0 - to_one;
  const double like0 = x_t ? to_zero : 1.0 - to_zero;
  const double uniform = (1.0 - alpha_bar_prev) / 2.0;
  const double u1 = like1 * (alpha_bar_prev * x0_prob + uniform);
  const double u0 = like0 * (alpha_bar_prev * (1.0 - x0_prob) + uniform);
  const double total = u1 + u0;
  if (total <= 0.0) return static_cast<double>(x_t);  // unreachable configuration
  return u1 / total;
}

double posterior(int x_t, int x0, std::size_t t, const NoiseSchedule& schedule) {
  check_bit(x_t);
  check_bit(x0);
  if (t < 2 || t > schedule.steps()) throw std::invalid_argument("posterior needs 2 <= t <= T");
  return reverse_probability(x_t, x0, schedule.beta(t), schedule.alpha_bar(t - 1));
}

double bernoulli_kl(double a, double b) {
  b = clamp_prob(b);
  double kl = 0.0;
  if (a > 0.0) kl += a * std::log(a / b);
  if (a < 1.0) kl += (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Model

void MaskDiffusionModel::predict_logits(std::span<const std::uint8_t> x_t, std::size_t t,
                                        Workspace& ws, std::vector<double>& input) const {
  const std::size_t k = ingredients();
  if (x_t.size() != k) throw std::invalid_argument("mask length does not match model");
  input.resize(k + 3);
  for (std::size_t i = 0; i < k; ++i) input[i] = x_t[i] ? 1.0 : -1.0;
  const double frac = schedule.steps() == 0 ? 0.0
                                            : static_cast<double>(t) / static_cast<double>(schedule.steps());
  const auto feats = time_features(frac);
  std::copy(feats.begin(), feats.end(), input.begin() + static_cast<std::ptrdiff_t>(k));
  denoiser.forward(input, ws);
}

MaskPredictor MaskDiffusionModel::predictor() const {
  return [this](std::span<const std::uint8_t> x_t, std::size_t t, std::span<double> out) {
    thread_local Workspace ws;
    thread_local std::vector<double> input;
    predict_logits(x_t, t, ws, input);
    const auto logits = ws.output();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(logits[i]);
  };
}

MaskDiffusionModel make_mask_model(const IngredientVocabulary& vocabulary, NoiseSchedule schedule,
                                   std::size_t hidden_width, std::size_t depth, std::uint64_t seed) {
  const std::size_t k = vocabulary.size();
  std::vector<std::size_t> sizes{k + 3};
  for (std::size_t d = 0; d < depth; ++d) sizes.push_back(hidden_width);
  sizes.push_back(k);
  return MaskDiffusionModel{std::move(schedule), Network::init(sizes, seed), vocabulary, std::nullopt};
}

// ---------------------------------------------------------------------------
// ELBO

double prior_kl(std::span<const std::uint8_t> x0, const NoiseSchedule& schedule) {
  const std::size_t T = schedule.steps();
  double total = 0.0;
  for (auto bit : x0) total += bernoulli_kl(marginal_kernel(bit, T, schedule), 0.5);
  return total;
}

double elbo_term(std::span<const std::uint8_t> x0, std::span<const std::uint8_t> x_t, std::size_t t,
                 std::span<const double> x0_prob, const NoiseSchedule& schedule) {
  const double beta = schedule.beta(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double target = t == 1 ? static_cast<double>(x0[i]) : posterior(x_t[i], x0[i], t, schedule);
    total += bernoulli_kl(target, reverse_probability(x_t[i], x0_prob[i], beta, ab_prev));
  }
  return total;
}

double elbo_loss(const NoiseSchedule& schedule, const MaskPredictor& predictor,
                 std::span<const std::uint8_t> x0, Rng& rng) {
  const std::size_t T = schedule.steps();
  if (T == 0) return static_cast<double>(x0.size()) * std::numbers::ln2;
  const std::size_t t = sample_step(schedule, rng);
  std::vector<std::uint8_t> x_t;
  noise_to(x0, t, schedule, rng, x_t);
  std::vector<double> probs(x0.size());
  predictor(x_t, t, probs);
  return prior_kl(x0, schedule) + static_cast<double>(T) * elbo_term(x0, x_t, t, probs, schedule);
}

double elbo_loss(const MaskDiffusionModel& model, std::span<const std::uint8_t> x0, std::uint64_t seed) {
  if (x0.size() != model.ingredients()) throw std::invalid_argument("mask length does not match model");
  Rng rng(seed);
  return elbo_loss(model.schedule, model.predictor(), x0, rng);
}

double validation_loss(const MaskDiffusionModel& model, std::span<const Recipe> recipes,
                       std::size_t draws, std::uint64_t seed) {
  if (recipes.empty() || draws == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < recipes.size(); ++r)
    for (std::size_t d = 0; d < draws; ++d)
      total += elbo_loss(model, recipes[r].mask, derive_seed(seed, r * draws + d));
  return total / static_cast<double>(recipes.size() * draws);
}

// ---------------------------------------------------------------------------
// Training

MaskDiffusionModel train_mask_model(const Corpus& corpus, const NoiseSchedule& schedule,
                                    const MaskTrainingConfig& config, std::uint64_t seed,
                                    TrainingReport* report) {
  std::vector<Recipe> train;
  for (const auto& r : corpus.training())
    if (!r.is_degenerate()) train.push_back(r);
  if (train.empty()) throw DataError("mask training needs a non-empty training corpus");
  if (schedule.steps() == 0) throw std::invalid_argument("mask training needs T >= 1");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  auto held_out = corpus.validation();
  if (held_out.empty()) held_out.assign(train.begin(), train.begin() + std::min<std::size_t>(train.size(), 256));

  const std::uint64_t init_seed = derive_seed(seed, 1);
  const std::uint64_t data_seed = derive_seed(seed, 2);
  const std::uint64_t eval_seed = derive_seed(seed, 3);
  MaskDiffusionModel model =
      make_mask_model(corpus.vocabulary, schedule, config.hidden_width, config.depth, init_seed);
  OptimizerState optimizer = OptimizerState::for_network(model.denoiser, config.adam);

  if (report) {
    report->initial_validation_loss = validation_loss(model, held_out, config.validation_draws, eval_seed);
  }

  const std::size_t k = model.ingredients();
  const std::size_t T = schedule.steps();
  const double weight = static_cast<double>(T);
  Rng rng(data_seed);
  Workspace ws = model.denoiser.make_workspace();
  std::vector<double> input, grad(model.denoiser.parameter_count()), out_grad(k);
  std::vector<std::uint8_t> x_t;

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto& x0 = train[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(train.size())) % train.size()].mask;
      const std::size_t t = sample_step(schedule, rng);
      noise_to(x0, t, schedule, rng, x_t);
      model.predict_logits(x_t, t, ws, input);
      const double beta = schedule.beta(t);
      const double ab_prev = schedule.alpha_bar(t - 1);
      const double uniform = (1.0 - ab_prev) / 2.0;
      const auto logits = ws.output();
      for (std::size_t i = 0; i < k; ++i) {
        const double p = sigmoid(logits[i]);
        const double target = t == 1 ? static_cast<double>(x0[i]) : posterior(x_t[i], x0[i], t, schedule);
        const double b_prob = reverse_probability(x_t[i], p, beta, ab_prev);
        // d KL(target || b) / d logit, with b the reverse probability built from p.
        const double dp = ab_prev * (1.0 / (ab_prev * p + uniform) + 1.0 / (ab_prev * (1.0 - p) + uniform));
        double g = weight * (b_prob - target) * dp * p * (1.0 - p);
        g += config.aux_weight * (p - static_cast<double>(x0[i]));
        out_grad[i] = g / static_cast<double>(config.batch_size);
      }
      model.denoiser.backward(out_grad, grad, ws);
    }
    optimizer.config.learning_rate = decayed_rate(config.adam.learning_rate, config.final_lr_fraction, iter, config.iterations);
    optimizer_step(model.denoiser, grad, optimizer);
  }
  optimizer.config.learning_rate = config.adam.learning_rate;

  if (report) {
    report->iterations = config.iterations;
    report->final_validation_loss = validation_loss(model, held_out, config.validation_draws, eval_seed);
  }
  model.provenance = MaskTrainingProvenance{std::move(optimizer), {seed, init_seed, data_seed, eval_seed}};
  return model;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<std::uint8_t> sample_mask(const MaskDiffusionModel& model, Rng& rng, Workspace& ws) {
  const std::size_t k = model.ingredients();
  const auto& schedule = model.schedule;
  std::vector<std::uint8_t> x(k);
  for (auto& bit : x) bit = uniform01(rng) < 0.5 ? 1 : 0;
  std::vector<double> input;
  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    model.predict_logits(x, t, ws, input);
    const auto logits = ws.output();
    const double beta = schedule.beta(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    for (std::size_t i = 0; i < k; ++i) {
      const double p = reverse_probability(x[i], sigmoid(logits[i]), beta, ab_prev);
      x[i] = uniform01(rng) < p ? 1 : 0;
    }
  }
  return x;
}

std::vector<std::uint8_t> sample_mask(const MaskDiffusionModel& model, std::uint64_t seed) {
  Rng rng(seed);
  Workspace ws = model.denoiser.make_workspace();
  return sample_mask(model, rng, ws);
}

std::vector<std::uint8_t> sample_nonempty_mask(const MaskDiffusionModel& model, Rng& rng,
                                               Workspace& ws, std::size_t& rejected) {
  constexpr std::size_t kMaxAttempts = 10000;
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    auto mask = sample_mask(model, rng, ws);
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) != mask.end()) return mask;
    ++rejected;
  }
  throw NumericError("mask model produced only empty masks after " + std::to_string(kMaxAttempts) +
                     " attempts");
}

MaskBatch sample_masks(const MaskDiffusionModel& model, std::size_t count, std::uint64_t seed,
                       unsigned threads) {
  MaskBatch batch;
  batch.masks.resize(count);
  std::vector<std::size_t> rejected(count, 0);
  parallel_for(count, threads, [&](std::size_t i) {
    thread_local Workspace ws;
    Rng rng(derive_seed(seed, i));
    batch.masks[i] = sample_nonempty_mask(model, rng, ws, rejected[i]);
  });
  for (auto r : rejected) batch.rejected_empty += r;
  return batch;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json mask_model_to_json(const MaskDiffusionModel& model) {
  nlohmann::json j = {{"schema_version", 1},
                      {"kind", "mask_diffusion"},
                      {"schedule", {{"betas", model.schedule.betas()}}},
                      {"vocabulary", model.vocabulary.to_json()},
                      {"network", network_to_json(model.denoiser)}};
  if (model.provenance) {
    j["optimizer"] = optimizer_to_json(model.provenance->optimizer);
    j["seed_lineage"] = model.provenance->seed_lineage;
  }
  return j;
}

MaskDiffusionModel mask_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "mask_diffusion") throw DataError("checkpoint is not a mask diffusion model");
    if (j.at("schema_version").get<int>() != 1) throw DataError("unsupported checkpoint schema version");
    MaskDiffusionModel model{NoiseSchedule(j.at("schedule").at("betas").get<std::vector<double>>()),
                             network_from_json(j.at("network")),
                             IngredientVocabulary::from_json(j.at("vocabulary")), std::nullopt};
    if (model.denoiser.output_size() != model.vocabulary.size() ||
        model.denoiser.input_size() != model.vocabulary.size() + 3)
      throw DataError("mask denoiser shape does not match vocabulary");
    if (j.contains("optimizer")) {
      model.provenance = MaskTrainingProvenance{optimizer_from_json(j["optimizer"]),
                                                j.value("seed_lineage", std::vector<std::uint64_t>{})};
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("mask checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("mask checkpoint: ") + e.what());
  }
}

void save_mask_model(const std::filesystem::path& path, const MaskDiffusionModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << mask_model_to_json(model).dump() << '\n';
}

MaskDiffusionModel load_mask_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return mask_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace recipeforge
