#include "recipeforge/quantity_diffusion.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace recipeforge {
namespace {

void check_mask(std::span<const std::uint8_t> mask, std::size_t k) {
  if (mask.size() != k) throw std::invalid_argument("mask length does not match model");
}

}  // namespace

void SdeSpec::validate() const {
  if (!(beta_min > 0.0) || !(beta_max >= beta_min))
    throw std::invalid_argument("SDE needs 0 < beta_min <= beta_max");
  if (steps == 0) throw std::invalid_argument("SDE needs at least one integration step");
}

// ---------------------------------------------------------------------------
// Codec

WeightCodec WeightCodec::fit(std::span<const Recipe> recipes, std::size_t ingredients) {
  WeightCodec codec{std::vector<double>(ingredients, 0.0), std::vector<double>(ingredients, 1.0)};
  std::vector<double> sum(ingredients, 0.0), sum_sq(ingredients, 0.0);
  std::vector<std::size_t> count(ingredients, 0);
  for (const auto& r : recipes) {
    if (r.size() != ingredients) throw std::invalid_argument("recipe length does not match codec");
    for (std::size_t i = 0; i < ingredients; ++i) {
      if (!r.mask[i]) continue;
      const double lg = std::log(r.grams[i]);
      sum[i] += lg;
      sum_sq[i] += lg * lg;
      ++count[i];
    }
  }
  for (std::size_t i = 0; i < ingredients; ++i) {
    if (count[i] == 0) continue;
    const double n = static_cast<double>(count[i]);
    const double mean = sum[i] / n;
    const double var = std::max(0.0, sum_sq[i] / n - mean * mean);
    codec.log_mean[i] = mean;
    codec.log_sd[i] = std::max(kMinSd, std::sqrt(var));
  }
  return codec;
}

std::vector<double> encode_weights(const Recipe& recipe, const WeightCodec& codec) {
  if (recipe.size() != codec.size()) throw std::invalid_argument("recipe length does not match codec");
  std::vector<double> z(recipe.size(), 0.0);
  for (std::size_t i = 0; i < recipe.size(); ++i)
    if (recipe.mask[i]) z[i] = (std::log(recipe.grams[i]) - codec.log_mean[i]) / codec.log_sd[i];
  return z;
}

Recipe decode_weights(std::span<const double> encoded, std::span<const std::uint8_t> mask,
                      const WeightCodec& codec) {
  if (encoded.size() != codec.size() || mask.size() != codec.size())
    throw std::invalid_argument("vector length does not match codec");
  static const double kMaxLog = std::log(DBL_MAX) - 1.0;
  Recipe recipe(codec.size());
  for (std::size_t i = 0; i < codec.size(); ++i) {
    if (!mask[i]) continue;
    if (!std::isfinite(encoded[i]))
      throw NumericError("non-finite encoded weight at ingredient " + std::to_string(i));
    const double log_grams = std::min(kMaxLog, codec.log_sd[i] * encoded[i] + codec.log_mean[i]);
    recipe.mask[i] = 1;
    recipe.grams[i] = std::max(1.0, std::round(std::exp(log_grams)));
  }
  return recipe;
}

// ---------------------------------------------------------------------------
// Forward perturbation and loss

std::vector<double> perturb(std::span<const double> x0, double t, const SdeSpec& sde, Rng& rng,
                            std::vector<double>* noise) {
  if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("perturbation time must lie in (0, 1]");
  const double mean_scale = std::sqrt(sde.alpha_bar(t));
  const double sd = sde.sigma(t);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(x0.size());
  if (noise) noise->resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double eps = normal(rng);
    if (noise) (*noise)[i] = eps;
    out[i] = mean_scale * x0[i] + sd * eps;
  }
  return out;
}

std::vector<double> perturb(std::span<const double> x0, double t, const SdeSpec& sde, std::uint64_t seed) {
  Rng rng(seed);
  return perturb(x0, t, sde, rng);
}

double dsm_loss_at(const ScoreFn& score, const SdeSpec& sde, std::span<const double> x0,
                   std::span<const std::uint8_t> mask, double t, Rng& rng) {
  check_mask(mask, x0.size());
  auto x_t = perturb(x0, t, sde, rng);
  for (std::size_t i = 0; i < x_t.size(); ++i)
    if (!mask[i]) x_t[i] = 0.0;
  const double mean_scale = std::sqrt(sde.alpha_bar(t));
  const double variance = -std::expm1(-sde.integrated_beta(t));
  std::vector<double> s(x0.size());
  score(x_t, t, s);
  double loss = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (!mask[i]) continue;
    const double target = -(x_t[i] - mean_scale * x0[i]) / variance;
    loss += (s[i] - target) * (s[i] - target);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Model

void QuantityScoreModel::predict_noise(std::span<const double> x, std::span<const std::uint8_t> mask,
                                       double t, Workspace& ws, std::vector<double>& input) const {
  const std::size_t k = ingredients();
  check_mask(mask, k);
  if (x.size() != k) throw std::invalid_argument("state length does not match model");
  input.resize(2 * k + 3);
  for (std::size_t i = 0; i < k; ++i) {
    input[i] = mask[i] ? x[i] : 0.0;
    input[k + i] = mask[i] ? 1.0 : -1.0;
  }
  const auto feats = time_features(t);
  std::copy(feats.begin(), feats.end(), input.begin() + static_cast<std::ptrdiff_t>(2 * k));
  score_net.forward(input, ws);
}

ScoreFn QuantityScoreModel::score_fn(std::span<const std::uint8_t> mask) const {
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return [this, m = std::move(m)](std::span<const double> x, double t, std::span<double> out) {
    thread_local Workspace ws;
    thread_local std::vector<double> input;
    predict_noise(x, m, t, ws, input);
    const double sd = sde.sigma(t);
    const auto eps = ws.output();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] ? -eps[i] / sd : 0.0;
  };
}

QuantityScoreModel make_quantity_model(const IngredientVocabulary& vocabulary, const SdeSpec& sde,
                                       WeightCodec codec, std::size_t hidden_width, std::size_t depth,
                                       std::uint64_t seed) {
  sde.validate();
  const std::size_t k = vocabulary.size();
  std::vector<std::size_t> sizes{2 * k + 3};
  for (std::size_t d = 0; d < depth; ++d) sizes.push_back(hidden_width);
  sizes.push_back(k);
  return QuantityScoreModel{sde, Network::init(sizes, seed), std::move(codec), vocabulary, std::nullopt};
}

double dsm_loss(const QuantityScoreModel& model, std::span<const double> x0,
                std::span<const std::uint8_t> mask, std::uint64_t seed) {
  Rng rng(seed);
  constexpr double t_min = 1e-3;
  const double t = t_min + (1.0 - t_min) * uniform01(rng);
  return dsm_loss_at(model.score_fn(mask), model.sde, x0, mask, t, rng);
}

double quantity_validation_loss(const QuantityScoreModel& model, std::span<const Recipe> recipes,
                                std::size_t draws, std::uint64_t seed) {
  if (recipes.empty() || draws == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < recipes.size(); ++r) {
    const auto x0 = encode_weights(recipes[r], model.codec);
    for (std::size_t d = 0; d < draws; ++d)
      total += dsm_loss(model, x0, recipes[r].mask, derive_seed(seed, r * draws + d));
  }
  return total / static_cast<double>(recipes.size() * draws);
}

// ---------------------------------------------------------------------------
// Training

QuantityScoreModel train_quantity_model(const Corpus& corpus, const SdeSpec& sde,
                                        const QuantityTrainingConfig& config, std::uint64_t seed,
                                        TrainingReport* report) {
  std::vector<Recipe> train;
  for (const auto& r : corpus.training())
    if (!r.is_degenerate()) train.push_back(r);
  if (train.empty()) throw DataError("quantity training needs a non-empty training corpus");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  auto held_out = corpus.validation();
  if (held_out.empty()) held_out.assign(train.begin(), train.begin() + std::min<std::size_t>(train.size(), 256));

  const std::uint64_t init_seed = derive_seed(seed, 1);
  const std::uint64_t data_seed = derive_seed(seed, 2);
  const std::uint64_t eval_seed = derive_seed(seed, 3);
  const std::size_t k = corpus.vocabulary.size();
  QuantityScoreModel model = make_quantity_model(corpus.vocabulary, sde, WeightCodec::fit(train, k),
                                                 config.hidden_width, config.depth, init_seed);
  OptimizerState optimizer = OptimizerState::for_network(model.score_net, config.adam);

  if (report) report->initial_validation_loss = quantity_validation_loss(model, held_out, config.validation_draws, eval_seed);

  std::vector<std::vector<double>> encoded;
  encoded.reserve(train.size());
  for (const auto& r : train) encoded.push_back(encode_weights(r, model.codec));

  Rng rng(data_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Workspace ws = model.score_net.make_workspace();
  std::vector<double> input, grad(model.score_net.parameter_count()), out_grad(k), x_t(k), eps(k);
  const double scale = 2.0 / static_cast<double>(config.batch_size);

  // Noise-prediction objective: sigma(t)^2 times the score-matching loss.
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t n = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(train.size())) % train.size();
      const auto& mask = train[n].mask;
      const auto& x0 = encoded[n];
      const double t = config.t_min + (1.0 - config.t_min) * uniform01(rng);
      const double mean_scale = std::sqrt(sde.alpha_bar(t));
      const double sd = sde.sigma(t);
      for (std::size_t i = 0; i < k; ++i) {
        eps[i] = normal(rng);
        x_t[i] = mask[i] ? mean_scale * x0[i] + sd * eps[i] : 0.0;
      }
      model.predict_noise(x_t, mask, t, ws, input);
      const auto pred = ws.output();
      for (std::size_t i = 0; i < k; ++i) out_grad[i] = mask[i] ? scale * (pred[i] - eps[i]) : 0.0;
      model.score_net.backward(out_grad, grad, ws);
    }
    optimizer.config.learning_rate =
        decayed_rate(config.adam.learning_rate, config.final_lr_fraction, iter, config.iterations);
    optimizer_step(model.score_net, grad, optimizer);
  }
  optimizer.config.learning_rate = config.adam.learning_rate;

  if (report) {
    report->iterations = config.iterations;
    report->final_validation_loss = quantity_validation_loss(model, held_out, config.validation_draws, eval_seed);
  }
  model.provenance = QuantityTrainingProvenance{std::move(optimizer), {seed, init_seed, data_seed, eval_seed}};
  return model;
}

// ---------------------------------------------------------------------------
// Reverse-time sampling

std::vector<double> reverse_integrate(const ScoreFn& score, std::span<const std::uint8_t> mask,
                                      const SdeSpec& sde, Rng& rng) {
  sde.validate();
  const std::size_t k = mask.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(k, 0.0), s(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    if (mask[i]) x[i] = normal(rng);
  const double dt = 1.0 / static_cast<double>(sde.steps);
  for (std::size_t step = 0; step < sde.steps; ++step) {
    const double t = 1.0 - static_cast<double>(step) * dt;
    const double b = sde.beta(t);
    score(x, t, s);
    const double noise_scale = std::sqrt(b * dt);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!mask[i]) continue;
      // Backward step of dx = [f - g^2 score] dt + g dB with f = -b x / 2, g^2 = b.
      x[i] += (0.5 * b * x[i] + b * s[i]) * dt + noise_scale * normal(rng);
      norm_sq += x[i] * x[i];
    }
    if (!std::isfinite(norm_sq)) {
      std::ostringstream msg;
      msg << "reverse SDE state became non-finite at step " << step << " (t = " << t
          << ", squared norm = " << norm_sq << ")";
      throw NumericError(msg.str());
    }
  }
  return x;
}

Recipe reverse_sample(const QuantityScoreModel& model, std::span<const std::uint8_t> mask, Rng& rng) {
  check_mask(mask, model.ingredients());
  const auto z = reverse_integrate(model.score_fn(mask), mask, model.sde, rng);
  return decode_weights(z, mask, model.codec);
}

Recipe reverse_sample(const QuantityScoreModel& model, std::span<const std::uint8_t> mask,
                      std::uint64_t seed) {
  Rng rng(seed);
  return reverse_sample(model, mask, rng);
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json quantity_model_to_json(const QuantityScoreModel& model) {
  nlohmann::json j = {
      {"schema_version", 1},
      {"kind", "quantity_diffusion"},
      {"sde", {{"family", "variance_preserving"}, {"beta_min", model.sde.beta_min},
               {"beta_max", model.sde.beta_max}, {"steps", model.sde.steps}}},
      {"codec", {{"log_mean", model.codec.log_mean}, {"log_sd", model.codec.log_sd}}},
      {"vocabulary", model.vocabulary.to_json()},
      {"network", network_to_json(model.score_net)}};
  if (model.provenance) {
    j["optimizer"] = optimizer_to_json(model.provenance->optimizer);
    j["seed_lineage"] = model.provenance->seed_lineage;
  }
  return j;
}

QuantityScoreModel quantity_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "quantity_diffusion") throw DataError("checkpoint is not a quantity diffusion model");
    if (j.at("schema_version").get<int>() != 1) throw DataError("unsupported checkpoint schema version");
    const auto& s = j.at("sde");
    SdeSpec sde{s.at("beta_min").get<double>(), s.at("beta_max").get<double>(), s.at("steps").get<std::size_t>()};
    sde.validate();
    WeightCodec codec{j.at("codec").at("log_mean").get<std::vector<double>>(),
                      j.at("codec").at("log_sd").get<std::vector<double>>()};
    QuantityScoreModel model{sde, network_from_json(j.at("network")), std::move(codec),
                             IngredientVocabulary::from_json(j.at("vocabulary")), std::nullopt};
    const std::size_t k = model.vocabulary.size();
    if (model.score_net.output_size() != k || model.score_net.input_size() != 2 * k + 3 ||
        model.codec.log_mean.size() != k || model.codec.log_sd.size() != k)
      throw DataError("quantity model shape does not match vocabulary");
    if (j.contains("optimizer")) {
      model.provenance = QuantityTrainingProvenance{optimizer_from_json(j["optimizer"]),
                                                    j.value("seed_lineage", std::vector<std::uint64_t>{})};
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("quantity checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("quantity checkpoint: ") + e.what());
  }
}

void save_quantity_model(const std::filesystem::path& path, const QuantityScoreModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << quantity_model_to_json(model).dump() << '\n';
}

QuantityScoreModel load_quantity_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return quantity_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace recipeforge
