// Acceptance suite: one PASS/FAIL line per criterion, each with its measured
// values and wall time. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "recipeforge/cli.hpp"
#include "recipeforge/common.hpp"
#include "recipeforge/config.hpp"
#include "recipeforge/corpus.hpp"
#include "recipeforge/discovery.hpp"
#include "recipeforge/fidelity.hpp"
#include "recipeforge/mask_diffusion.hpp"
#include "recipeforge/netcore.hpp"
#include "recipeforge/quantity_diffusion.hpp"
#include "recipeforge/scoring.hpp"

using namespace recipeforge;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = RECIPEFORGE_DATA_DIR;
const fs::path kDeskConfig = fs::path(RECIPEFORGE_CONFIG_DIR) / "desk.conf";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [failed]");
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

int failures = 0;

void report(int number, const std::string& name, Verdict& v, double seconds, double limit) {
  v.require(seconds < limit, "time " + fmt(seconds, 3) + " s < " + fmt(limit, 4) + " s");
  if (!v.pass) ++failures;
  std::cout << "criterion " << number << " (" << name << "): " << (v.pass ? "PASS" : "FAIL") << "  "
            << v.detail.str() << std::endl;
}

// q(x_t = b | x_{t-1} = a) from the kernel definition.
double step(int a, int b, double beta) {
  const double one = (1.0 - beta) * a + beta / 2.0;
  return b ? one : 1.0 - one;
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

Recipe desk_recipe(const IngredientVocabulary& vocabulary, const PlantedRecipe& planted) {
  Recipe r(vocabulary.size());
  for (const auto& [id, grams] : planted.ingredients) {
    const auto i = vocabulary.require_index(id);
    r.mask[i] = 1;
    r.grams[i] = grams;
  }
  return r;
}

// Criterion 1 --------------------------------------------------------------

void gradient_correctness() {
  Stopwatch clock;
  Verdict v;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    worst = std::max(worst, gradcheck(Network::init({8, 16, 16, 8}, seed), seed + 100, 1000));
  v.require(worst < 1e-4, "max relative error " + fmt(worst) + " < 1e-4 over 5 nets x 1000 parameters");
  report(1, "gradient correctness", v, clock.seconds(), 60);
}

// Criterion 2 --------------------------------------------------------------

void kernel_algebra() {
  Stopwatch clock;
  Verdict v;
  Rng rng(2024);
  std::uniform_real_distribution<double> beta_dist(1e-4, 1.0);
  std::uniform_int_distribution<std::size_t> length(2, 60);
  double worst_consistency = 0.0, worst_posterior = 0.0;
  for (int tuple = 0; tuple < 1000; ++tuple) {
    std::vector<double> betas(length(rng));
    for (auto& b : betas) b = beta_dist(rng);
    const NoiseSchedule s(betas);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(2, s.steps())(rng);
    const int x0 = static_cast<int>(rng() & 1u);
    const double prev = marginal_kernel(x0, t - 1, s);
    const double composed = prev * forward_step_kernel(1, s.beta(t)) + (1.0 - prev) * forward_step_kernel(0, s.beta(t));
    worst_consistency = std::max(worst_consistency, std::abs(marginal_kernel(x0, t, s) - composed));
    for (int xt = 0; xt <= 1; ++xt) {
      const double w1 = step(1, xt, s.beta(t)) * prev, w0 = step(0, xt, s.beta(t)) * (1.0 - prev);
      const double p1 = posterior(xt, x0, t, s);
      worst_posterior = std::max(worst_posterior, std::abs(p1 - w1 / (w0 + w1)));
      worst_posterior = std::max(worst_posterior, std::abs((1.0 - p1) - w0 / (w0 + w1)));
    }
  }
  v.require(worst_consistency < 1e-12, "forward/marginal consistency max error " + fmt(worst_consistency) + " < 1e-12");
  v.require(worst_posterior < 1e-12, "posterior normalization max error " + fmt(worst_posterior) + " < 1e-12");
  report(2, "kernel algebra", v, clock.seconds(), 10);
}

// Criterion 3 --------------------------------------------------------------

void elbo_oracle() {
  Stopwatch clock;
  Verdict v;
  const NoiseSchedule s({0.3, 0.6});
  auto pi = [](int xt, std::size_t t) { return t == 1 ? (xt ? 0.8 : 0.3) : (xt ? 0.6 : 0.45); };
  MaskPredictor predictor = [&](std::span<const std::uint8_t> xt, std::size_t t, std::span<double> out) {
    out[0] = pi(xt[0], t);
  };
  auto reverse = [&](int a, int xt, std::size_t t) {
    const double ab = s.alpha_bar(t - 1);
    double w[2];
    for (int c = 0; c <= 1; ++c) {
      const double m = ab * pi(xt, t) + (1.0 - ab) / 2.0;
      w[c] = step(c, xt, s.beta(t)) * (c ? m : 1.0 - m);
    }
    return w[a] / (w[0] + w[1]);
  };
  for (int x0 = 0; x0 <= 1; ++x0) {
    double exact = 0.0;
    for (int x1 = 0; x1 <= 1; ++x1)
      for (int x2 = 0; x2 <= 1; ++x2) {
        const double q = step(x0, x1, 0.3) * step(x1, x2, 0.6);
        exact += q * std::log(q / (0.5 * reverse(x1, x2, 2) * reverse(x0, x1, 1)));
      }
    Rng rng(300 + x0);
    const std::vector<std::uint8_t> mask{static_cast<std::uint8_t>(x0)};
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double value = elbo_loss(s, predictor, mask, rng);
      sum += value;
      sum2 += value * value;
    }
    const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
    v.require(std::abs(mean - exact) < 3.0 * se, "x0=" + std::to_string(x0) + ": MC " + fmt(mean, 6) +
                                                     " vs enumerated " + fmt(exact, 6) + " (|diff| " +
                                                     fmt(std::abs(mean - exact) / se, 3) + " SE < 3)");
  }
  report(3, "ELBO oracle", v, clock.seconds(), 60);
}

// Criterion 4 --------------------------------------------------------------

void score_sampler_oracle() {
  Stopwatch clock;
  Verdict v;
  SdeSpec sde;
  sde.steps = 500;
  ScoreFn score = [&](std::span<const double> x, double t, std::span<double> out) {
    const double ab = sde.alpha_bar(t);
    out[0] = -(x[0] - std::sqrt(ab) * 2.0) / (ab * 0.25 + 1.0 - ab);
  };
  const std::vector<std::uint8_t> mask{1};
  Rng rng(404);
  const int n = 10000;
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(reverse_integrate(score, mask, sde, rng)[0]);
  double mean = 0.0, var = 0.0;
  for (double x : xs) mean += x / n;
  for (double x : xs) var += (x - mean) * (x - mean) / (n - 1);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf(xs[i], 2.0, 0.5);
    ks = std::max({ks, std::abs(f - double(i) / n), std::abs(double(i + 1) / n - f)});
  }
  v.require(std::abs(mean - 2.0) < 0.05, "mean " + fmt(mean) + " in 2 +/- 0.05");
  v.require(std::abs(var - 0.25) < 0.03, "variance " + fmt(var) + " in 0.25 +/- 0.03");
  v.require(ks < 0.02, "KS " + fmt(ks) + " < 0.02");
  report(4, "score-sampler oracle", v, clock.seconds(), 120);
}

// Criterion 8 --------------------------------------------------------------

std::size_t sds_oracle(const Recipe& a, const Recipe& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a.grams[i] > 0.0, pb = b.grams[i] > 0.0;
    if (pa != pb) ++d;
    else if (pa && std::max(a.grams[i], b.grams[i]) / std::min(a.grams[i], b.grams[i]) >= 2.0) ++d;
  }
  return d;
}

void sds_oracle_check() {
  Stopwatch clock;
  Verdict v;
  Rng rng(808);
  std::uniform_int_distribution<int> presence(0, 2), grams(1, 10);
  auto random_recipe = [&] {
    Recipe r(30);
    for (std::size_t i = 0; i < 30; ++i)
      if (presence(rng) == 0) {
        r.mask[i] = 1;
        r.grams[i] = 15.0 * grams(rng);
      }
    return r;
  };
  std::size_t mismatches = 0, asymmetric = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_recipe(), b = random_recipe();
    mismatches += sds(a, b) != sds_oracle(a, b);
    asymmetric += sds(a, b) != sds(b, a);
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " mismatches vs brute force over 10000 pairs");
  v.require(asymmetric == 0, std::to_string(asymmetric) + " asymmetric pairs");
  Recipe x(2), y(2), z(2);
  x.mask = y.mask = z.mask = {1, 0};
  x.grams = {100, 0};
  y.grams = {200, 0};
  z.grams = {199.99, 0};
  v.require(sds(x, y) == 1 && sds(y, x) == 1 && sds(x, z) == 0 && sds(x, x) == 0,
            "ratio exactly 2 counts, just below 2 does not");
  report(8, "SDS oracle", v, clock.seconds(), 10);
}

// Criterion 9 --------------------------------------------------------------

void scoring_fixtures() {
  Stopwatch clock;
  Verdict v;
  ImpactTable table;
  table.rows = {ImpactRow{2.0, 5.0, 100.0, 4.0}, ImpactRow{1.5, 0.3, 12.0, 0.7}};
  table.normalization = {2.0, 5.0, 100.0, 4.0};
  Recipe kg(2);
  kg.mask = {1, 0};
  kg.grams = {1000, 0};
  Recipe mix(2), half(2), part_a(2), part_b(2);
  mix.mask = half.mask = {1, 1};
  mix.grams = {340, 120};
  half.grams = {170, 60};
  part_a.mask = {1, 0};
  part_a.grams = {340, 0};
  part_b.mask = {0, 1};
  part_b.grams = {0, 120};
  const double e_mix = env_impact_score(mix, table);
  const double identity_err = std::abs(env_impact_score(kg, table) - 1.0);
  const double linear_err = std::abs(env_impact_score(half, table) - e_mix / 2.0);
  const double additive_err = std::abs(env_impact_score(part_a, table) + env_impact_score(part_b, table) - e_mix);
  v.require(std::max({identity_err, linear_err, additive_err}) < 1e-12,
            "env identities max error " + fmt(std::max({identity_err, linear_err, additive_err})) + " < 1e-12");

  const auto vocab = IngredientVocabulary::from_ids({"bacon", "beef_patty", "bun", "cheddar", "ketchup", "lettuce", "tomato"});
  const auto nutrients = load_nutrient_table(kDataDir / "fixtures/nutrients_desk.csv", vocab);
  const auto standards = HeiStandards::load(kDataDir / "hei2015_standards.csv");
  Recipe burger(vocab.size());
  for (const auto& [id, g] : std::vector<std::pair<std::string, double>>{
           {"beef_patty", 150}, {"bun", 80}, {"cheddar", 30}, {"lettuce", 20}, {"tomato", 40}, {"ketchup", 15}, {"bacon", 25}}) {
    burger.mask[vocab.require_index(id)] = 1;
    burger.grams[vocab.require_index(id)] = g;
  }
  // Worksheet evaluation of the same recipe and composition table.
  const double worksheet = 39.36926562467964;
  const double hei = hei_score(burger, nutrients, standards).total;
  v.require(std::abs(hei - worksheet) <= 0.01, "HEI " + fmt(hei, 8) + " vs worksheet " + fmt(worksheet, 8));

  const PersonProfile teen{15, Sex::male, 180, 80, ActivityLevel::active};
  const double meal = energy_requirement(teen) / 3.0, factor = meal / 100.0;
  NutrientRow mid{};
  mid[kEnergyKcal] = 100;
  mid[kProteinG] = meal * 0.20 / 4.0 / factor;  // midpoint of 10-30%
  mid[kCarbohydrateG] = meal * 0.55 / 4.0 / factor;
  mid[kTotalFatG] = meal * 0.30 / 9.0 / factor;
  mid[kSodiumMg] = 1000.0 / 3.0 / factor;
  mid[kFreeSugarsG] = meal * 0.05 / 4.0 / factor;
  mid[kSaturatedFatG] = meal * 0.05 / 9.0 / factor;
  NutrientRow bad = mid;
  bad[kProteinG] *= 3.25;       // 65% > 2 x 30%
  bad[kCarbohydrateG] *= 0.35;  // 19% < 45% / 2
  bad[kTotalFatG] *= 2.5;       // 75% > 2 x 35%
  bad[kSodiumMg] *= 5.0;
  bad[kFreeSugarsG] *= 5.0;
  bad[kSaturatedFatG] *= 5.0;
  Recipe one(1);
  one.mask = {1};
  one.grams = {100};
  const double at_mid = personalized_score(one, teen, NutrientTable{{mid}});
  const double violated = personalized_score(one, teen, NutrientTable{{bad}});
  v.require(at_mid == 100.0, "midpoint score " + fmt(at_mid, 17));
  v.require(violated == 0.0, "2x violation score " + fmt(violated, 17));
  report(9, "scoring fixtures", v, clock.seconds(), 5);
}

// Desk pipeline ----------------------------------------------------------------

struct PipelineRun {
  bool ok = true;
  double seconds = 0.0;
  std::map<std::string, double> stage_seconds;
  std::string failure;
};

std::vector<std::vector<std::string>> pipeline_commands() {
  return {{"synth"},
          {"train-mask"},
          {"train-quantity"},
          {"sample"},
          {"rediscover"},
          {"discover"},
          {"select-sustainable"},
          {"select-nutritious"},
          {"personalize"},
          {"personalize", "--age", "70", "--sex", "female", "--height", "170", "--weight", "70", "--activity", "moderate"},
          {"validate"},
          {"landscape"}};
}

PipelineRun run_pipeline(const fs::path& run_dir) {
  PipelineRun result;
  Stopwatch total;
  for (const auto& command : pipeline_commands()) {
    std::vector<std::string> args{"--config", kDeskConfig.string(), "--run-dir", run_dir.string()};
    args.insert(args.end(), command.begin(), command.end());
    std::ostringstream out, err;
    Stopwatch clock;
    const int code = cli::run(args, out, err);
    result.stage_seconds[command.front()] += clock.seconds();
    if (code != 0) {
      result.ok = false;
      result.failure = command.front() + " exited " + std::to_string(code) + ": " + err.str();
      break;
    }
  }
  result.seconds = total.seconds();
  return result;
}

std::map<std::string, std::string> snapshot(const fs::path& run_dir) {
  std::map<std::string, std::string> files;
  for (const auto& sub : {"reports", "selections", "checkpoints", "samples"}) {
    if (!fs::exists(run_dir / sub)) continue;
    for (const auto& entry : fs::directory_iterator(run_dir / sub)) {
      std::ifstream in(entry.path(), std::ios::binary);
      files[fs::relative(entry.path(), run_dir).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
  }
  return files;
}

// Criterion 5 --------------------------------------------------------------

void fidelity(const fs::path& run_dir, const PipelineRun& first, const RunConfig& config) {
  Stopwatch clock;
  Verdict v;
  const auto mask_model = load_mask_model(run_dir / "checkpoints/mask.json");
  const auto corpus = load_corpus(run_dir / "corpus.jsonl", mask_model.vocabulary);
  const auto spec = SynthSpec::load(config.existing_path("paths.synth_spec"));
  const auto reference = masks_of(corpus.training());
  const auto batch = sample_masks(mask_model, 100000, stage_seed(config, Stage::validate), 1);
  const auto report_ = compare_distributions(batch.masks, reference, 10);
  v.require(report_.max_marginal_error < 0.02, "max marginal error " + fmt(report_.max_marginal_error) + " < 0.02");

  const auto sampled = pairwise_correlations(batch.masks);
  const auto observed = pairwise_correlations(reference);
  const std::size_t k = mask_model.ingredients();
  for (const auto& pair : spec.correlated_pairs) {
    const auto i = mask_model.vocabulary.require_index(pair.first), j = mask_model.vocabulary.require_index(pair.second);
    const double s = sampled[i * k + j], c = observed[i * k + j];
    v.require(std::abs(s - pair.correlation) <= 0.1 && std::abs(s - c) <= 0.1,
              pair.first + "/" + pair.second + " sampled " + fmt(s, 3) + " vs target " + fmt(pair.correlation, 3) +
                  " and corpus " + fmt(c, 3) + " (+/- 0.1)");
  }
  v.require(report_.length_tv < 0.1, "length TV " + fmt(report_.length_tv) + " < 0.1");
  const double train = first.stage_seconds.at("train-mask");
  const double sampling = clock.seconds();
  v.detail << "; train " << fmt(train, 3) << " s + sample 1e5 masks " << fmt(sampling, 3) << " s";
  report(5, "fidelity", v, train + sampling, 1800);
}

// Criterion 6 --------------------------------------------------------------

void quantity_recovery(const RunConfig& config) {
  Stopwatch clock;
  Verdict v;
  auto spec = SynthSpec::load(config.existing_path("paths.synth_spec"));
  const auto training = quantity_training_from(config);
  const auto sde = sde_from(config);
  const std::uint64_t seed = stage_seed(config, Stage::train_quantity);

  // Delta corpus: the planted recipe repeated.
  {
    Corpus delta;
    std::vector<std::string> ids;
    for (const auto& ing : spec.ingredients) ids.push_back(ing.id);
    delta.vocabulary = IngredientVocabulary::from_ids(ids);
    delta.recipes.assign(400, desk_recipe(delta.vocabulary, spec.planted.front()));
    delta.splits.assign(400, Split::train);
    assign_splits(delta, 0.1, seed);
    const auto model = train_quantity_model(delta, sde, training, seed);
    const double mae = quantity_mae(model, delta.validation(), derive_seed(seed, 1), 1);
    v.require(mae < 5.0, "delta-corpus MAE " + fmt(mae) + " g < 5 g");
  }

  // Log-normal corpus: the desk marginals without the planted recipe.
  {
    spec.planted.clear();
    spec.recipe_count = 5000;
    const auto corpus = synthesize_corpus(spec, stage_seed(config, Stage::synth));
    const auto model = train_quantity_model(corpus, sde, training, seed);
    const auto recipes = corpus.training();
    std::vector<std::vector<double>> logs(corpus.vocabulary.size());
    for (std::size_t r = 0; r < recipes.size(); ++r) {
      const auto sample = reverse_sample(model, recipes[r].mask, derive_seed(seed, 1000 + r));
      for (std::size_t i = 0; i < sample.size(); ++i)
        if (sample.mask[i]) logs[i].push_back(std::log(sample.grams[i]));
    }
    double worst_mean = 0.0, worst_sd = 0.0;
    std::string worst_mean_id, worst_sd_id;
    for (const auto& ing : spec.ingredients) {
      const auto& xs = logs[corpus.vocabulary.require_index(ing.id)];
      double m = 0.0, s = 0.0;
      for (double x : xs) m += x / xs.size();
      for (double x : xs) s += (x - m) * (x - m) / (xs.size() - 1);
      s = std::sqrt(s);
      if (std::abs(m - ing.log_mean) > worst_mean) worst_mean = std::abs(m - ing.log_mean), worst_mean_id = ing.id;
      if (std::abs(s - ing.log_sd) > worst_sd) worst_sd = std::abs(s - ing.log_sd), worst_sd_id = ing.id;
    }
    v.require(worst_mean <= 0.1, "max |log-mean error| " + fmt(worst_mean) + " (" + worst_mean_id + ") <= 0.1");
    v.require(worst_sd <= 0.1, "max |log-sd error| " + fmt(worst_sd) + " (" + worst_sd_id + ") <= 0.1");
  }
  report(6, "quantity recovery", v, clock.seconds(), 600);
}

// Criterion 7 --------------------------------------------------------------

void rediscovery(const fs::path& run_dir, const RunConfig& config) {
  Stopwatch clock;
  Verdict v;
  const auto mask_model = load_mask_model(run_dir / "checkpoints/mask.json");
  const auto quantity_model = load_quantity_model(run_dir / "checkpoints/quantity.json");
  const auto spec = SynthSpec::load(config.existing_path("paths.synth_spec"));
  const auto reference = desk_recipe(mask_model.vocabulary, spec.planted.front());
  const int trials = 50;
  int found = 0;
  std::size_t total_draws = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto result = rediscover(mask_model, quantity_model, reference, 200,
                                   derive_seed(stage_seed(config, Stage::rediscover), 1000 + trial), 1);
    if (result.index && sds(*result.sample, reference) == 0) ++found;
    total_draws += result.draws;
  }
  const double rate = static_cast<double>(found) / trials;
  v.require(rate > 0.99, "success rate " + fmt(rate) + " (" + std::to_string(found) + "/50) > 0.99");
  v.detail << "; mean draws " << fmt(static_cast<double>(total_draws) / trials, 3);
  report(7, "rediscovery", v, clock.seconds(), 300);
}

}  // namespace

int main() {
  std::cout << "acceptance suite (desk config: " << kDeskConfig.string() << ")" << std::endl;
  gradient_correctness();
  kernel_algebra();
  elbo_oracle();
  score_sampler_oracle();
  sds_oracle_check();
  scoring_fixtures();

  RunConfig config;
  config.merge_file(kDeskConfig);
  const fs::path run_dir = fs::temp_directory_path() / ("recipeforge_acceptance_" + config.hash());
  fs::remove_all(run_dir);
  const auto first = run_pipeline(run_dir);
  std::cout << "desk pipeline: " << (first.ok ? "completed" : "FAILED") << " in " << fmt(first.seconds, 4) << " s";
  for (const auto& [stage, seconds] : first.stage_seconds) std::cout << "  " << stage << "=" << fmt(seconds, 3) << "s";
  std::cout << std::endl;

  if (first.ok) {
    fidelity(run_dir, first, config);
    quantity_recovery(config);
    rediscovery(run_dir, config);
  } else {
    std::cout << "pipeline failure: " << first.failure;
    for (int c : {5, 6, 7}) {
      std::cout << "criterion " << c << ": FAIL  desk pipeline did not complete" << std::endl;
      ++failures;
    }
  }

  {
    Verdict v;
    const auto before = snapshot(run_dir);
    const auto second = run_pipeline(run_dir);
    const auto after = snapshot(run_dir);
    v.require(first.ok && second.ok, "both pipeline runs exit 0");
    std::size_t differing = 0;
    for (const auto& [name, bytes] : before) {
      auto it = after.find(name);
      differing += it == after.end() || it->second != bytes;
    }
    v.require(!before.empty() && differing == 0 && before.size() == after.size(),
              std::to_string(before.size()) + " output files compared, " + std::to_string(differing) + " differ");
    v.detail << "; first run " << fmt(first.seconds, 4) << " s, rerun " << fmt(second.seconds, 4) << " s";
    report(10, "determinism", v, second.seconds, 2.0 * first.seconds);
  }
  fs::remove_all(run_dir);

  std::cout << (failures == 0 ? "all acceptance criteria PASS" : std::to_string(failures) + " criteria FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
