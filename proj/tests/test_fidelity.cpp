#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "recipeforge/common.hpp"
#include "recipeforge/fidelity.hpp"

using namespace recipeforge;

namespace {

std::vector<Mask> random_masks(std::size_t n, std::size_t k, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution bit(p);
  std::vector<Mask> out(n, Mask(k));
  for (auto& m : out)
    for (auto& b : m) b = bit(rng);
  return out;
}

Corpus delta_corpus(std::size_t copies) {
  Corpus c;
  c.vocabulary = IngredientVocabulary::from_ids({"a", "b", "c", "d"});
  Recipe r(4);
  r.mask = {1, 1, 0, 1};
  r.grams = {150, 80, 0, 20};
  for (std::size_t i = 0; i < copies; ++i) {
    c.recipes.push_back(r);
    c.splits.push_back(i % 8 == 0 ? Split::validation : Split::train);
  }
  return c;
}

QuantityTrainingConfig small_training(std::size_t iterations) {
  QuantityTrainingConfig config;
  config.iterations = iterations;
  config.batch_size = 32;
  config.hidden_width = 32;
  config.depth = 2;
  config.adam.learning_rate = 0.003;
  config.final_lr_fraction = 0.05;
  return config;
}

}  // namespace

TEST_CASE("marginal error: identity, extremes, symmetry") {
  const auto a = random_masks(200, 5, 0.4, 1);
  const auto b = random_masks(300, 5, 0.6, 2);
  CHECK(marginal_error(a, a) == 0.0);
  CHECK(marginal_error(a, b) == marginal_error(b, a));
  const std::vector<Mask> always(10, Mask{1, 0}), never(7, Mask{0, 0});
  CHECK(marginal_error(always, never) == 1.0);
  const auto freq = inclusion_frequencies(always);
  CHECK(freq == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(inclusion_frequencies(std::vector<Mask>{}), DataError);
  CHECK_THROWS_AS(marginal_error(always, std::vector<Mask>(3, Mask{1, 0, 1})), std::invalid_argument);
}

TEST_CASE("pairwise correlations: co-present, exclusive, independent, zero variance") {
  std::vector<Mask> masks;
  for (int i = 0; i < 40; ++i) masks.push_back(i % 2 ? Mask{1, 1, 0, 1, 1} : Mask{0, 0, 1, 1, i % 4 == 0});
  const auto c = pairwise_correlations(masks);
  const std::size_t k = 5;
  CHECK(c[0 * k + 1] == doctest::Approx(1.0));
  CHECK(c[0 * k + 2] == doctest::Approx(-1.0));
  CHECK(c[0 * k + 3] == 0.0);  // column 3 is constant
  CHECK(c[3 * k + 3] == 0.0);
  CHECK(c[0 * k + 0] == doctest::Approx(1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(c[i * k + j] == c[j * k + i]);
      CHECK(std::abs(c[i * k + j]) <= 1.0 + 1e-12);
    }

  const auto independent = random_masks(10000, 2, 0.3, 9);
  CHECK(std::abs(pairwise_correlations(independent)[1]) < 0.05);

  auto shuffled = masks;
  Rng rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(pairwise_correlations(shuffled) == pairwise_correlations(masks));
  CHECK_THROWS_AS(pairwise_correlations(std::vector<Mask>{Mask{1}}), DataError);
}

TEST_CASE("length distance: identity, disjoint supports, symmetry") {
  const auto a = random_masks(500, 6, 0.5, 3);
  const auto b = random_masks(400, 6, 0.2, 4);
  CHECK(length_distance(a, a) == 0.0);
  CHECK(length_distance(a, b) == doctest::Approx(length_distance(b, a)));
  const std::vector<Mask> short_ones(5, Mask{1, 0, 0}), long_ones(3, Mask{1, 1, 1});
  CHECK(length_distance(short_ones, long_ones) == doctest::Approx(1.0));
  const auto h = length_histogram(short_ones, 3);
  CHECK(h == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("compare_distributions self-test and pair selection") {
  std::vector<Mask> masks;
  Rng rng(7);
  std::bernoulli_distribution coin(0.5), rare(0.1);
  for (int i = 0; i < 2000; ++i) {
    const std::uint8_t x = coin(rng);
    masks.push_back(Mask{x, x, static_cast<std::uint8_t>(!x), rare(rng), coin(rng)});
  }
  const auto self = compare_distributions(masks, masks, 3);
  CHECK(self.max_marginal_error == 0.0);
  CHECK(self.length_tv == 0.0);
  CHECK(self.max_pair_difference() == 0.0);
  REQUIRE(self.top_pairs.size() == 3);
  for (const auto& p : self.top_pairs) CHECK(std::abs(p.reference) == doctest::Approx(1.0));
  CHECK(self.sample_count == 2000);

  const auto other = random_masks(2000, 5, 0.5, 8);
  const auto diff = compare_distributions(other, masks, 1);
  REQUIRE(diff.top_pairs.size() == 1);
  CHECK(diff.max_pair_difference() == doctest::Approx(std::abs(diff.top_pairs[0].difference)));
  CHECK(diff.max_pair_difference() > 0.9);
}

TEST_CASE("quantity MAE: delta-trained model beats an untrained one") {
  const auto corpus = delta_corpus(64);
  const auto trained = train_quantity_model(corpus, SdeSpec{}, small_training(2000), 3);
  const auto held_out = corpus.validation();
  const double good = quantity_mae(trained, held_out, 5, 1);
  CHECK(good < 5.0);
  CHECK(quantity_mae(trained, held_out, 5, 3) == good);

  const auto untrained = make_quantity_model(corpus.vocabulary, SdeSpec{}, trained.codec, 32, 2, 99);
  auto wide = untrained;
  wide.codec.log_sd.assign(4, 1.0);  // an untrained net with unit log spread
  const double bad = quantity_mae(wide, held_out, 5, 1);
  CAPTURE(good);
  CAPTURE(bad);
  CHECK(bad > 10.0 * good);
  CHECK_THROWS_AS(quantity_mae(trained, std::vector<Recipe>{}, 1, 1), DataError);
}

TEST_CASE("fidelity report is deterministic and serializes") {
  const auto corpus = delta_corpus(32);
  MaskTrainingConfig mc;
  mc.iterations = 200;
  mc.batch_size = 16;
  mc.hidden_width = 16;
  mc.depth = 2;
  const auto mask_model = train_mask_model(corpus, NoiseSchedule::linear(20, 0.05, 0.5), mc, 1);
  const auto q = train_quantity_model(corpus, SdeSpec{}, small_training(100), 2);
  const auto r1 = fidelity_report(mask_model, q, corpus, 300, 4, 1, 3);
  const auto r2 = fidelity_report(mask_model, q, corpus, 300, 4, 2, 3);
  CHECK(fidelity_report_to_json(r1).dump() == fidelity_report_to_json(r2).dump());
  CHECK(r1.sample_count == 300);
  CHECK(r1.reference_count == corpus.training().size());
  CHECK(r1.held_out_count == corpus.validation().size());
  CHECK(r1.quantity_mae.has_value());
  const auto m = marginals_csv(r1, corpus.vocabulary);
  CHECK(std::count(m.begin(), m.end(), '\n') == 5);
  const auto lengths = lengths_csv(r1);
  CHECK(std::count(lengths.begin(), lengths.end(), '\n') >= 2);
  const auto pairs = pairs_csv(r1, corpus.vocabulary);
  CHECK(std::count(pairs.begin(), pairs.end(), '\n') == 4);
}
