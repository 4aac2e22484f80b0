#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recipeforge/corpus.hpp"
#include "recipeforge/mask_diffusion.hpp"
#include "recipeforge/quantity_diffusion.hpp"

namespace recipeforge {

using Mask = std::vector<std::uint8_t>;

std::vector<Mask> masks_of(std::span<const Recipe> recipes);

/// Per-ingredient inclusion frequency. Throws DataError on empty input.
std::vector<double> inclusion_frequencies(std::span<const Mask> masks);

/// max_i |freq_i(samples) - freq_i(reference)|.
double marginal_error(std::span<const Mask> samples, std::span<const Mask> reference);
double marginal_error(std::span<const Recipe> samples, std::span<const Recipe> reference);

/// K x K phi coefficients, row-major. Zero-variance columns correlate 0 with
/// everything, including themselves. Throws DataError for fewer than 2 rows.
std::vector<double> pairwise_correlations(std::span<const Mask> masks);
std::vector<double> pairwise_correlations(std::span<const Recipe> recipes);

/// Normalized histogram of ingredient counts over 0..max_length.
std::vector<double> length_histogram(std::span<const Mask> masks, std::size_t max_length);

/// Total-variation distance between ingredient-count histograms.
double length_distance(std::span<const Mask> samples, std::span<const Mask> reference);
double length_distance(std::span<const Recipe> samples, std::span<const Recipe> reference);

/// One weight sample per held-out recipe (seed derive_seed(seed, i)) on its
/// true mask; mean over recipes of the mean absolute gram error over present
/// ingredients. Throws DataError on an empty held-out set.
double quantity_mae(const QuantityScoreModel& model, std::span<const Recipe> held_out, std::uint64_t seed,
                    unsigned threads);

struct PairAgreement {
  std::size_t first = 0;
  std::size_t second = 0;
  double reference = 0.0;
  double samples = 0.0;
  double difference = 0.0;  // samples - reference
};

struct FidelityReport {
  double max_marginal_error = 0.0;
  std::optional<double> quantity_mae;  // absent without held-out recipes
  double length_tv = 0.0;
  std::vector<PairAgreement> top_pairs;
  std::size_t sample_count = 0;
  std::size_t reference_count = 0;
  std::size_t held_out_count = 0;
  std::size_t rejected_empty = 0;

  std::vector<double> reference_marginals;
  std::vector<double> sample_marginals;
  std::vector<double> reference_lengths;
  std::vector<double> sample_lengths;

  double max_pair_difference() const;
};

/// Marginal, correlation and length checks of `samples` against `reference`.
/// The `top_k` pairs with the largest |reference correlation| are reported.
FidelityReport compare_distributions(std::span<const Mask> samples, std::span<const Mask> reference,
                                     std::size_t top_k = 10);

/// Samples `count` masks (seed derivation as in sample_masks) and compares
/// them with the training split; quantity MAE runs on the validation split.
FidelityReport fidelity_report(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                               const Corpus& corpus, std::size_t count, std::uint64_t seed, unsigned threads,
                               std::size_t top_k = 10);

nlohmann::json fidelity_report_to_json(const FidelityReport& report);
std::string marginals_csv(const FidelityReport& report, const IngredientVocabulary& vocabulary);
std::string pairs_csv(const FidelityReport& report, const IngredientVocabulary& vocabulary);
std::string lengths_csv(const FidelityReport& report);

}  // namespace recipeforge
