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
#include "recipeforge/scoring.hpp"

namespace recipeforge {

/// FNV-1a of the serialized checkpoint.
std::string model_fingerprint(const MaskDiffusionModel& model);
std::string model_fingerprint(const QuantityScoreModel& model);

/// Throws DataError unless both models use the same vocabulary.
void check_model_pair(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model);

struct GenerationBatch {
  std::vector<Recipe> samples;
  std::uint64_t seed = 0;  // sample i was drawn from Rng(derive_seed(seed, i))
  std::string mask_fingerprint;
  std::string quantity_fingerprint;
  std::size_t rejected_empty = 0;
  std::string generated_at;  // UTC, ISO 8601; informational only

  std::uint64_t sample_seed(std::size_t i) const { return derive_seed(seed, i); }
};

/// Sample i: mask by ancestral sampling (empty masks redrawn), then weights by
/// reverse integration conditioned on that mask, all from one per-sample stream.
Recipe generate_one(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                    std::uint64_t sample_seed, std::size_t* rejected_empty = nullptr);

GenerationBatch generate_batch(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                               std::size_t count, std::uint64_t seed, unsigned threads);

/// Minimum SDS to a fixed reference set. Reference recipes are bucketed by
/// mask so buckets whose Hamming distance already reaches the best value are
/// skipped.
class NoveltyIndex {
 public:
  /// Throws DataError on an empty reference set.
  explicit NoveltyIndex(std::span<const Recipe> reference);

  std::size_t novelty(const Recipe& recipe) const;
  /// True when novelty(recipe) >= min_sds, with early exit.
  bool at_least(const Recipe& recipe, std::size_t min_sds) const;
  std::vector<std::size_t> novelty(std::span<const Recipe> recipes, unsigned threads) const;

  std::size_t reference_size() const { return size_; }

 private:
  std::size_t min_sds(const Recipe& recipe, std::size_t stop_below) const;

  struct Bucket {
    std::vector<std::uint64_t> bits;
    std::vector<Recipe> members;
  };
  std::vector<Bucket> buckets_;
  std::size_t ingredients_ = 0;
  std::size_t size_ = 0;
};

/// min over reference recipes of sds(recipe, reference recipe).
std::size_t novelty(const Recipe& recipe, std::span<const Recipe> reference);

struct RediscoveryResult {
  std::optional<std::size_t> index;  // first sample at SDS 0, if any
  std::size_t draws = 0;             // samples examined
  std::optional<Recipe> sample;
};

/// Streams samples (identical to generate_batch sample i) in chunks of
/// `chunk` and stops at the first with SDS 0 to the reference. Weights are
/// only integrated for samples whose mask equals the reference mask, since
/// any other mask already has SDS > 0.
RediscoveryResult rediscover(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                             const Recipe& reference, std::size_t budget, std::uint64_t seed, unsigned threads,
                             std::size_t chunk = 256);

/// Tables and references used to annotate selected recipes; null members are skipped.
struct ScoringContext {
  const ImpactTable* impact = nullptr;
  const NutrientTable* nutrients = nullptr;
  const HeiStandards* hei = nullptr;
  const NoveltyIndex* novelty = nullptr;
  std::optional<PersonProfile> profile;
  PersonalizationConfig personalization;
};

struct GroupScores {
  std::size_t founder = 0;  // batch index of the group representative
  std::size_t count = 0;
  double popularity = 0.0;  // count / batch size
  std::size_t ingredients = 0;
  std::optional<std::size_t> novelty;
  std::optional<double> env_score;
  std::optional<double> hei;
  std::optional<double> personalized;
};

GroupScores score_group(const RecipeGroup& group, std::size_t batch_size, const ScoringContext& context);

struct DiscoveryResult {
  std::string rule;
  nlohmann::json parameters = nlohmann::json::object();
  Recipe recipe;
  GroupScores scores;
  std::size_t batch_size = 0;
  std::size_t candidates = 0;       // samples passing the rule's filter
  std::vector<GroupScores> groups;  // all candidate groups, most repeated first
};

nlohmann::json discovery_result_to_json(const DiscoveryResult& result, const IngredientVocabulary& vocabulary);
/// One row per candidate group.
std::string group_table_csv(std::span<const GroupScores> groups);

/// Filters samples with novelty >= min_sds and returns the most repeated
/// group. Throws DataError when no sample passes.
DiscoveryResult discover_novel(std::span<const Recipe> batch, const NoveltyIndex& index, std::size_t min_sds,
                               const ScoringContext& context, unsigned threads);

/// Keeps samples scoring at or below the `fraction` quantile of environmental
/// impact (ties included), then those containing every required ingredient,
/// and returns the most repeated group.
DiscoveryResult select_sustainable(std::span<const Recipe> batch, const ImpactTable& table,
                                   std::span<const std::size_t> required, const ScoringContext& context,
                                   double fraction = 0.1);

/// Keeps the top `fraction` by HEI total (ties at the cutoff included) and
/// returns the most repeated group.
DiscoveryResult select_nutritious(std::span<const Recipe> batch, const NutrientTable& table,
                                  const HeiStandards& standards, double fraction, const ScoringContext& context);

/// Same pipeline ranked by personalized_score for `profile`.
DiscoveryResult select_personalized(std::span<const Recipe> batch, const PersonProfile& profile,
                                    const NutrientTable& table, double fraction, const ScoringContext& context);

/// One row per SDS group of the batch with popularity and every score the
/// context supports.
std::vector<GroupScores> landscape_map(std::span<const Recipe> batch, const ScoringContext& context);

}  // namespace recipeforge
