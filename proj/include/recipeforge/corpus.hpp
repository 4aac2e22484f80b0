#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace recipeforge {

struct VocabEntry {
  std::string id;
  std::string name;

  bool operator==(const VocabEntry&) const = default;
};

/// Ordered ingredient vocabulary. The index of an id is its rank in
/// lexicographic order of the id set, so vectorization needs no registry.
class IngredientVocabulary {
 public:
  IngredientVocabulary() = default;
  /// Sorts by id. Throws DataError on duplicate or invalid ids, or when empty.
  explicit IngredientVocabulary(std::vector<VocabEntry> entries);

  /// Deduplicates and sorts; display names default to the id.
  static IngredientVocabulary from_ids(std::vector<std::string> ids);

  std::size_t size() const { return entries_.size(); }
  const std::vector<VocabEntry>& entries() const { return entries_; }
  const std::string& id(std::size_t index) const { return entries_.at(index).id; }
  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Like index_of but throws DataError for unknown ids.
  std::size_t require_index(std::string_view id) const;

  nlohmann::json to_json() const;
  static IngredientVocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static IngredientVocabulary load(const std::filesystem::path& path);

  bool operator==(const IngredientVocabulary&) const = default;

 private:
  std::vector<VocabEntry> entries_;
};

/// Binary ingredient mask plus per-ingredient grams over a vocabulary of size K.
/// Valid when grams[i] > 0 exactly where mask[i] == 1.
struct Recipe {
  std::vector<std::uint8_t> mask;
  std::vector<double> grams;

  Recipe() = default;
  explicit Recipe(std::size_t k) : mask(k, 0), grams(k, 0.0) {}

  std::size_t size() const { return mask.size(); }
  std::size_t ingredient_count() const;
  double total_mass() const;
  /// All-zero mask. Representable, but never used for training.
  bool is_degenerate() const { return ingredient_count() == 0; }
  bool contains(std::size_t index) const { return mask.at(index) != 0; }

  bool operator==(const Recipe&) const = default;
};

/// Throws DataError naming the first violated invariant.
void validate_recipe(const Recipe& recipe);

enum class Split : std::uint8_t { train, validation };

struct Corpus {
  IngredientVocabulary vocabulary;
  std::vector<Recipe> recipes;
  std::vector<Split> splits;

  std::size_t size() const { return recipes.size(); }
  std::vector<Recipe> select(Split split) const;
  std::vector<Recipe> training() const { return select(Split::train); }
  std::vector<Recipe> validation() const { return select(Split::validation); }
};

struct LoadOptions {
  /// Accept `"grams": null` for present ingredients (mask-only sample files).
  bool allow_pending_weights = false;
  /// Accept records with no ingredients.
  bool allow_degenerate = false;
};

/// Reads the JSON-lines corpus format. When `vocabulary` is empty the
/// vocabulary is built from the ids in the file. Header records of the form
/// {"meta": {...}} are skipped.
Corpus load_corpus(const std::filesystem::path& path,
                   const std::optional<IngredientVocabulary>& vocabulary = std::nullopt,
                   const LoadOptions& options = {});

/// Parses a single recipe object `{"ingredients":[...]}`.
Recipe parse_recipe(const nlohmann::json& record, const IngredientVocabulary& vocabulary,
                    const LoadOptions& options = {});

nlohmann::json recipe_to_json(const Recipe& recipe, const IngredientVocabulary& vocabulary,
                              bool weights_pending = false);

/// Writes one JSON object per line. Split tags are emitted for validation rows only.
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
std::string corpus_to_jsonl(const Corpus& corpus);

IngredientVocabulary build_vocabulary(const std::filesystem::path& corpus_file);

/// Deterministic train/validation assignment.
void assign_splits(Corpus& corpus, double validation_fraction, std::uint64_t seed);

struct RecipeVectors {
  std::vector<double> mask;
  std::vector<double> weights;
};

RecipeVectors recipe_to_vectors(const Recipe& recipe);
/// Weights are zeroed where mask == 0. Throws DataError where mask == 1 and
/// the weight is not positive.
Recipe vectors_to_recipe(std::span<const double> mask, std::span<const double> weights,
                         const IngredientVocabulary& vocabulary);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct SynthIngredient {
  std::string id;
  double inclusion = 0.5;  // marginal inclusion probability
  double log_mean = 4.0;   // log-grams location
  double log_sd = 0.3;     // log-grams scale, > 0
};

/// Target phi (Pearson over mask bits) correlation between two ingredients.
struct CorrelatedPair {
  std::string first;
  std::string second;
  double correlation = 0.0;
};

struct PlantedRecipe {
  std::vector<std::pair<std::string, double>> ingredients;  // (id, grams)
  double frequency = 0.0;
};

/// Generator parameters. Marginals and correlations describe the non-planted
/// portion of the corpus; each recipe is a planted copy with the planted
/// frequency, otherwise drawn from a Gaussian copula.
struct SynthSpec {
  std::vector<SynthIngredient> ingredients;
  std::vector<CorrelatedPair> correlated_pairs;
  std::vector<PlantedRecipe> planted;
  std::size_t recipe_count = 0;
  double validation_fraction = 0.0;

  static SynthSpec from_json(const nlohmann::json& j);
  static SynthSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Bivariate standard normal CDF P(Z1 <= a, Z2 <= b) with correlation r.
double bivariate_normal_cdf(double a, double b, double r);

/// Phi coefficient of two threshold indicators of a Gaussian pair with
/// latent correlation r and marginals p1, p2.
double threshold_phi(double p1, double p2, double latent_r);

/// Inverts threshold_phi over latent correlation. Throws DataError when the
/// requested phi is outside the attainable range for the marginals.
double latent_correlation_for_phi(double p1, double p2, double phi);

Corpus synthesize_corpus(const SynthSpec& spec, std::uint64_t seed);

}  // namespace recipeforge
