#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recipeforge/corpus.hpp"

namespace recipeforge {

// ---------------------------------------------------------------------------
// Substantial difference score and grouping

/// Number of ingredients present in exactly one recipe, plus shared
/// ingredients whose quantities differ by a factor of two or more.
/// Throws std::invalid_argument if the recipes use different vocabularies.
std::size_t sds(const Recipe& a, const Recipe& b);

/// sds with early exit: returns any value > `limit` as soon as it is exceeded.
std::size_t sds_bounded(const Recipe& a, const Recipe& b, std::size_t limit);

struct RecipeGroup {
  Recipe representative;
  std::size_t count = 0;
  std::size_t founder = 0;  // input index of the representative
  std::vector<std::size_t> members;
};

/// Greedy leader clustering in input order: each sample joins the first group
/// whose representative is at SDS 0, otherwise it founds a new group. Sorted
/// by count descending, ties by founder index.
std::vector<RecipeGroup> group_by_sds(std::span<const Recipe> samples);

/// count / total.
double popularity_score(std::size_t count, std::size_t total);

// ---------------------------------------------------------------------------
// Environmental impact

enum ImpactMetric : std::size_t { kLandUse = 0, kEutrophication, kWaterUse, kGreenhouseGas, kImpactMetricCount };

/// Per-kg impacts: land m2, eutrophication g PO4-eq, scarcity-weighted water L, GHG kg CO2-eq.
using ImpactRow = std::array<double, kImpactMetricCount>;

struct ImpactTable {
  std::vector<std::optional<ImpactRow>> rows;  // by vocabulary index
  ImpactRow normalization{};                   // one constant per metric, > 0

  /// Median per-kg value of each metric over the given rows.
  static ImpactRow median_normalization(std::span<const ImpactRow> rows);
};

/// CSV columns: ingredient_id, land_m2_per_kg, eutro_gPO4eq_per_kg, water_L_per_kg,
/// ghg_kgCO2eq_per_kg. Rows for ids outside the vocabulary are used for the
/// default normalization but otherwise ignored. The optional sidecar JSON
/// overrides normalization: {"land_m2_per_kg": .., "eutro_gPO4eq_per_kg": .., ...}.
ImpactTable load_impact_table(const std::filesystem::path& csv, const IngredientVocabulary& vocabulary,
                              const std::optional<std::filesystem::path>& normalization_json = std::nullopt);

/// Mean over the four metrics of sum_i (grams_i / 1000) impact_i / normalization.
double env_impact_score(const Recipe& recipe, const ImpactTable& table);

// ---------------------------------------------------------------------------
// Nutrients

enum Nutrient : std::size_t {
  kEnergyKcal = 0,
  kTotalFruit,           // cup eq
  kWholeFruit,           // cup eq
  kTotalVegetables,      // cup eq
  kGreensAndBeans,       // cup eq
  kWholeGrains,          // oz eq
  kDairy,                // cup eq
  kTotalProteinFoods,    // oz eq
  kSeafoodPlantProteins, // oz eq
  kRefinedGrains,        // oz eq
  kSodiumMg,
  kAddedSugarsG,
  kSaturatedFatG,
  kUnsaturatedFatG,      // mono + poly
  kProteinG,
  kCarbohydrateG,
  kTotalFatG,
  kFreeSugarsG,
  kNutrientCount
};

/// CSV column name for each nutrient, in enum order.
const std::array<std::string, kNutrientCount>& nutrient_columns();

using NutrientRow = std::array<double, kNutrientCount>;  // per 100 g

struct NutrientTable {
  std::vector<std::optional<NutrientRow>> rows;  // by vocabulary index
};

NutrientTable load_nutrient_table(const std::filesystem::path& csv, const IngredientVocabulary& vocabulary);

/// Absolute nutrient amounts in the recipe. Throws DataError for present
/// ingredients missing from the table.
NutrientRow nutrient_totals(const Recipe& recipe, const NutrientTable& table);

// ---------------------------------------------------------------------------
// Healthy eating index

/// Linear component curve: 0 points at `zero_at`, max points at `full_at`.
/// Adequacy components have zero_at < full_at, moderation components the reverse.
struct HeiComponentStandard {
  std::string component;
  double max_points = 0.0;
  double zero_at = 0.0;
  double full_at = 0.0;
};

struct HeiStandards {
  std::vector<HeiComponentStandard> components;

  /// CSV columns: component, kind, max_points, zero_at, full_at.
  static HeiStandards load(const std::filesystem::path& path);
};

struct HEIResult {
  std::vector<std::string> names;
  std::vector<double> components;
  double total = 0.0;
};

/// Density of one HEI component for a recipe (per 1000 kcal, ratio, or % energy).
double hei_component_density(const std::string& component, const NutrientRow& serving);

/// Scales the recipe to a 500 kcal serving and applies the component curves.
/// Throws DataError for zero-energy recipes.
HEIResult hei_score(const Recipe& recipe, const NutrientTable& table, const HeiStandards& standards);

// ---------------------------------------------------------------------------
// Personalization

enum class Sex { male, female };
enum class ActivityLevel { sedentary, moderate, active, very_active };

Sex parse_sex(const std::string& text);
ActivityLevel parse_activity(const std::string& text);
std::string to_string(Sex sex);
std::string to_string(ActivityLevel level);

struct PersonProfile {
  double age_years = 30.0;
  Sex sex = Sex::female;
  double height_cm = 165.0;
  double weight_kg = 65.0;
  ActivityLevel activity = ActivityLevel::sedentary;

  void validate() const;
};

/// Estimated energy requirement (kcal/day) from the DRI equations. "moderate"
/// uses the low-active coefficient. Throws std::invalid_argument below age 1.
double energy_requirement(const PersonProfile& profile);

struct PersonalizationConfig {
  double meal_fraction = 1.0 / 3.0;
  double sodium_limit_mg_per_day = 2000.0;
  double free_sugar_limit_pct = 10.0;
  double saturated_fat_limit_pct = 10.0;
};

struct NutrientTarget {
  std::string name;
  double value = 0.0;
  double lower = 0.0;  // 0 means no lower bound
  double upper = 0.0;
  double subscore = 0.0;
};

/// 100 inside [lower, upper]; above, linear to 0 at 2 * upper; below, linear
/// to 0 at lower / 2.
double range_subscore(double value, double lower, double upper);

/// Per-nutrient targets for the recipe scaled to meal_fraction of daily energy.
std::vector<NutrientTarget> personalized_targets(const Recipe& recipe, const PersonProfile& profile,
                                                 const NutrientTable& table,
                                                 const PersonalizationConfig& config = {});

/// Mean subscore over protein, carbohydrate, fat, sodium, free sugars, saturated fat.
double personalized_score(const Recipe& recipe, const PersonProfile& profile, const NutrientTable& table,
                          const PersonalizationConfig& config = {});

}  // namespace recipeforge
