#include "recipeforge/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "recipeforge/common.hpp"
#include "recipeforge/csv.hpp"

namespace recipeforge {

// ---------------------------------------------------------------------------
// SDS

std::size_t sds_bounded(const Recipe& a, const Recipe& b, std::size_t limit) {
  if (a.size() != b.size()) throw std::invalid_argument("recipes use different vocabularies");
  std::size_t score = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a.mask[i] != 0, in_b = b.mask[i] != 0;
    if (in_a != in_b) {
      ++score;
    } else if (in_a) {
      const double hi = std::max(a.grams[i], b.grams[i]);
      const double lo = std::min(a.grams[i], b.grams[i]);
      if (hi >= 2.0 * lo) ++score;
    }
    if (score > limit) return score;
  }
  return score;
}

std::size_t sds(const Recipe& a, const Recipe& b) { return sds_bounded(a, b, a.size()); }

std::vector<RecipeGroup> group_by_sds(std::span<const Recipe> samples) {
  std::vector<RecipeGroup> groups;
  // SDS 0 implies identical masks, so candidate leaders are bucketed by mask.
  std::unordered_map<std::string, std::vector<std::size_t>> by_mask;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& r = samples[n];
    std::string key(reinterpret_cast<const char*>(r.mask.data()), r.mask.size());
    auto& bucket = by_mask[key];
    bool joined = false;
    for (std::size_t g : bucket) {
      if (sds_bounded(groups[g].representative, r, 0) == 0) {
        ++groups[g].count;
        groups[g].members.push_back(n);
        joined = true;
        break;
      }
    }
    if (!joined) {
      bucket.push_back(groups.size());
      groups.push_back(RecipeGroup{r, 1, n, {n}});
    }
  }
  std::stable_sort(groups.begin(), groups.end(), [](const RecipeGroup& x, const RecipeGroup& y) {
    return x.count > y.count;
  });
  return groups;
}

double popularity_score(std::size_t count, std::size_t total) {
  if (count == 0 || total < count) throw std::invalid_argument("popularity needs 1 <= count <= total");
  return static_cast<double>(count) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Environmental impact

namespace {

const std::array<std::string, kImpactMetricCount> kImpactColumns = {
    "land_m2_per_kg", "eutro_gPO4eq_per_kg", "water_L_per_kg", "ghg_kgCO2eq_per_kg"};

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ImpactRow ImpactTable::median_normalization(std::span<const ImpactRow> rows) {
  if (rows.empty()) throw DataError("impact table has no rows");
  ImpactRow out{};
  for (std::size_t m = 0; m < kImpactMetricCount; ++m) {
    std::vector<double> column;
    for (const auto& r : rows) column.push_back(r[m]);
    out[m] = median(std::move(column));
  }
  return out;
}

ImpactTable load_impact_table(const std::filesystem::path& csv, const IngredientVocabulary& vocabulary,
                              const std::optional<std::filesystem::path>& normalization_json) {
  const auto table = read_csv(csv);
  const std::size_t id_col = table.column("ingredient_id");
  std::array<std::size_t, kImpactMetricCount> cols{};
  for (std::size_t m = 0; m < kImpactMetricCount; ++m) cols[m] = table.column(kImpactColumns[m]);

  ImpactTable out;
  out.rows.assign(vocabulary.size(), std::nullopt);
  std::vector<ImpactRow> all;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    ImpactRow row{};
    for (std::size_t m = 0; m < kImpactMetricCount; ++m) {
      row[m] = table.number(r, cols[m]);
      if (row[m] < 0.0) throw DataError(csv.string() + ": negative impact on row " + std::to_string(r + 2));
    }
    all.push_back(row);
    if (auto index = vocabulary.index_of(table.rows[r][id_col])) {
      if (out.rows[*index]) throw DataError(csv.string() + ": duplicate row for '" + table.rows[r][id_col] + "'");
      out.rows[*index] = row;
    }
  }
  out.normalization = ImpactTable::median_normalization(all);
  if (normalization_json) {
    std::ifstream in(*normalization_json);
    if (!in) throw DataError("cannot open " + normalization_json->string());
    try {
      const auto j = nlohmann::json::parse(in);
      for (std::size_t m = 0; m < kImpactMetricCount; ++m)
        if (j.contains(kImpactColumns[m])) out.normalization[m] = j[kImpactColumns[m]].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(normalization_json->string() + ": " + e.what());
    }
  }
  for (std::size_t m = 0; m < kImpactMetricCount; ++m)
    if (!(out.normalization[m] > 0.0))
      throw DataError("normalization constant for " + kImpactColumns[m] + " must be > 0");
  return out;
}

double env_impact_score(const Recipe& recipe, const ImpactTable& table) {
  if (recipe.size() != table.rows.size()) throw std::invalid_argument("recipe length does not match impact table");
  if (!(recipe.total_mass() > 0.0)) throw DataError("environmental score needs a recipe with positive mass");
  ImpactRow totals{};
  for (std::size_t i = 0; i < recipe.size(); ++i) {
    if (!recipe.mask[i]) continue;
    if (!table.rows[i]) throw DataError("impact table has no row for ingredient " + std::to_string(i));
    const double kg = recipe.grams[i] / 1000.0;
    for (std::size_t m = 0; m < kImpactMetricCount; ++m) totals[m] += kg * (*table.rows[i])[m];
  }
  double score = 0.0;
  for (std::size_t m = 0; m < kImpactMetricCount; ++m) score += totals[m] / table.normalization[m];
  return score / static_cast<double>(kImpactMetricCount);
}

// ---------------------------------------------------------------------------
// Nutrients

const std::array<std::string, kNutrientCount>& nutrient_columns() {
  static const std::array<std::string, kNutrientCount> kColumns = {
      "kcal_per_100g",     "total_fruit_cup",      "whole_fruit_cup",  "total_vegetables_cup",
      "greens_beans_cup",  "whole_grains_oz",      "dairy_cup",        "total_protein_oz",
      "seafood_plant_protein_oz", "refined_grains_oz", "sodium_mg",    "added_sugars_g",
      "saturated_fat_g",   "unsaturated_fat_g",    "protein_g",        "carbohydrate_g",
      "total_fat_g",       "free_sugars_g"};
  return kColumns;
}

NutrientTable load_nutrient_table(const std::filesystem::path& csv, const IngredientVocabulary& vocabulary) {
  const auto table = read_csv(csv);
  const std::size_t id_col = table.column("ingredient_id");
  std::array<std::size_t, kNutrientCount> cols{};
  for (std::size_t n = 0; n < kNutrientCount; ++n) cols[n] = table.column(nutrient_columns()[n]);
  NutrientTable out;
  out.rows.assign(vocabulary.size(), std::nullopt);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto index = vocabulary.index_of(table.rows[r][id_col]);
    if (!index) continue;
    NutrientRow row{};
    for (std::size_t n = 0; n < kNutrientCount; ++n) {
      row[n] = table.number(r, cols[n]);
      if (row[n] < 0.0) throw DataError(csv.string() + ": negative nutrient value on row " + std::to_string(r + 2));
    }
    if (out.rows[*index]) throw DataError(csv.string() + ": duplicate row for '" + table.rows[r][id_col] + "'");
    out.rows[*index] = row;
  }
  return out;
}

NutrientRow nutrient_totals(const Recipe& recipe, const NutrientTable& table) {
  if (recipe.size() != table.rows.size()) throw std::invalid_argument("recipe length does not match nutrient table");
  NutrientRow totals{};
  for (std::size_t i = 0; i < recipe.size(); ++i) {
    if (!recipe.mask[i]) continue;
    if (!table.rows[i]) throw DataError("nutrient table has no row for ingredient " + std::to_string(i));
    const double portions = recipe.grams[i] / 100.0;
    for (std::size_t n = 0; n < kNutrientCount; ++n) totals[n] += portions * (*table.rows[i])[n];
  }
  return totals;
}

// ---------------------------------------------------------------------------
// HEI

HeiStandards HeiStandards::load(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const std::size_t name = table.column("component");
  const std::size_t max_points = table.column("max_points");
  const std::size_t zero_at = table.column("zero_at");
  const std::size_t full_at = table.column("full_at");
  HeiStandards out;
  double sum = 0.0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    HeiComponentStandard c{table.rows[r][name], table.number(r, max_points), table.number(r, zero_at),
                           table.number(r, full_at)};
    if (!(c.max_points > 0.0) || c.zero_at == c.full_at)
      throw DataError(path.string() + ": invalid standard for '" + c.component + "'");
    NutrientRow probe{};
    probe[kEnergyKcal] = 1000.0;
    hei_component_density(c.component, probe);  // rejects unknown component names
    sum += c.max_points;
    out.components.push_back(std::move(c));
  }
  if (out.components.empty()) throw DataError(path.string() + ": no HEI components");
  if (sum > 100.0 + 1e-9) throw DataError(path.string() + ": HEI component maxima sum above 100");
  return out;
}

double hei_component_density(const std::string& component, const NutrientRow& serving) {
  const double kcal = serving[kEnergyKcal];
  auto per_1000 = [&](Nutrient n) { return serving[n] / kcal * 1000.0; };
  auto pct_energy = [&](double kcal_part) { return kcal_part / kcal * 100.0; };
  if (component == "total_fruit") return per_1000(kTotalFruit);
  if (component == "whole_fruit") return per_1000(kWholeFruit);
  if (component == "total_vegetables") return per_1000(kTotalVegetables);
  if (component == "greens_and_beans") return per_1000(kGreensAndBeans);
  if (component == "whole_grains") return per_1000(kWholeGrains);
  if (component == "dairy") return per_1000(kDairy);
  if (component == "total_protein_foods") return per_1000(kTotalProteinFoods);
  if (component == "seafood_plant_proteins") return per_1000(kSeafoodPlantProteins);
  if (component == "refined_grains") return per_1000(kRefinedGrains);
  if (component == "sodium") return per_1000(kSodiumMg) / 1000.0;  // g per 1000 kcal
  if (component == "added_sugars") return pct_energy(4.0 * serving[kAddedSugarsG]);
  if (component == "saturated_fats") return pct_energy(9.0 * serving[kSaturatedFatG]);
  if (component == "fatty_acids") {
    // (MUFA + PUFA) / SFA; no saturated fat scores as the full ratio.
    if (serving[kSaturatedFatG] <= 0.0) return INFINITY;
    return serving[kUnsaturatedFatG] / serving[kSaturatedFatG];
  }
  throw DataError("unknown HEI component '" + component + "'");
}

HEIResult hei_score(const Recipe& recipe, const NutrientTable& table, const HeiStandards& standards) {
  NutrientRow totals = nutrient_totals(recipe, table);
  if (!(totals[kEnergyKcal] > 0.0)) throw DataError("HEI needs a recipe with positive energy");
  const double factor = 500.0 / totals[kEnergyKcal];
  for (auto& v : totals) v *= factor;

  HEIResult result;
  for (const auto& c : standards.components) {
    const double density = hei_component_density(c.component, totals);
    double fraction = (density - c.zero_at) / (c.full_at - c.zero_at);
    if (std::isinf(density)) fraction = (density > 0) == (c.full_at > c.zero_at) ? 1.0 : 0.0;
    const double points = c.max_points * std::clamp(fraction, 0.0, 1.0);
    result.names.push_back(c.component);
    result.components.push_back(points);
    result.total += points;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Personalization

Sex parse_sex(const std::string& text) {
  if (text == "male" || text == "m") return Sex::male;
  if (text == "female" || text == "f") return Sex::female;
  throw std::invalid_argument("sex must be 'male' or 'female'");
}

ActivityLevel parse_activity(const std::string& text) {
  if (text == "sedentary") return ActivityLevel::sedentary;
  if (text == "moderate" || text == "low_active") return ActivityLevel::moderate;
  if (text == "active") return ActivityLevel::active;
  if (text == "very_active") return ActivityLevel::very_active;
  throw std::invalid_argument("activity must be sedentary, moderate, active or very_active");
}

std::string to_string(Sex sex) { return sex == Sex::male ? "male" : "female"; }

std::string to_string(ActivityLevel level) {
  switch (level) {
    case ActivityLevel::sedentary: return "sedentary";
    case ActivityLevel::moderate: return "moderate";
    case ActivityLevel::active: return "active";
    case ActivityLevel::very_active: return "very_active";
  }
  return "unknown";
}

void PersonProfile::validate() const {
  if (!(age_years > 0.0) || !(height_cm > 0.0) || !(weight_kg > 0.0))
    throw std::invalid_argument("profile needs positive age, height and weight");
}

double energy_requirement(const PersonProfile& p) {
  p.validate();
  if (p.age_years < 1.0) throw std::invalid_argument("energy requirement is defined from age 1");
  const auto level = static_cast<std::size_t>(p.activity);
  const double height_m = p.height_cm / 100.0;
  const bool male = p.sex == Sex::male;
  if (p.age_years < 3.0) return 89.0 * p.weight_kg - 100.0 + 20.0;
  if (p.age_years < 19.0) {
    static constexpr std::array<double, 4> kBoys{1.00, 1.13, 1.26, 1.42};
    static constexpr std::array<double, 4> kGirls{1.00, 1.16, 1.31, 1.56};
    const double deposition = p.age_years < 9.0 ? 20.0 : 25.0;
    if (male)
      return 88.5 - 61.9 * p.age_years + kBoys[level] * (26.7 * p.weight_kg + 903.0 * height_m) + deposition;
    return 135.3 - 30.8 * p.age_years + kGirls[level] * (10.0 * p.weight_kg + 934.0 * height_m) + deposition;
  }
  static constexpr std::array<double, 4> kMen{1.00, 1.11, 1.25, 1.48};
  static constexpr std::array<double, 4> kWomen{1.00, 1.12, 1.27, 1.45};
  if (male) return 662.0 - 9.53 * p.age_years + kMen[level] * (15.91 * p.weight_kg + 539.6 * height_m);
  return 354.0 - 6.91 * p.age_years + kWomen[level] * (9.36 * p.weight_kg + 726.0 * height_m);
}

double range_subscore(double value, double lower, double upper) {
  if (!(upper > 0.0) || lower < 0.0 || lower > upper) throw std::invalid_argument("invalid target range");
  if (value > upper) return 100.0 * std::max(0.0, 2.0 - value / upper);
  if (lower > 0.0 && value < lower) return 100.0 * std::max(0.0, 2.0 * value / lower - 1.0);
  return 100.0;
}

std::vector<NutrientTarget> personalized_targets(const Recipe& recipe, const PersonProfile& profile,
                                                 const NutrientTable& table, const PersonalizationConfig& config) {
  if (!(config.meal_fraction > 0.0 && config.meal_fraction <= 1.0))
    throw std::invalid_argument("meal fraction must lie in (0, 1]");
  NutrientRow totals = nutrient_totals(recipe, table);
  if (!(totals[kEnergyKcal] > 0.0)) throw DataError("personalized score needs a recipe with positive energy");
  const double meal_kcal = energy_requirement(profile) * config.meal_fraction;
  const double factor = meal_kcal / totals[kEnergyKcal];
  for (auto& v : totals) v *= factor;
  auto pct = [&](double kcal) { return kcal / meal_kcal * 100.0; };

  // Acceptable macronutrient distribution ranges (% energy) by age band.
  struct Amdr { double protein_lo, protein_hi, fat_lo, fat_hi; };
  const Amdr amdr = profile.age_years < 4.0    ? Amdr{5, 20, 30, 40}
                    : profile.age_years < 19.0 ? Amdr{10, 30, 25, 35}
                                               : Amdr{10, 35, 20, 35};

  std::vector<NutrientTarget> targets = {
      {"protein_pct_energy", pct(4.0 * totals[kProteinG]), amdr.protein_lo, amdr.protein_hi, 0.0},
      {"carbohydrate_pct_energy", pct(4.0 * totals[kCarbohydrateG]), 45.0, 65.0, 0.0},
      {"fat_pct_energy", pct(9.0 * totals[kTotalFatG]), amdr.fat_lo, amdr.fat_hi, 0.0},
      {"sodium_mg", totals[kSodiumMg], 0.0, config.sodium_limit_mg_per_day * config.meal_fraction, 0.0},
      {"free_sugars_pct_energy", pct(4.0 * totals[kFreeSugarsG]), 0.0, config.free_sugar_limit_pct, 0.0},
      {"saturated_fat_pct_energy", pct(9.0 * totals[kSaturatedFatG]), 0.0, config.saturated_fat_limit_pct, 0.0},
  };
  for (auto& t : targets) t.subscore = range_subscore(t.value, t.lower, t.upper);
  return targets;
}

double personalized_score(const Recipe& recipe, const PersonProfile& profile, const NutrientTable& table,
                          const PersonalizationConfig& config) {
  const auto targets = personalized_targets(recipe, profile, table, config);
  double sum = 0.0;
  for (const auto& t : targets) sum += t.subscore;
  return sum / static_cast<double>(targets.size());
}

}  // namespace recipeforge
