#include "recipeforge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "recipeforge/common.hpp"

namespace recipeforge {
namespace {

bool is_canonical_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

// Lower-snake-case: lowercase letters and digits, every other run -> '_'.
std::string canonical_id(std::string_view raw) {
  std::string out;
  bool pending_sep = false;
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

double grams_per_unit(const std::string& unit) {
  static const std::map<std::string, double> kUnits = {
      {"g", 1.0}, {"gram", 1.0}, {"grams", 1.0}, {"kg", 1000.0}, {"mg", 1e-3},
      {"oz", 28.349523125}, {"lb", 453.59237},
  };
  auto it = kUnits.find(unit);
  if (it == kUnits.end()) throw DataError("unsupported unit '" + unit + "'");
  return it->second;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::string line_context(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

// ---------------------------------------------------------------------------
// IngredientVocabulary

IngredientVocabulary::IngredientVocabulary(std::vector<VocabEntry> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw DataError("vocabulary is empty");
  std::sort(entries_.begin(), entries_.end(),
            [](const VocabEntry& a, const VocabEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!is_canonical_id(entries_[i].id))
      throw DataError("ingredient id '" + entries_[i].id + "' is not lower_snake_case");
    if (i > 0 && entries_[i].id == entries_[i - 1].id)
      throw DataError("duplicate ingredient id '" + entries_[i].id + "'");
    if (entries_[i].name.empty()) entries_[i].name = entries_[i].id;
  }
}

IngredientVocabulary IngredientVocabulary::from_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<VocabEntry> entries;
  entries.reserve(ids.size());
  for (auto& id : ids) entries.push_back({id, id});
  return IngredientVocabulary(std::move(entries));
}

std::optional<std::size_t> IngredientVocabulary::index_of(std::string_view id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const VocabEntry& e, std::string_view v) { return e.id < v; });
  if (it == entries_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

std::size_t IngredientVocabulary::require_index(std::string_view id) const {
  auto index = index_of(id);
  if (!index) throw DataError("unknown ingredient id '" + std::string(id) + "'");
  return *index;
}

nlohmann::json IngredientVocabulary::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries_) out.push_back({{"id", e.id}, {"name", e.name}});
  return out;
}

IngredientVocabulary IngredientVocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("vocabulary must be a JSON array");
  std::vector<VocabEntry> entries;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string())
      throw DataError("vocabulary entry needs a string 'id'");
    entries.push_back({item["id"].get<std::string>(), item.value("name", std::string{})});
  }
  return IngredientVocabulary(std::move(entries));
}

void IngredientVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

IngredientVocabulary IngredientVocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Recipe

std::size_t Recipe::ingredient_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double Recipe::total_mass() const {
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) total += grams[i];
  return total;
}

void validate_recipe(const Recipe& recipe) {
  if (recipe.mask.size() != recipe.grams.size())
    throw DataError("recipe mask and weight lengths differ");
  for (std::size_t i = 0; i < recipe.mask.size(); ++i) {
    const bool present = recipe.mask[i] != 0;
    if (recipe.mask[i] > 1) throw DataError("recipe mask is not binary");
    if (!std::isfinite(recipe.grams[i])) throw DataError("recipe weight is not finite");
    if (present && recipe.grams[i] <= 0.0)
      throw DataError("present ingredient " + std::to_string(i) + " has non-positive grams");
    if (!present && recipe.grams[i] != 0.0)
      throw DataError("absent ingredient " + std::to_string(i) + " has non-zero grams");
  }
}

std::vector<Recipe> Corpus::select(Split split) const {
  std::vector<Recipe> out;
  for (std::size_t i = 0; i < recipes.size(); ++i)
    if (splits.at(i) == split) out.push_back(recipes[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct RawIngredient {
  std::string id;
  std::optional<double> grams;
};

std::vector<RawIngredient> parse_ingredients(const nlohmann::json& record, bool allow_pending) {
  if (!record.is_object() || !record.contains("ingredients") || !record["ingredients"].is_array())
    throw DataError("record needs an 'ingredients' array");
  std::vector<RawIngredient> out;
  for (const auto& item : record["ingredients"]) {
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string())
      throw DataError("ingredient entry needs a string 'id'");
    RawIngredient raw{canonical_id(item["id"].get<std::string>()), std::nullopt};
    if (raw.id.empty()) throw DataError("ingredient id is empty after canonicalization");
    if (item.contains("grams")) {
      const auto& g = item["grams"];
      if (g.is_number()) {
        raw.grams = g.get<double>();
      } else if (!(g.is_null() && allow_pending)) {
        throw DataError("ingredient '" + raw.id + "' has non-numeric grams");
      }
    } else if (item.contains("amount") && item.contains("unit")) {
      if (!item["amount"].is_number() || !item["unit"].is_string())
        throw DataError("ingredient '" + raw.id + "' has malformed amount/unit");
      raw.grams = item["amount"].get<double>() * grams_per_unit(item["unit"].get<std::string>());
    } else if (!allow_pending) {
      throw DataError("ingredient '" + raw.id + "' has no grams");
    }
    if (raw.grams && (!std::isfinite(*raw.grams) || *raw.grams <= 0.0))
      throw DataError("ingredient '" + raw.id + "' has grams <= 0");
    out.push_back(std::move(raw));
  }
  return out;
}

Recipe build_recipe(const std::vector<RawIngredient>& raw, const IngredientVocabulary& vocabulary,
                    const LoadOptions& options) {
  Recipe recipe(vocabulary.size());
  for (const auto& item : raw) {
    const std::size_t index = vocabulary.require_index(item.id);
    recipe.mask[index] = 1;
    // Pending weights are carried as +1 g placeholders until quantities are sampled.
    recipe.grams[index] += item.grams.value_or(1.0);
  }
  if (recipe.is_degenerate() && !options.allow_degenerate)
    throw DataError("recipe has no ingredients");
  validate_recipe(recipe);
  return recipe;
}

}  // namespace

Recipe parse_recipe(const nlohmann::json& record, const IngredientVocabulary& vocabulary,
                    const LoadOptions& options) {
  return build_recipe(parse_ingredients(record, options.allow_pending_weights), vocabulary,
                      options);
}

Corpus load_corpus(const std::filesystem::path& path,
                   const std::optional<IngredientVocabulary>& vocabulary,
                   const LoadOptions& options) {
  auto in = open_input(path);
  std::vector<std::vector<RawIngredient>> records;
  std::vector<Split> splits;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto record = nlohmann::json::parse(line);
      if (record.is_object() && record.contains("meta") && !record.contains("ingredients")) continue;
      records.push_back(parse_ingredients(record, options.allow_pending_weights));
      const auto split = record.is_object() ? record.value("split", std::string("train"))
                                            : std::string("train");
      if (split != "train" && split != "validation")
        throw DataError("unknown split tag '" + split + "'");
      splits.push_back(split == "validation" ? Split::validation : Split::train);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(line_context(path, line_no) + e.what());
    } catch (const DataError& e) {
      throw DataError(line_context(path, line_no) + e.what());
    }
  }

  Corpus corpus;
  if (vocabulary) {
    corpus.vocabulary = *vocabulary;
  } else {
    std::vector<std::string> ids;
    for (const auto& rec : records)
      for (const auto& item : rec) ids.push_back(item.id);
    if (ids.empty()) throw DataError(path.string() + ": no ingredients found");
    corpus.vocabulary = IngredientVocabulary::from_ids(std::move(ids));
  }
  corpus.recipes.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      corpus.recipes.push_back(build_recipe(records[i], corpus.vocabulary, options));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  corpus.splits = std::move(splits);
  return corpus;
}

IngredientVocabulary build_vocabulary(const std::filesystem::path& corpus_file) {
  auto corpus = load_corpus(corpus_file, std::nullopt,
                            LoadOptions{.allow_pending_weights = true, .allow_degenerate = true});
  return corpus.vocabulary;
}

nlohmann::json recipe_to_json(const Recipe& recipe, const IngredientVocabulary& vocabulary,
                              bool weights_pending) {
  if (recipe.size() != vocabulary.size())
    throw std::invalid_argument("recipe length does not match vocabulary");
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < recipe.size(); ++i) {
    if (!recipe.mask[i]) continue;
    nlohmann::json grams = weights_pending ? nlohmann::json(nullptr) : nlohmann::json(recipe.grams[i]);
    items.push_back({{"id", vocabulary.id(i)}, {"grams", grams}});
  }
  return {{"ingredients", items}};
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::ostringstream out;
  for (std::size_t i = 0; i < corpus.recipes.size(); ++i) {
    auto record = recipe_to_json(corpus.recipes[i], corpus.vocabulary);
    if (i < corpus.splits.size() && corpus.splits[i] == Split::validation)
      record["split"] = "validation";
    out << record.dump() << '\n';
  }
  return out.str();
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << corpus_to_jsonl(corpus);
}

void assign_splits(Corpus& corpus, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation fraction must be in [0, 1)");
  Rng rng(derive_seed(seed, 0x5e11));
  corpus.splits.assign(corpus.recipes.size(), Split::train);
  for (auto& s : corpus.splits)
    if (uniform01(rng) < validation_fraction) s = Split::validation;
}

// ---------------------------------------------------------------------------
// Vectors

RecipeVectors recipe_to_vectors(const Recipe& recipe) {
  RecipeVectors out{std::vector<double>(recipe.size(), 0.0), std::vector<double>(recipe.size(), 0.0)};
  for (std::size_t i = 0; i < recipe.size(); ++i) {
    if (recipe.mask[i]) {
      out.mask[i] = 1.0;
      out.weights[i] = recipe.grams[i];
    }
  }
  return out;
}

Recipe vectors_to_recipe(std::span<const double> mask, std::span<const double> weights,
                         const IngredientVocabulary& vocabulary) {
  if (mask.size() != vocabulary.size() || weights.size() != vocabulary.size())
    throw std::invalid_argument("vector length does not match vocabulary");
  Recipe recipe(vocabulary.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0.0) continue;
    if (mask[i] != 1.0) throw DataError("mask entry is not binary");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw DataError("ingredient '" + vocabulary.id(i) + "' is present with non-positive weight");
    recipe.mask[i] = 1;
    recipe.grams[i] = weights[i];
  }
  return recipe;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  try {
    SynthSpec spec;
    for (const auto& item : j.at("ingredients")) {
      spec.ingredients.push_back({item.at("id").get<std::string>(), item.at("inclusion").get<double>(),
                                  item.at("log_mean").get<double>(), item.at("log_sd").get<double>()});
    }
    if (j.contains("correlated_pairs")) {
      for (const auto& item : j["correlated_pairs"]) {
        spec.correlated_pairs.push_back({item.at("first").get<std::string>(),
                                         item.at("second").get<std::string>(),
                                         item.at("correlation").get<double>()});
      }
    }
    if (j.contains("planted")) {
      for (const auto& item : j["planted"]) {
        PlantedRecipe planted;
        planted.frequency = item.at("frequency").get<double>();
        for (const auto& ing : item.at("ingredients"))
          planted.ingredients.emplace_back(ing.at("id").get<std::string>(), ing.at("grams").get<double>());
        spec.planted.push_back(std::move(planted));
      }
    }
    spec.recipe_count = j.at("recipe_count").get<std::size_t>();
    spec.validation_fraction = j.value("validation_fraction", 0.0);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
}

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::json ings = nlohmann::json::array();
  for (const auto& i : ingredients)
    ings.push_back({{"id", i.id}, {"inclusion", i.inclusion}, {"log_mean", i.log_mean}, {"log_sd", i.log_sd}});
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : correlated_pairs)
    pairs.push_back({{"first", p.first}, {"second", p.second}, {"correlation", p.correlation}});
  nlohmann::json planted_json = nlohmann::json::array();
  for (const auto& p : planted) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [id, g] : p.ingredients) items.push_back({{"id", id}, {"grams", g}});
    planted_json.push_back({{"ingredients", items}, {"frequency", p.frequency}});
  }
  return {{"ingredients", ings},
          {"correlated_pairs", pairs},
          {"planted", planted_json},
          {"recipe_count", recipe_count},
          {"validation_fraction", validation_fraction}};
}

double bivariate_normal_cdf(double a, double b, double r) {
  // P(Z1<=a, Z2<=b; r) = Phi(a) Phi(b) + integral_0^r phi2(a, b; rho) drho
  const boost::math::normal standard;
  const double independent = boost::math::cdf(standard, a) * boost::math::cdf(standard, b);
  if (r == 0.0) return independent;
  auto density = [a, b](double rho) {
    const double one_minus = 1.0 - rho * rho;
    return std::exp(-(a * a - 2.0 * rho * a * b + b * b) / (2.0 * one_minus)) /
           (2.0 * M_PI * std::sqrt(one_minus));
  };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(density, 0.0, r, 15, 1e-13);
  return independent + integral;
}

double threshold_phi(double p1, double p2, double latent_r) {
  const boost::math::normal standard;
  const double a = boost::math::quantile(standard, p1);
  const double b = boost::math::quantile(standard, p2);
  const double p11 = bivariate_normal_cdf(a, b, latent_r);
  return (p11 - p1 * p2) / std::sqrt(p1 * (1.0 - p1) * p2 * (1.0 - p2));
}

double latent_correlation_for_phi(double p1, double p2, double phi) {
  if (!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0))
    throw DataError("correlated ingredients need inclusion probabilities strictly inside (0, 1)");
  constexpr double kEdge = 1.0 - 1e-9;
  const double lo_phi = threshold_phi(p1, p2, -kEdge);
  const double hi_phi = threshold_phi(p1, p2, kEdge);
  if (phi < lo_phi || phi > hi_phi) {
    std::ostringstream msg;
    msg << "correlation " << phi << " is infeasible for marginals " << p1 << ", " << p2
        << " (attainable range [" << lo_phi << ", " << hi_phi << "])";
    throw DataError(msg.str());
  }
  double lo = -kEdge, hi = kEdge;
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (threshold_phi(p1, p2, mid) < phi) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Corpus synthesize_corpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.ingredients.empty()) throw DataError("synth spec has no ingredients");
  std::vector<std::string> ids;
  for (const auto& ing : spec.ingredients) {
    if (!(ing.inclusion >= 0.0 && ing.inclusion <= 1.0))
      throw DataError("inclusion probability of '" + ing.id + "' outside [0, 1]");
    if (!(ing.log_sd > 0.0)) throw DataError("log_sd of '" + ing.id + "' must be > 0");
    ids.push_back(ing.id);
  }
  IngredientVocabulary vocabulary = IngredientVocabulary::from_ids(ids);
  if (vocabulary.size() != spec.ingredients.size()) throw DataError("synth spec has duplicate ids");
  const std::size_t k = vocabulary.size();

  // Per-vocabulary-index parameters.
  std::vector<const SynthIngredient*> params(k);
  for (const auto& ing : spec.ingredients) params[vocabulary.require_index(ing.id)] = &ing;

  const boost::math::normal standard;
  std::vector<double> threshold(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double p = params[i]->inclusion;
    threshold[i] = p <= 0.0 ? -INFINITY : p >= 1.0 ? INFINITY : boost::math::quantile(standard, p);
  }

  // Disjoint pairs keep the latent covariance block-diagonal and positive definite.
  std::vector<std::optional<std::size_t>> partner(k);
  std::vector<double> latent_r(k, 0.0);
  for (const auto& pair : spec.correlated_pairs) {
    const std::size_t a = vocabulary.require_index(pair.first);
    const std::size_t b = vocabulary.require_index(pair.second);
    if (a == b || partner[a] || partner[b])
      throw DataError("correlated pairs must be disjoint (" + pair.first + ", " + pair.second + ")");
    const double r = latent_correlation_for_phi(params[a]->inclusion, params[b]->inclusion,
                                                pair.correlation);
    partner[a] = b;
    partner[b] = a;
    latent_r[std::max(a, b)] = r;
  }

  std::vector<Recipe> planted;
  double planted_total = 0.0;
  std::vector<double> planted_cumulative;
  for (const auto& p : spec.planted) {
    if (!(p.frequency >= 0.0)) throw DataError("planted frequency must be >= 0");
    Recipe r(k);
    for (const auto& [id, g] : p.ingredients) {
      const std::size_t index = vocabulary.require_index(id);
      r.mask[index] = 1;
      r.grams[index] = g;
    }
    if (r.is_degenerate()) throw DataError("planted recipe has no ingredients");
    validate_recipe(r);
    planted.push_back(std::move(r));
    planted_total += p.frequency;
    planted_cumulative.push_back(planted_total);
  }
  if (planted_total > 1.0 + 1e-12) throw DataError("planted frequencies sum above 1");

  Corpus corpus;
  corpus.vocabulary = vocabulary;
  corpus.recipes.reserve(spec.recipe_count);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(k);
  for (std::size_t n = 0; n < spec.recipe_count; ++n) {
    const double u = uniform01(rng);
    auto hit = std::upper_bound(planted_cumulative.begin(), planted_cumulative.end(), u);
    if (hit != planted_cumulative.end()) {
      corpus.recipes.push_back(planted[static_cast<std::size_t>(hit - planted_cumulative.begin())]);
      continue;
    }
    Recipe r(k);
    // Degenerate draws are redrawn; they cannot enter a training corpus.
    do {
      for (std::size_t i = 0; i < k; ++i) {
        z[i] = normal(rng);
        if (partner[i] && *partner[i] < i) {
          const double rho = latent_r[i];
          z[i] = rho * z[*partner[i]] + std::sqrt(1.0 - rho * rho) * z[i];
        }
      }
      for (std::size_t i = 0; i < k; ++i) r.mask[i] = z[i] < threshold[i] ? 1 : 0;
    } while (r.is_degenerate());
    for (std::size_t i = 0; i < k; ++i) {
      const double e = normal(rng);
      r.grams[i] = r.mask[i] ? std::max(1.0, std::round(std::exp(params[i]->log_mean + params[i]->log_sd * e)))
                             : 0.0;
    }
    corpus.recipes.push_back(std::move(r));
  }
  assign_splits(corpus, spec.validation_fraction, seed);
  return corpus;
}

}  // namespace recipeforge
