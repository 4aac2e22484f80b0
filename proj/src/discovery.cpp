#include "recipeforge/discovery.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "recipeforge/common.hpp"

namespace recipeforge {

std::string model_fingerprint(const MaskDiffusionModel& model) {
  return fnv1a_hex(mask_model_to_json(model).dump());
}

std::string model_fingerprint(const QuantityScoreModel& model) {
  return fnv1a_hex(quantity_model_to_json(model).dump());
}

void check_model_pair(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model) {
  if (!(mask_model.vocabulary == quantity_model.vocabulary))
    throw DataError("mask and quantity models were trained on different vocabularies");
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::vector<std::uint64_t> pack_mask(std::span<const std::uint8_t> mask) {
  std::vector<std::uint64_t> bits((mask.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) bits[i / 64] |= std::uint64_t{1} << (i % 64);
  return bits;
}

std::size_t hamming(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
  return d;
}

}  // namespace

Recipe generate_one(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                    std::uint64_t sample_seed, std::size_t* rejected_empty) {
  thread_local Workspace ws;
  Rng rng(sample_seed);
  std::size_t rejected = 0;
  const auto mask = sample_nonempty_mask(mask_model, rng, ws, rejected);
  if (rejected_empty) *rejected_empty = rejected;
  return reverse_sample(quantity_model, mask, rng);
}

GenerationBatch generate_batch(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                               std::size_t count, std::uint64_t seed, unsigned threads) {
  check_model_pair(mask_model, quantity_model);
  GenerationBatch batch;
  batch.seed = seed;
  batch.mask_fingerprint = model_fingerprint(mask_model);
  batch.quantity_fingerprint = model_fingerprint(quantity_model);
  batch.generated_at = utc_now();
  batch.samples.resize(count);
  std::vector<std::size_t> rejected(count, 0);
  parallel_for(count, threads, [&](std::size_t i) {
    batch.samples[i] = generate_one(mask_model, quantity_model, batch.sample_seed(i), &rejected[i]);
  });
  for (auto r : rejected) batch.rejected_empty += r;
  return batch;
}

// ---------------------------------------------------------------------------
// Novelty

NoveltyIndex::NoveltyIndex(std::span<const Recipe> reference) : size_(reference.size()) {
  if (reference.empty()) throw DataError("novelty needs a nonempty reference corpus");
  ingredients_ = reference.front().size();
  std::unordered_map<std::string, std::size_t> by_mask;
  for (const auto& r : reference) {
    if (r.size() != ingredients_) throw std::invalid_argument("reference recipes use different vocabularies");
    std::string key(reinterpret_cast<const char*>(r.mask.data()), r.mask.size());
    auto [it, inserted] = by_mask.try_emplace(key, buckets_.size());
    if (inserted) buckets_.push_back(Bucket{pack_mask(r.mask), {}});
    buckets_[it->second].members.push_back(r);
  }
}

std::size_t NoveltyIndex::min_sds(const Recipe& recipe, std::size_t stop_below) const {
  if (recipe.size() != ingredients_) throw std::invalid_argument("recipe length does not match reference corpus");
  const auto bits = pack_mask(recipe.mask);
  std::size_t best = ingredients_ + 1;
  for (const auto& bucket : buckets_) {
    if (hamming(bits, bucket.bits) >= best) continue;
    for (const auto& member : bucket.members) {
      best = std::min(best, sds_bounded(recipe, member, best - 1));
      if (best < stop_below) return best;
    }
  }
  return best;
}

std::size_t NoveltyIndex::novelty(const Recipe& recipe) const { return min_sds(recipe, 1); }

bool NoveltyIndex::at_least(const Recipe& recipe, std::size_t min_sds_value) const {
  return min_sds(recipe, min_sds_value) >= min_sds_value;
}

std::vector<std::size_t> NoveltyIndex::novelty(std::span<const Recipe> recipes, unsigned threads) const {
  std::vector<std::size_t> out(recipes.size());
  parallel_for(recipes.size(), threads, [&](std::size_t i) { out[i] = novelty(recipes[i]); });
  return out;
}

std::size_t novelty(const Recipe& recipe, std::span<const Recipe> reference) {
  return NoveltyIndex(reference).novelty(recipe);
}

// ---------------------------------------------------------------------------
// Rediscovery

RediscoveryResult rediscover(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                             const Recipe& reference, std::size_t budget, std::uint64_t seed, unsigned threads,
                             std::size_t chunk) {
  check_model_pair(mask_model, quantity_model);
  if (reference.size() != mask_model.ingredients())
    throw DataError("reference recipe does not match the model vocabulary");
  validate_recipe(reference);
  if (chunk == 0) throw std::invalid_argument("rediscovery chunk must be positive");

  RediscoveryResult result;
  std::vector<std::optional<Recipe>> hits;
  for (std::size_t start = 0; start < budget; start += chunk) {
    const std::size_t n = std::min(chunk, budget - start);
    hits.assign(n, std::nullopt);
    parallel_for(n, threads, [&](std::size_t j) {
      thread_local Workspace ws;
      Rng rng(derive_seed(seed, start + j));
      std::size_t rejected = 0;
      const auto mask = sample_nonempty_mask(mask_model, rng, ws, rejected);
      if (!std::equal(mask.begin(), mask.end(), reference.mask.begin())) return;
      Recipe sample = reverse_sample(quantity_model, mask, rng);
      if (sds(sample, reference) == 0) hits[j] = std::move(sample);
    });
    for (std::size_t j = 0; j < n; ++j) {
      if (hits[j]) {
        result.index = start + j;
        result.draws = start + j + 1;
        result.sample = std::move(hits[j]);
        return result;
      }
    }
    result.draws = start + n;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Selection

GroupScores score_group(const RecipeGroup& group, std::size_t batch_size, const ScoringContext& context) {
  GroupScores s;
  s.founder = group.founder;
  s.count = group.count;
  s.popularity = popularity_score(group.count, batch_size);
  s.ingredients = group.representative.ingredient_count();
  const Recipe& r = group.representative;
  if (context.novelty) s.novelty = context.novelty->novelty(r);
  if (context.impact) s.env_score = env_impact_score(r, *context.impact);
  if (context.nutrients && context.hei) s.hei = hei_score(r, *context.nutrients, *context.hei).total;
  if (context.nutrients && context.profile)
    s.personalized = personalized_score(r, *context.profile, *context.nutrients, context.personalization);
  return s;
}

namespace {

/// Groups the candidate subset (kept in batch order) and fills the result.
DiscoveryResult select_most_repeated(std::span<const Recipe> batch, const std::vector<std::size_t>& candidates,
                                     std::string rule, nlohmann::json parameters, const ScoringContext& context) {
  if (candidates.empty()) throw DataError("no sample satisfies the " + rule + " selection");
  std::vector<Recipe> subset;
  subset.reserve(candidates.size());
  for (auto i : candidates) subset.push_back(batch[i]);
  auto groups = group_by_sds(subset);

  DiscoveryResult result;
  result.rule = std::move(rule);
  result.parameters = std::move(parameters);
  result.batch_size = batch.size();
  result.candidates = candidates.size();
  for (auto& g : groups) {
    g.founder = candidates[g.founder];
    for (auto& m : g.members) m = candidates[m];
    result.groups.push_back(score_group(g, batch.size(), context));
  }
  result.recipe = groups.front().representative;
  result.scores = result.groups.front();
  return result;
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("selection fraction must lie in (0, 1]");
}

/// Indices whose score is within the best ceil(fraction * n), ties at the cutoff included.
std::vector<std::size_t> top_fraction(const std::vector<double>& scores, double fraction, bool higher_is_better) {
  std::vector<double> sorted = scores;
  if (higher_is_better) std::sort(sorted.begin(), sorted.end(), std::greater<>());
  else std::sort(sorted.begin(), sorted.end());
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(scores.size()) - 1e-9)));
  const double cutoff = sorted[std::min(keep, sorted.size()) - 1];
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (higher_is_better ? scores[i] >= cutoff : scores[i] <= cutoff) out.push_back(i);
  return out;
}

}  // namespace

DiscoveryResult discover_novel(std::span<const Recipe> batch, const NoveltyIndex& index, std::size_t min_sds,
                               const ScoringContext& context, unsigned threads) {
  if (batch.empty()) throw DataError("discovery needs a nonempty batch");
  std::vector<std::uint8_t> pass(batch.size(), 0);
  parallel_for(batch.size(), threads, [&](std::size_t i) { pass[i] = index.at_least(batch[i], min_sds); });
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (pass[i]) candidates.push_back(i);
  ScoringContext ctx = context;
  ctx.novelty = &index;
  return select_most_repeated(batch, candidates, "novel", {{"min_sds", min_sds}}, ctx);
}

DiscoveryResult select_sustainable(std::span<const Recipe> batch, const ImpactTable& table,
                                   std::span<const std::size_t> required, const ScoringContext& context,
                                   double fraction) {
  if (batch.empty()) throw DataError("selection needs a nonempty batch");
  check_fraction(fraction);
  std::vector<double> scores(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) scores[i] = env_impact_score(batch[i], table);
  std::vector<std::size_t> candidates;
  for (auto i : top_fraction(scores, fraction, false)) {
    const bool ok = std::all_of(required.begin(), required.end(), [&](std::size_t k) {
      if (k >= batch[i].size()) throw std::invalid_argument("required ingredient index out of range");
      return batch[i].contains(k);
    });
    if (ok) candidates.push_back(i);
  }
  ScoringContext ctx = context;
  ctx.impact = &table;
  nlohmann::json params = {{"fraction", fraction}, {"required", std::vector<std::size_t>(required.begin(), required.end())}};
  return select_most_repeated(batch, candidates, "sustainable", std::move(params), ctx);
}

DiscoveryResult select_nutritious(std::span<const Recipe> batch, const NutrientTable& table,
                                  const HeiStandards& standards, double fraction, const ScoringContext& context) {
  check_fraction(fraction);
  if (batch.empty()) throw DataError("selection needs a nonempty batch");
  std::vector<double> scores(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) scores[i] = hei_score(batch[i], table, standards).total;
  ScoringContext ctx = context;
  ctx.nutrients = &table;
  ctx.hei = &standards;
  return select_most_repeated(batch, top_fraction(scores, fraction, true), "nutritious", {{"fraction", fraction}},
                              ctx);
}

DiscoveryResult select_personalized(std::span<const Recipe> batch, const PersonProfile& profile,
                                    const NutrientTable& table, double fraction, const ScoringContext& context) {
  check_fraction(fraction);
  if (batch.empty()) throw DataError("selection needs a nonempty batch");
  profile.validate();
  std::vector<double> scores(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    scores[i] = personalized_score(batch[i], profile, table, context.personalization);
  ScoringContext ctx = context;
  ctx.nutrients = &table;
  ctx.profile = profile;
  nlohmann::json params = {{"fraction", fraction},
                           {"profile",
                            {{"age_years", profile.age_years},
                             {"sex", to_string(profile.sex)},
                             {"height_cm", profile.height_cm},
                             {"weight_kg", profile.weight_kg},
                             {"activity", to_string(profile.activity)}}},
                           {"meal_fraction", context.personalization.meal_fraction}};
  return select_most_repeated(batch, top_fraction(scores, fraction, true), "personalized", std::move(params), ctx);
}

std::vector<GroupScores> landscape_map(std::span<const Recipe> batch, const ScoringContext& context) {
  if (batch.empty()) throw DataError("landscape map needs a non-empty batch");
  std::vector<GroupScores> rows;
  for (const auto& g : group_by_sds(batch)) rows.push_back(score_group(g, batch.size(), context));
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json group_to_json(const GroupScores& s) {
  nlohmann::json j = {{"founder", s.founder},
                      {"count", s.count},
                      {"popularity", s.popularity},
                      {"ingredients", s.ingredients}};
  j["novelty"] = s.novelty ? nlohmann::json(*s.novelty) : nlohmann::json(nullptr);
  j["env_score"] = s.env_score ? nlohmann::json(*s.env_score) : nlohmann::json(nullptr);
  j["hei"] = s.hei ? nlohmann::json(*s.hei) : nlohmann::json(nullptr);
  j["personalized"] = s.personalized ? nlohmann::json(*s.personalized) : nlohmann::json(nullptr);
  return j;
}

template <typename T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  std::ostringstream out;
  out << std::setprecision(17) << *v;
  return out.str();
}

}  // namespace

nlohmann::json discovery_result_to_json(const DiscoveryResult& result, const IngredientVocabulary& vocabulary) {
  return {{"rule", result.rule},
          {"parameters", result.parameters},
          {"recipe", recipe_to_json(result.recipe, vocabulary)},
          {"scores", group_to_json(result.scores)},
          {"batch_size", result.batch_size},
          {"candidates", result.candidates},
          {"group_count", result.groups.size()},
          {"popularity_axis", "group frequency in batch"}};
}

std::string group_table_csv(std::span<const GroupScores> groups) {
  std::ostringstream out;
  out << "rank,founder,count,popularity,ingredients,novelty,env_score,hei,personalized\n";
  for (std::size_t r = 0; r < groups.size(); ++r) {
    const auto& g = groups[r];
    out << r + 1 << ',' << g.founder << ',' << g.count << ',' << cell(std::optional<double>(g.popularity)) << ','
        << g.ingredients << ',' << cell(g.novelty) << ',' << cell(g.env_score) << ',' << cell(g.hei) << ','
        << cell(g.personalized) << '\n';
  }
  return out.str();
}

}  // namespace recipeforge
