#include "recipeforge/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "recipeforge/common.hpp"

namespace recipeforge {

std::vector<Mask> masks_of(std::span<const Recipe> recipes) {
  std::vector<Mask> out;
  out.reserve(recipes.size());
  for (const auto& r : recipes) out.push_back(r.mask);
  return out;
}

namespace {

std::size_t width_of(std::span<const Mask> masks) {
  const std::size_t k = masks.front().size();
  for (const auto& m : masks)
    if (m.size() != k) throw std::invalid_argument("masks use different vocabularies");
  return k;
}

std::size_t count_of(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

std::string num(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

std::vector<double> inclusion_frequencies(std::span<const Mask> masks) {
  if (masks.empty()) throw DataError("inclusion frequencies need at least one recipe");
  const std::size_t k = width_of(masks);
  std::vector<std::size_t> counts(k, 0);
  for (const auto& m : masks)
    for (std::size_t i = 0; i < k; ++i) counts[i] += m[i] != 0;
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(masks.size());
  return out;
}

double marginal_error(std::span<const Mask> samples, std::span<const Mask> reference) {
  const auto a = inclusion_frequencies(samples);
  const auto b = inclusion_frequencies(reference);
  if (a.size() != b.size()) throw std::invalid_argument("masks use different vocabularies");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double marginal_error(std::span<const Recipe> samples, std::span<const Recipe> reference) {
  return marginal_error(masks_of(samples), masks_of(reference));
}

std::vector<double> pairwise_correlations(std::span<const Mask> masks) {
  if (masks.size() < 2) throw DataError("correlations need at least two recipes");
  const std::size_t k = width_of(masks);
  // Integer co-occurrence counts keep the result independent of row order.
  std::vector<std::uint64_t> single(k, 0), joint(k * k, 0);
  std::vector<std::size_t> on;
  for (const auto& m : masks) {
    on.clear();
    for (std::size_t i = 0; i < k; ++i)
      if (m[i]) on.push_back(i);
    for (auto i : on) {
      ++single[i];
      for (auto j : on) ++joint[i * k + j];
    }
  }
  const double n = static_cast<double>(masks.size());
  std::vector<double> out(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double ni = static_cast<double>(single[i]), nj = static_cast<double>(single[j]);
      const double var = ni * (n - ni) * nj * (n - nj);
      if (var <= 0.0) continue;
      const double r = (n * static_cast<double>(joint[i * k + j]) - ni * nj) / std::sqrt(var);
      out[i * k + j] = i == j ? 1.0 : std::clamp(r, -1.0, 1.0);
    }
  }
  return out;
}

std::vector<double> pairwise_correlations(std::span<const Recipe> recipes) {
  return pairwise_correlations(masks_of(recipes));
}

std::vector<double> length_histogram(std::span<const Mask> masks, std::size_t max_length) {
  if (masks.empty()) throw DataError("length histogram needs at least one recipe");
  std::vector<double> hist(max_length + 1, 0.0);
  for (const auto& m : masks) {
    const std::size_t c = count_of(m);
    if (c > max_length) throw std::invalid_argument("recipe longer than histogram range");
    hist[c] += 1.0;
  }
  for (auto& h : hist) h /= static_cast<double>(masks.size());
  return hist;
}

double length_distance(std::span<const Mask> samples, std::span<const Mask> reference) {
  if (samples.empty() || reference.empty()) throw DataError("length distance needs nonempty inputs");
  const std::size_t k = std::max(width_of(samples), width_of(reference));
  const auto a = length_histogram(samples, k);
  const auto b = length_histogram(reference, k);
  double tv = 0.0;
  for (std::size_t i = 0; i <= k; ++i) tv += std::abs(a[i] - b[i]);
  return std::min(1.0, 0.5 * tv);
}

double length_distance(std::span<const Recipe> samples, std::span<const Recipe> reference) {
  return length_distance(masks_of(samples), masks_of(reference));
}

double quantity_mae(const QuantityScoreModel& model, std::span<const Recipe> held_out, std::uint64_t seed,
                    unsigned threads) {
  if (held_out.empty()) throw DataError("quantity MAE needs held-out recipes");
  std::vector<double> per_recipe(held_out.size(), 0.0);
  parallel_for(held_out.size(), threads, [&](std::size_t r) {
    const Recipe& truth = held_out[r];
    if (truth.is_degenerate()) throw DataError("held-out recipe " + std::to_string(r) + " has no ingredients");
    const Recipe sample = reverse_sample(model, truth.mask, derive_seed(seed, r));
    double err = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (truth.mask[i]) err += std::abs(sample.grams[i] - truth.grams[i]);
    per_recipe[r] = err / static_cast<double>(truth.ingredient_count());
  });
  double sum = 0.0;
  for (double v : per_recipe) sum += v;
  return sum / static_cast<double>(held_out.size());
}

double FidelityReport::max_pair_difference() const {
  double worst = 0.0;
  for (const auto& p : top_pairs) worst = std::max(worst, std::abs(p.difference));
  return worst;
}

FidelityReport compare_distributions(std::span<const Mask> samples, std::span<const Mask> reference,
                                     std::size_t top_k) {
  FidelityReport report;
  report.sample_count = samples.size();
  report.reference_count = reference.size();
  report.sample_marginals = inclusion_frequencies(samples);
  report.reference_marginals = inclusion_frequencies(reference);
  const std::size_t k = report.reference_marginals.size();
  if (report.sample_marginals.size() != k) throw std::invalid_argument("masks use different vocabularies");
  for (std::size_t i = 0; i < k; ++i)
    report.max_marginal_error =
        std::max(report.max_marginal_error, std::abs(report.sample_marginals[i] - report.reference_marginals[i]));
  report.sample_lengths = length_histogram(samples, k);
  report.reference_lengths = length_histogram(reference, k);
  double tv = 0.0;
  for (std::size_t i = 0; i <= k; ++i) tv += std::abs(report.sample_lengths[i] - report.reference_lengths[i]);
  report.length_tv = std::min(1.0, 0.5 * tv);

  const auto ref_corr = pairwise_correlations(reference);
  const auto smp_corr = pairwise_correlations(samples);
  std::vector<PairAgreement> pairs;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      pairs.push_back({i, j, ref_corr[i * k + j], smp_corr[i * k + j], smp_corr[i * k + j] - ref_corr[i * k + j]});
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairAgreement& a, const PairAgreement& b) {
    return std::abs(a.reference) > std::abs(b.reference);
  });
  pairs.resize(std::min(top_k, pairs.size()));
  report.top_pairs = std::move(pairs);
  return report;
}

FidelityReport fidelity_report(const MaskDiffusionModel& mask_model, const QuantityScoreModel& quantity_model,
                               const Corpus& corpus, std::size_t count, std::uint64_t seed, unsigned threads,
                               std::size_t top_k) {
  if (!(mask_model.vocabulary == corpus.vocabulary) || !(quantity_model.vocabulary == corpus.vocabulary))
    throw DataError("models and corpus use different vocabularies");
  const auto training = corpus.training();
  const auto batch = sample_masks(mask_model, count, seed, threads);
  auto report = compare_distributions(batch.masks, masks_of(training), top_k);
  report.rejected_empty = batch.rejected_empty;
  const auto held_out = corpus.validation();
  report.held_out_count = held_out.size();
  if (!held_out.empty()) report.quantity_mae = quantity_mae(quantity_model, held_out, derive_seed(seed, count), threads);
  return report;
}

nlohmann::json fidelity_report_to_json(const FidelityReport& report) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : report.top_pairs)
    pairs.push_back({{"first", p.first},
                     {"second", p.second},
                     {"reference", p.reference},
                     {"samples", p.samples},
                     {"difference", p.difference}});
  return {{"max_marginal_error", report.max_marginal_error},
          {"quantity_mae_g", report.quantity_mae ? nlohmann::json(*report.quantity_mae) : nlohmann::json(nullptr)},
          {"length_tv", report.length_tv},
          {"max_pair_difference", report.max_pair_difference()},
          {"top_pairs", pairs},
          {"sample_count", report.sample_count},
          {"reference_count", report.reference_count},
          {"held_out_count", report.held_out_count},
          {"rejected_empty", report.rejected_empty}};
}

std::string marginals_csv(const FidelityReport& report, const IngredientVocabulary& vocabulary) {
  std::ostringstream out;
  out << "ingredient_id,reference,samples,abs_error\n";
  for (std::size_t i = 0; i < report.reference_marginals.size(); ++i)
    out << vocabulary.id(i) << ',' << num(report.reference_marginals[i]) << ',' << num(report.sample_marginals[i])
        << ',' << num(std::abs(report.sample_marginals[i] - report.reference_marginals[i])) << '\n';
  return out.str();
}

std::string pairs_csv(const FidelityReport& report, const IngredientVocabulary& vocabulary) {
  std::ostringstream out;
  out << "first,second,reference,samples,difference\n";
  for (const auto& p : report.top_pairs)
    out << vocabulary.id(p.first) << ',' << vocabulary.id(p.second) << ',' << num(p.reference) << ','
        << num(p.samples) << ',' << num(p.difference) << '\n';
  return out.str();
}

std::string lengths_csv(const FidelityReport& report) {
  std::ostringstream out;
  out << "length,reference,samples\n";
  for (std::size_t i = 0; i < report.reference_lengths.size(); ++i)
    out << i << ',' << num(report.reference_lengths[i]) << ',' << num(report.sample_lengths[i]) << '\n';
  return out.str();
}

}  // namespace recipeforge
