#include "recipeforge/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "recipeforge/common.hpp"
#include "recipeforge/config.hpp"
#include "recipeforge/corpus.hpp"
#include "recipeforge/discovery.hpp"
#include "recipeforge/fidelity.hpp"
#include "recipeforge/mask_diffusion.hpp"
#include "recipeforge/quantity_diffusion.hpp"
#include "recipeforge/scoring.hpp"

namespace recipeforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Session {
  RunConfig config;
  std::string hash;
  unsigned threads = 1;
  std::ostream& out;
};

fs::path run_dir(const Session& s) { return *s.config.path("paths.run_dir"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path.string());
  file << text;
  if (!file) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// CSV outputs carry the config hash as a leading comment line.
void write_csv(const Session& s, const fs::path& path, const std::string& body) {
  write_text(path, "# config_hash: " + s.hash + "\n" + body);
}

void write_corpus(const Session& s, const fs::path& path, const Corpus& corpus, json meta = json::object()) {
  meta["config_hash"] = s.hash;
  write_text(path, json{{"meta", meta}}.dump() + "\n" + corpus_to_jsonl(corpus));
}

json read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  try {
    auto j = json::parse(line);
    if (j.is_object() && j.contains("meta")) return j["meta"];
  } catch (const json::exception&) {
  }
  return json::object();
}

fs::path corpus_path(const Session& s) {
  if (auto p = s.config.path("paths.corpus")) return *p;
  return run_dir(s) / "corpus.jsonl";
}

fs::path mask_checkpoint(const Session& s) { return run_dir(s) / "checkpoints" / "mask.json"; }
fs::path quantity_checkpoint(const Session& s) { return run_dir(s) / "checkpoints" / "quantity.json"; }
fs::path samples_path(const Session& s) { return run_dir(s) / "samples" / "samples.jsonl"; }

Corpus load_run_corpus(const Session& s, const std::optional<IngredientVocabulary>& vocabulary = std::nullopt) {
  const auto path = corpus_path(s);
  if (!fs::exists(path)) throw DataError("corpus not found: " + path.string() + " (run synth or ingest first)");
  return load_corpus(path, vocabulary);
}

MaskDiffusionModel load_mask(const Session& s) {
  const auto path = mask_checkpoint(s);
  if (!fs::exists(path)) throw DataError("mask checkpoint not found: " + path.string() + " (run train-mask first)");
  return load_mask_model(path);
}

QuantityScoreModel load_quantity(const Session& s) {
  const auto path = quantity_checkpoint(s);
  if (!fs::exists(path))
    throw DataError("quantity checkpoint not found: " + path.string() + " (run train-quantity first)");
  return load_quantity_model(path);
}

struct LoadedBatch {
  std::vector<Recipe> samples;
  IngredientVocabulary vocabulary;
  json meta;
};

/// Loads the persisted batch and checks it was drawn from the current checkpoints.
LoadedBatch load_batch(const Session& s) {
  const auto path = samples_path(s);
  if (!fs::exists(path)) throw DataError("samples not found: " + path.string() + " (run sample first)");
  const auto mask = load_mask(s);
  const auto quantity = load_quantity(s);
  LoadedBatch batch;
  batch.meta = read_meta(path);
  if (batch.meta.value("mask_fingerprint", std::string()) != model_fingerprint(mask) ||
      batch.meta.value("quantity_fingerprint", std::string()) != model_fingerprint(quantity))
    throw DataError(path.string() + " was not generated by the current checkpoints");
  batch.vocabulary = mask.vocabulary;
  batch.samples = load_corpus(path, batch.vocabulary).recipes;
  if (batch.samples.empty()) throw DataError(path.string() + " holds no samples");
  return batch;
}

/// Scoring tables configured for the run; absent tables are skipped.
struct Tables {
  std::optional<ImpactTable> impact;
  std::optional<NutrientTable> nutrients;
  std::optional<HeiStandards> hei;

  ScoringContext context(const PersonalizationConfig& personalization) const {
    ScoringContext c;
    if (impact) c.impact = &*impact;
    if (nutrients) c.nutrients = &*nutrients;
    if (hei) c.hei = &*hei;
    c.personalization = personalization;
    return c;
  }
};

Tables load_tables(const Session& s, const IngredientVocabulary& vocabulary) {
  Tables t;
  if (auto p = s.config.path("paths.impact_table")) {
    std::optional<fs::path> norm;
    if (s.config.path("paths.impact_normalization")) norm = s.config.existing_path("paths.impact_normalization");
    t.impact = load_impact_table(s.config.existing_path("paths.impact_table"), vocabulary, norm);
  }
  if (s.config.path("paths.nutrient_table")) {
    t.nutrients = load_nutrient_table(s.config.existing_path("paths.nutrient_table"), vocabulary);
    t.hei = HeiStandards::load(s.config.existing_path("paths.hei_standards"));
  }
  return t;
}

json provenance(const Session& s, const std::string& command) {
  return {{"command", command}, {"config_hash", s.hash}};
}

void write_selection(const Session& s, const std::string& name, const DiscoveryResult& result,
                     const LoadedBatch& batch) {
  json j = provenance(s, name);
  j["result"] = discovery_result_to_json(result, batch.vocabulary);
  j["mask_fingerprint"] = batch.meta.value("mask_fingerprint", "");
  j["quantity_fingerprint"] = batch.meta.value("quantity_fingerprint", "");
  const auto dir = run_dir(s) / "selections";
  write_json(dir / (name + ".json"), j);
  write_csv(s, dir / (name + ".csv"), group_table_csv(result.groups));
  s.out << name << ": selected group of " << result.scores.count << " from " << result.candidates
        << " candidates (" << result.groups.size() << " groups); " << (dir / (name + ".json")).string() << '\n';
}

std::vector<std::size_t> required_indices(const Session& s, const IngredientVocabulary& vocabulary) {
  std::vector<std::size_t> out;
  for (const auto& id : s.config.list("select.require")) out.push_back(vocabulary.require_index(id));
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth(Session& s, const std::optional<std::string>& out_path) {
  const auto spec = SynthSpec::load(s.config.existing_path("paths.synth_spec"));
  const Corpus corpus = synthesize_corpus(spec, stage_seed(s.config, Stage::synth));
  const fs::path dest = out_path ? fs::path(*out_path) : corpus_path(s);
  write_corpus(s, dest, corpus, {{"source", "synth"}});
  s.out << "synth: " << corpus.size() << " recipes over " << corpus.vocabulary.size() << " ingredients -> "
        << dest.string() << '\n';
}

void cmd_ingest(Session& s, const std::optional<std::string>& out_path) {
  Corpus corpus = load_corpus(s.config.existing_path("paths.raw_input"));
  const bool tagged = std::any_of(corpus.splits.begin(), corpus.splits.end(),
                                  [](Split sp) { return sp == Split::validation; });
  if (!tagged) assign_splits(corpus, s.config.number("corpus.validation_fraction"), stage_seed(s.config, Stage::synth));
  std::size_t degenerate = 0;
  for (const auto& r : corpus.recipes) degenerate += r.is_degenerate();
  const fs::path dest = out_path ? fs::path(*out_path) : corpus_path(s);
  write_corpus(s, dest, corpus, {{"source", "ingest"}});
  s.out << "ingest: " << corpus.size() << " recipes, " << corpus.vocabulary.size() << " ingredients, "
        << corpus.validation().size() << " held out -> " << dest.string() << '\n';
}

void cmd_train_mask(Session& s) {
  const Corpus corpus = load_run_corpus(s);
  const auto start = std::chrono::steady_clock::now();
  TrainingReport report;
  const auto model = train_mask_model(corpus, schedule_from(s.config), mask_training_from(s.config),
                                      stage_seed(s.config, Stage::train_mask), &report);
  auto checkpoint = mask_model_to_json(model);
  checkpoint["config_hash"] = s.hash;
  write_json(mask_checkpoint(s), checkpoint);
  json r = provenance(s, "train-mask");
  r["fingerprint"] = model_fingerprint(model);
  r["iterations"] = report.iterations;
  r["initial_validation_loss"] = report.initial_validation_loss;
  r["final_validation_loss"] = report.final_validation_loss;
  write_json(run_dir(s) / "reports" / "train_mask.json", r);
  s.out << "train-mask: validation loss " << report.initial_validation_loss << " -> " << report.final_validation_loss
        << " in " << std::fixed << std::setprecision(1) << elapsed_seconds(start) << " s\n"
        << std::defaultfloat;
}

void cmd_train_quantity(Session& s) {
  const Corpus corpus = load_run_corpus(s);
  const auto start = std::chrono::steady_clock::now();
  TrainingReport report;
  const auto model = train_quantity_model(corpus, sde_from(s.config), quantity_training_from(s.config),
                                          stage_seed(s.config, Stage::train_quantity), &report);
  auto checkpoint = quantity_model_to_json(model);
  checkpoint["config_hash"] = s.hash;
  write_json(quantity_checkpoint(s), checkpoint);
  json r = provenance(s, "train-quantity");
  r["fingerprint"] = model_fingerprint(model);
  r["iterations"] = report.iterations;
  r["initial_validation_loss"] = report.initial_validation_loss;
  r["final_validation_loss"] = report.final_validation_loss;
  write_json(run_dir(s) / "reports" / "train_quantity.json", r);
  s.out << "train-quantity: validation loss " << report.initial_validation_loss << " -> "
        << report.final_validation_loss << " in " << std::fixed << std::setprecision(1) << elapsed_seconds(start)
        << " s\n"
        << std::defaultfloat;
}

void cmd_sample(Session& s) {
  const auto mask = load_mask(s);
  const auto quantity = load_quantity(s);
  const auto start = std::chrono::steady_clock::now();
  const auto batch = generate_batch(mask, quantity, s.config.integer("sample.count"),
                                    stage_seed(s.config, Stage::sample), s.threads);
  Corpus as_corpus{mask.vocabulary, batch.samples, {}};
  write_corpus(s, samples_path(s), as_corpus,
               {{"seed", batch.seed},
                {"seed_rule", "sample i uses derive_seed(seed, i)"},
                {"mask_fingerprint", batch.mask_fingerprint},
                {"quantity_fingerprint", batch.quantity_fingerprint},
                {"rejected_empty", batch.rejected_empty}});
  s.out << "sample: " << batch.samples.size() << " recipes at " << batch.generated_at << " in " << std::fixed
        << std::setprecision(1) << elapsed_seconds(start) << " s -> " << samples_path(s).string() << '\n'
        << std::defaultfloat;
}

void cmd_rediscover(Session& s) {
  const auto mask = load_mask(s);
  const auto quantity = load_quantity(s);
  const auto ref_path = s.config.existing_path("paths.reference");
  std::ifstream in(ref_path);
  Recipe reference;
  try {
    reference = parse_recipe(json::parse(in), mask.vocabulary);
  } catch (const json::exception& e) {
    throw DataError(ref_path.string() + ": " + e.what());
  }
  const std::size_t budget = s.config.integer("rediscover.budget");
  const auto result = rediscover(mask, quantity, reference, budget, stage_seed(s.config, Stage::rediscover),
                                 s.threads, s.config.integer("rediscover.chunk"));
  json j = provenance(s, "rediscover");
  j["reference"] = recipe_to_json(reference, mask.vocabulary);
  j["budget"] = budget;
  j["draws"] = result.draws;
  j["found"] = result.index.has_value();
  j["index"] = result.index ? json(*result.index) : json(nullptr);
  if (result.sample) {
    j["sample"] = recipe_to_json(*result.sample, mask.vocabulary);
    j["sds"] = sds(*result.sample, reference);
  }
  j["mask_fingerprint"] = model_fingerprint(mask);
  j["quantity_fingerprint"] = model_fingerprint(quantity);
  write_json(run_dir(s) / "selections" / "rediscover.json", j);
  if (result.index) s.out << "rediscover: found at sample " << *result.index << " after " << result.draws << " draws\n";
  else s.out << "rediscover: not found within " << budget << " draws\n";
}

void cmd_discover(Session& s) {
  const auto batch = load_batch(s);
  const Corpus corpus = load_run_corpus(s, batch.vocabulary);
  const auto training = corpus.training();
  const NoveltyIndex index(training);
  const Tables tables = load_tables(s, batch.vocabulary);
  const auto result = discover_novel(batch.samples, index, s.config.integer("select.min_sds"),
                                     tables.context(personalization_from(s.config)), s.threads);
  write_selection(s, "discover", result, batch);
}

void cmd_select_sustainable(Session& s) {
  const auto batch = load_batch(s);
  const Tables tables = load_tables(s, batch.vocabulary);
  if (!tables.impact) throw DataError("select-sustainable needs paths.impact_table");
  const auto required = required_indices(s, batch.vocabulary);
  const auto result = select_sustainable(batch.samples, *tables.impact, required,
                                         tables.context(personalization_from(s.config)),
                                         s.config.number("select.env_fraction"));
  write_selection(s, "sustainable", result, batch);
}

void cmd_select_nutritious(Session& s) {
  const auto batch = load_batch(s);
  const Tables tables = load_tables(s, batch.vocabulary);
  if (!tables.nutrients) throw DataError("select-nutritious needs paths.nutrient_table");
  const auto result = select_nutritious(batch.samples, *tables.nutrients, *tables.hei,
                                        s.config.number("select.top_fraction"),
                                        tables.context(personalization_from(s.config)));
  write_selection(s, "nutritious", result, batch);
}

void cmd_personalize(Session& s) {
  const auto batch = load_batch(s);
  const Tables tables = load_tables(s, batch.vocabulary);
  if (!tables.nutrients) throw DataError("personalize needs paths.nutrient_table");
  const auto profile = profile_from(s.config);
  const auto result = select_personalized(batch.samples, profile, *tables.nutrients,
                                          s.config.number("select.top_fraction"),
                                          tables.context(personalization_from(s.config)));
  std::ostringstream name;
  name << "personalized_" << to_string(profile.sex) << '_' << profile.age_years << 'y';
  write_selection(s, name.str(), result, batch);
}

void cmd_validate(Session& s) {
  const auto mask = load_mask(s);
  const auto quantity = load_quantity(s);
  const Corpus corpus = load_run_corpus(s, mask.vocabulary);
  const auto start = std::chrono::steady_clock::now();
  const auto report = fidelity_report(mask, quantity, corpus, s.config.integer("fidelity.count"),
                                      stage_seed(s.config, Stage::validate), s.threads,
                                      s.config.integer("fidelity.top_k"));
  json j = provenance(s, "validate");
  j["fidelity"] = fidelity_report_to_json(report);
  j["mask_fingerprint"] = model_fingerprint(mask);
  j["quantity_fingerprint"] = model_fingerprint(quantity);
  const auto dir = run_dir(s) / "reports";
  write_json(dir / "fidelity.json", j);
  write_csv(s, dir / "fidelity_marginals.csv", marginals_csv(report, mask.vocabulary));
  write_csv(s, dir / "fidelity_pairs.csv", pairs_csv(report, mask.vocabulary));
  write_csv(s, dir / "fidelity_lengths.csv", lengths_csv(report));
  s.out << "validate: max marginal error " << report.max_marginal_error << ", length TV " << report.length_tv
        << ", max pair difference " << report.max_pair_difference();
  if (report.quantity_mae) s.out << ", quantity MAE " << *report.quantity_mae << " g";
  s.out << " (" << std::fixed << std::setprecision(1) << elapsed_seconds(start) << " s)\n" << std::defaultfloat;
}

void cmd_landscape(Session& s) {
  const auto batch = load_batch(s);
  const Corpus corpus = load_run_corpus(s, batch.vocabulary);
  const auto training = corpus.training();
  const NoveltyIndex index(training);
  const Tables tables = load_tables(s, batch.vocabulary);
  auto context = tables.context(personalization_from(s.config));
  context.novelty = &index;
  const auto rows = landscape_map(batch.samples, context);
  write_csv(s, run_dir(s) / "reports" / "landscape.csv", group_table_csv(rows));
  s.out << "landscape: " << rows.size() << " groups -> " << (run_dir(s) / "reports" / "landscape.csv").string()
        << '\n';
}

unsigned resolve_threads(std::uint64_t requested) {
  if (requested == 0) return std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(requested);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative recipe design: diffusion models over ingredient masks and quantities", "recipeforge"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_file, run_dir_flag, out_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<unsigned> threads_flag;
  std::vector<std::string> assignments;
  std::vector<std::pair<std::string, std::string>> overrides;

  app.add_option("--config", config_file, "Config file (flat dotted key = value)");
  app.add_option("--set", assignments, "Override a config key: key=value (repeatable)");
  app.add_option("--run-dir", run_dir_flag, "Run directory");
  app.add_option("--seed", seed_flag, "Run seed");
  app.add_option("--threads", threads_flag, "Worker threads (0 = all cores; default from RECIPEFORGE_THREADS)");

  auto bind = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                                          help);
  };

  std::map<std::string, std::function<void(Session&)>> commands;
  auto add = [&](const std::string& name, const std::string& help, std::function<void(Session&)> fn) {
    commands[name] = std::move(fn);
    return app.add_subcommand(name, help);
  };

  auto* synth = add("synth", "Generate a synthetic corpus from a spec", [&](Session& s) { cmd_synth(s, out_path); });
  bind(synth, "--spec", "paths.synth_spec", "Synthetic corpus spec (JSON)");
  synth->add_option("--out", out_path, "Output corpus path (default <run-dir>/corpus.jsonl)");

  auto* ingest = add("ingest", "Canonicalize a raw JSON-lines corpus", [&](Session& s) { cmd_ingest(s, out_path); });
  bind(ingest, "--input", "paths.raw_input", "Raw corpus (JSON lines)");
  ingest->add_option("--out", out_path, "Output corpus path (default <run-dir>/corpus.jsonl)");

  for (auto* sub : {add("train-mask", "Train the ingredient-selection model", cmd_train_mask),
                    add("train-quantity", "Train the ingredient-quantity model", cmd_train_quantity)})
    bind(sub, "--corpus", "paths.corpus", "Corpus path (default <run-dir>/corpus.jsonl)");

  auto* sample = add("sample", "Generate a batch of recipes", cmd_sample);
  bind(sample, "--count", "sample.count", "Number of samples");

  auto* redis = add("rediscover", "Stream samples until a reference recipe reappears", cmd_rediscover);
  bind(redis, "--reference", "paths.reference", "Reference recipe (JSON)");
  bind(redis, "--budget", "rediscover.budget", "Maximum number of draws");

  auto* discover = add("discover", "Most repeated sample among novel ones", cmd_discover);
  bind(discover, "--min-sds", "select.min_sds", "Minimum SDS to every training recipe");
  bind(discover, "--corpus", "paths.corpus", "Corpus path");

  auto* sustainable = add("select-sustainable", "Most repeated low-impact sample", cmd_select_sustainable);
  sustainable->add_option_function<std::vector<std::string>>(
      "--require",
      [&overrides](const std::vector<std::string>& ids) {
        std::string joined;
        for (const auto& id : ids) joined += (joined.empty() ? "" : ",") + id;
        overrides.emplace_back("select.require", joined);
      },
      "Ingredient id that must be present (repeatable)");
  bind(sustainable, "--fraction", "select.env_fraction", "Lowest-impact fraction kept before grouping");
  bind(sustainable, "--impact-table", "paths.impact_table", "Impact table CSV");

  auto* nutritious = add("select-nutritious", "Most repeated sample among the highest HEI", cmd_select_nutritious);
  bind(nutritious, "--top", "select.top_fraction", "Top fraction by HEI");
  bind(nutritious, "--nutrient-table", "paths.nutrient_table", "Nutrient table CSV");

  auto* personalize = add("personalize", "Most repeated sample among the best personalized scores", cmd_personalize);
  bind(personalize, "--age", "person.age_years", "Age in years");
  bind(personalize, "--sex", "person.sex", "male or female");
  bind(personalize, "--height", "person.height_cm", "Height in cm");
  bind(personalize, "--weight", "person.weight_kg", "Weight in kg");
  bind(personalize, "--activity", "person.activity", "sedentary, moderate, active or very_active");
  bind(personalize, "--top", "select.top_fraction", "Top fraction by personalized score");
  bind(personalize, "--nutrient-table", "paths.nutrient_table", "Nutrient table CSV");

  auto* validate = add("validate", "Fidelity report against the corpus", cmd_validate);
  bind(validate, "--count", "fidelity.count", "Number of sampled masks");

  auto* landscape = add("landscape", "Per-group score table of the sampled batch", cmd_landscape);
  bind(landscape, "--impact-table", "paths.impact_table", "Impact table CSV");
  bind(landscape, "--nutrient-table", "paths.nutrient_table", "Nutrient table CSV");

  std::vector<const char*> argv{"recipeforge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "recipeforge: " << e.what() << "\n" << app.help();
    return 1;
  }

  std::string name;
  for (auto* sub : app.get_subcommands()) name = sub->get_name();

  try {
    Session session{RunConfig{}, "", 1, out};
    RunConfig& cfg = session.config;
    if (config_file) cfg.merge_file(*config_file);
    if (const char* env = std::getenv("RECIPEFORGE_THREADS"); env && *env) cfg.set("threads", env);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (run_dir_flag) cfg.set("paths.run_dir", *run_dir_flag);
    if (seed_flag) cfg.set("seed", std::to_string(*seed_flag));
    if (threads_flag) cfg.set("threads", std::to_string(*threads_flag));
    for (const auto& [key, value] : overrides) cfg.set(key, value);

    session.hash = cfg.hash();
    session.threads = resolve_threads(cfg.integer("threads"));
    write_text(run_dir(session) / "config.resolved", cfg.resolved_text());
    commands.at(name)(session);
    return 0;
  } catch (const NumericError& e) {
    err << "recipeforge " << name << ": numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "recipeforge " << name << ": data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "recipeforge " << name << ": data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "recipeforge " << name << ": usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "recipeforge " << name << ": data error: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace recipeforge::cli
