#include "recipeforge/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "recipeforge/common.hpp"

#ifndef RECIPEFORGE_DATA_DIR
#define RECIPEFORGE_DATA_DIR "data"
#endif

namespace recipeforge {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_path_key(const std::string& key) { return key.rfind("paths.", 0) == 0; }

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"seed", "1"},
      {"threads", "1"},
      {"paths.run_dir", "run"},
      {"paths.raw_input", ""},
      {"paths.synth_spec", ""},
      {"paths.corpus", ""},
      {"paths.impact_table", ""},
      {"paths.impact_normalization", ""},
      {"paths.nutrient_table", ""},
      {"paths.hei_standards", std::string(RECIPEFORGE_DATA_DIR) + "/hei2015_standards.csv"},
      {"paths.reference", ""},
      {"corpus.validation_fraction", "0.1"},
      {"mask.steps", "100"},
      {"mask.beta_start", "0.02"},
      {"mask.beta_end", "0.5"},
      {"mask.iterations", "20000"},
      {"mask.batch_size", "64"},
      {"mask.hidden_width", "32"},
      {"mask.depth", "3"},
      {"mask.learning_rate", "0.002"},
      {"mask.final_lr_fraction", "0.02"},
      {"mask.aux_weight", "0"},
      {"mask.validation_draws", "4"},
      {"quantity.beta_min", "0.1"},
      {"quantity.beta_max", "20"},
      {"quantity.steps", "500"},
      {"quantity.iterations", "20000"},
      {"quantity.batch_size", "64"},
      {"quantity.hidden_width", "64"},
      {"quantity.depth", "3"},
      {"quantity.learning_rate", "0.002"},
      {"quantity.final_lr_fraction", "0.02"},
      {"quantity.t_min", "0.001"},
      {"quantity.validation_draws", "4"},
      {"sample.count", "100000"},
      {"fidelity.count", "100000"},
      {"fidelity.top_k", "10"},
      {"rediscover.budget", "1000000"},
      {"rediscover.chunk", "256"},
      {"select.min_sds", "3"},
      {"select.top_fraction", "0.05"},
      {"select.env_fraction", "0.1"},
      {"select.require", ""},
      {"person.age_years", "15"},
      {"person.sex", "male"},
      {"person.height_cm", "180"},
      {"person.weight_kg", "80"},
      {"person.activity", "active"},
      {"person.meal_fraction", "0.3333333333333333"},
      {"person.sodium_limit_mg", "2000"},
      {"person.free_sugar_limit_pct", "10"},
      {"person.saturated_fat_limit_pct", "10"},
  };
  return kDefaults;
}

RunConfig::RunConfig() {
  for (const auto& [key, value] : defaults()) assign(key, value, std::filesystem::current_path());
}

void RunConfig::assign(const std::string& key, std::string value, const std::filesystem::path& base) {
  if (!defaults().contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  if (is_path_key(key) && !value.empty()) {
    std::filesystem::path p(value);
    if (p.is_relative()) p = base / p;
    value = p.lexically_normal().string();
  }
  values_[key] = std::move(value);
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      assign(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), base);
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  assign(key, value, std::filesystem::current_path());
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  const auto& text = get(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError("config key '" + key + "': expected a number, got '" + text + "'");
  return v;
}

std::uint64_t RunConfig::integer(const std::string& key) const {
  const auto& text = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
  return v;
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::optional<std::filesystem::path> RunConfig::path(const std::string& key) const {
  const auto& v = get(key);
  if (v.empty()) return std::nullopt;
  return std::filesystem::path(v);
}

std::filesystem::path RunConfig::existing_path(const std::string& key) const {
  auto p = path(key);
  if (!p) throw DataError("config key '" + key + "' is not set");
  if (!std::filesystem::exists(*p)) throw DataError(key + ": no such file " + p->string());
  return *p;
}

std::string RunConfig::resolved_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
  return out.str();
}

std::string RunConfig::hash() const { return fnv1a_hex(resolved_text()); }

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
  return derive_seed(config.integer("seed"), static_cast<std::uint64_t>(stage));
}

NoiseSchedule schedule_from(const RunConfig& c) {
  return NoiseSchedule::linear(c.integer("mask.steps"), c.number("mask.beta_start"), c.number("mask.beta_end"));
}

SdeSpec sde_from(const RunConfig& c) {
  SdeSpec sde{c.number("quantity.beta_min"), c.number("quantity.beta_max"), c.integer("quantity.steps")};
  sde.validate();
  return sde;
}

MaskTrainingConfig mask_training_from(const RunConfig& c) {
  MaskTrainingConfig m;
  m.iterations = c.integer("mask.iterations");
  m.batch_size = c.integer("mask.batch_size");
  m.hidden_width = c.integer("mask.hidden_width");
  m.depth = c.integer("mask.depth");
  m.adam.learning_rate = c.number("mask.learning_rate");
  m.final_lr_fraction = c.number("mask.final_lr_fraction");
  m.aux_weight = c.number("mask.aux_weight");
  m.validation_draws = c.integer("mask.validation_draws");
  return m;
}

QuantityTrainingConfig quantity_training_from(const RunConfig& c) {
  QuantityTrainingConfig q;
  q.iterations = c.integer("quantity.iterations");
  q.batch_size = c.integer("quantity.batch_size");
  q.hidden_width = c.integer("quantity.hidden_width");
  q.depth = c.integer("quantity.depth");
  q.adam.learning_rate = c.number("quantity.learning_rate");
  q.final_lr_fraction = c.number("quantity.final_lr_fraction");
  q.t_min = c.number("quantity.t_min");
  q.validation_draws = c.integer("quantity.validation_draws");
  return q;
}

PersonProfile profile_from(const RunConfig& c) {
  PersonProfile p;
  p.age_years = c.number("person.age_years");
  p.height_cm = c.number("person.height_cm");
  p.weight_kg = c.number("person.weight_kg");
  try {
    p.sex = parse_sex(c.get("person.sex"));
    p.activity = parse_activity(c.get("person.activity"));
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("person profile: ") + e.what());
  }
  return p;
}

PersonalizationConfig personalization_from(const RunConfig& c) {
  return {c.number("person.meal_fraction"), c.number("person.sodium_limit_mg"),
          c.number("person.free_sugar_limit_pct"), c.number("person.saturated_fat_limit_pct")};
}

}  // namespace recipeforge
