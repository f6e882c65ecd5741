#include "srcl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace srcl {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt(xs[i]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Access>
Field size_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = static_cast<std::size_t>(parse_u64(v)); }};
}

template <typename Access>
Field u64_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) { return std::to_string(access(const_cast<ExperimentConfig&>(c))); },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_u64(v); }};
}

template <typename Access>
Field double_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) { return fmt_double(access(const_cast<ExperimentConfig&>(c))); },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_double(v); }};
}

template <typename Access>
Field bool_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) {
            return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(v); }};
}

template <typename Access>
Field double_list_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) { return join(access(const_cast<ExperimentConfig&>(c)), fmt_double); },
          [access](ExperimentConfig& c, const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(parse_double(item));
            access(c) = std::move(out);
          }};
}

template <typename Access>
Field size_list_field(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) {
            return join(access(const_cast<ExperimentConfig&>(c)), [](std::size_t v) { return std::to_string(v); });
          },
          [access](ExperimentConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& item : split_list(v)) out.push_back(static_cast<std::size_t>(parse_u64(item)));
            access(c) = std::move(out);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    // [world]
    f.push_back(size_field("world", "n_concepts", [](ExperimentConfig& c) -> auto& { return c.world.n_concepts; }));
    f.push_back(size_field("world", "dim_a", [](ExperimentConfig& c) -> auto& { return c.world.dim_a; }));
    f.push_back(size_field("world", "dim_b", [](ExperimentConfig& c) -> auto& { return c.world.dim_b; }));
    f.push_back(size_field("world", "latent_dim", [](ExperimentConfig& c) -> auto& { return c.world.latent_dim; }));
    f.push_back(double_field("world", "emb_noise", [](ExperimentConfig& c) -> auto& { return c.world.emb_noise; }));
    f.push_back(
        size_field("world", "instance_dim", [](ExperimentConfig& c) -> auto& { return c.world.instance_dim; }));
    f.push_back(
        double_field("world", "instance_scale", [](ExperimentConfig& c) -> auto& { return c.world.instance_scale; }));
    f.push_back(size_field("world", "n_clusters", [](ExperimentConfig& c) -> auto& { return c.world.n_clusters; }));
    f.push_back(
        double_field("world", "cluster_spread", [](ExperimentConfig& c) -> auto& { return c.world.cluster_spread; }));
    f.push_back(
        double_field("world", "false_neg_rate", [](ExperimentConfig& c) -> auto& { return c.world.false_neg_rate; }));
    f.push_back(double_field("world", "partial_overlap",
                             [](ExperimentConfig& c) -> auto& { return c.world.partial_overlap; }));
    f.push_back(u64_field("world", "seed", [](ExperimentConfig& c) -> auto& { return c.world.seed; }));
    // [train]
    f.push_back(size_field("train", "steps", [](ExperimentConfig& c) -> auto& { return c.train.steps; }));
    f.push_back(size_field("train", "teacher_steps", [](ExperimentConfig& c) -> auto& { return c.teacher_steps; }));
    f.push_back(size_field("train", "batch", [](ExperimentConfig& c) -> auto& { return c.train.batch; }));
    f.push_back(
        double_field("train", "learning_rate", [](ExperimentConfig& c) -> auto& { return c.train.learning_rate; }));
    f.push_back(double_field("train", "momentum", [](ExperimentConfig& c) -> auto& { return c.train.momentum; }));
    f.push_back(double_field("train", "temperature", [](ExperimentConfig& c) -> auto& { return c.train.temperature; }));
    f.push_back({"train", "loss", [](const ExperimentConfig& c) { return std::string(to_string(c.train.loss)); },
                 [](ExperimentConfig& c, const std::string& v) { c.train.loss = loss_kind_from_string(v); }});
    f.push_back(u64_field("train", "seed", [](ExperimentConfig& c) -> auto& { return c.train.seed; }));
    f.push_back(size_field("train", "emb_dim", [](ExperimentConfig& c) -> auto& { return c.train.emb_dim; }));
    f.push_back(size_field("train", "hidden_dim", [](ExperimentConfig& c) -> auto& { return c.train.hidden_dim; }));
    f.push_back(double_field("train", "init_scale", [](ExperimentConfig& c) -> auto& { return c.train.init_scale; }));
    f.push_back(bool_field("train", "init_from_teacher",
                           [](ExperimentConfig& c) -> auto& { return c.train.init_from_teacher; }));
    f.push_back({"train", "out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v.empty()) throw std::invalid_argument("out_dir must not be empty");
                   c.out_dir = v;
                 }});
    // [regulator]
    f.push_back(double_field("regulator", "delta", [](ExperimentConfig& c) -> auto& { return c.train.regulator.delta; }));
    f.push_back({"regulator", "alpha_schedule",
                 [](const ExperimentConfig& c) { return c.train.regulator.alpha_schedule.to_string(); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.regulator.alpha_schedule = AlphaSchedule::parse(v);
                 }});
    f.push_back(double_field("regulator", "weight_floor",
                             [](ExperimentConfig& c) -> auto& { return c.train.regulator.weight_floor; }));
    f.push_back(bool_field("regulator", "use_temperature_in_weights",
                           [](ExperimentConfig& c) -> auto& { return c.train.regulator.use_temperature_in_weights; }));
    f.push_back(double_field("regulator", "similarity_scale",
                             [](ExperimentConfig& c) -> auto& { return c.train.regulator.similarity_scale; }));
    // [verify]
    f.push_back(double_list_field("verify", "bsc_agree", [](ExperimentConfig& c) -> auto& { return c.verify.bsc_agree; }));
    f.push_back(size_list_field("verify", "eq2_batch_sizes",
                                [](ExperimentConfig& c) -> auto& { return c.verify.eq2_batch_sizes; }));
    f.push_back(size_field("verify", "n_batches", [](ExperimentConfig& c) -> auto& { return c.verify.n_batches; }));
    f.push_back(
        double_field("verify", "eq3_bsc_agree", [](ExperimentConfig& c) -> auto& { return c.verify.eq3_bsc_agree; }));
    f.push_back(double_list_field("verify", "eq3_etas", [](ExperimentConfig& c) -> auto& { return c.verify.eq3_etas; }));
    f.push_back(size_list_field("verify", "eq3_batch_sizes",
                                [](ExperimentConfig& c) -> auto& { return c.verify.eq3_batch_sizes; }));
    f.push_back(double_field("verify", "deterministic_eta",
                             [](ExperimentConfig& c) -> auto& { return c.verify.deterministic_eta; }));
    f.push_back(
        size_field("verify", "deterministic_k", [](ExperimentConfig& c) -> auto& { return c.verify.deterministic_k; }));
    f.push_back(
        size_field("verify", "jensen_samples", [](ExperimentConfig& c) -> auto& { return c.verify.jensen_samples; }));
    f.push_back(size_field("verify", "controllability_samples",
                           [](ExperimentConfig& c) -> auto& { return c.verify.controllability_samples; }));
    f.push_back(size_field("verify", "controllability_negatives",
                           [](ExperimentConfig& c) -> auto& { return c.verify.controllability_negatives; }));
    f.push_back(size_field("verify", "gradcheck_instances",
                           [](ExperimentConfig& c) -> auto& { return c.verify.gradcheck_instances; }));
    f.push_back(double_list_field("verify", "gradcheck_temperatures",
                                  [](ExperimentConfig& c) -> auto& { return c.verify.gradcheck_temperatures; }));
    f.push_back(u64_field("verify", "seed", [](ExperimentConfig& c) -> auto& { return c.verify.seed; }));
    // [eval]
    f.push_back(size_field("eval", "n_val", [](ExperimentConfig& c) -> auto& { return c.eval.n_val; }));
    f.push_back(u64_field("eval", "val_salt", [](ExperimentConfig& c) -> auto& { return c.eval.val_salt; }));
    f.push_back(double_list_field("eval", "thresholds", [](ExperimentConfig& c) -> auto& { return c.eval.thresholds; }));
    f.push_back(size_field("eval", "sweep_steps", [](ExperimentConfig& c) -> auto& { return c.eval.sweep_steps; }));
    f.push_back(
        size_field("eval", "histogram_batches", [](ExperimentConfig& c) -> auto& { return c.eval.histogram_batches; }));
    f.push_back(size_field("eval", "histogram_bins", [](ExperimentConfig& c) -> auto& { return c.eval.histogram_bins; }));
    f.push_back(double_field("eval", "histogram_max", [](ExperimentConfig& c) -> auto& { return c.eval.histogram_max; }));
    return f;
  }();
  return all;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& s) {
  return s == "world" || s == "train" || s == "regulator" || s == "verify" || s == "eval";
}

void validate(const ExperimentConfig& c) {
  c.world.validate();
  c.train.validate();
  if (c.verify.n_batches == 0) throw std::invalid_argument("verify.n_batches must be positive");
  for (std::size_t n : c.verify.eq2_batch_sizes) {
    if (n < 2) throw std::invalid_argument("verify batch sizes must be >= 2");
  }
  for (std::size_t n : c.verify.eq3_batch_sizes) {
    if (n < 2) throw std::invalid_argument("verify batch sizes must be >= 2");
  }
  for (double p : c.verify.bsc_agree) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("verify.bsc_agree entries must lie in (0, 1)");
  }
  if (!(c.verify.eq3_bsc_agree > 0.0 && c.verify.eq3_bsc_agree < 1.0)) {
    throw std::invalid_argument("verify.eq3_bsc_agree must lie in (0, 1)");
  }
  for (double e : c.verify.eq3_etas) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("verify.eq3_etas entries must lie in [0, 1]");
  }
  if (!(c.verify.deterministic_eta >= 0.0 && c.verify.deterministic_eta <= 1.0)) {
    throw std::invalid_argument("verify.deterministic_eta must lie in [0, 1]");
  }
  if (c.verify.deterministic_k < 2) throw std::invalid_argument("verify.deterministic_k must be >= 2");
  for (double t : c.verify.gradcheck_temperatures) {
    if (!(t > 0.0)) throw std::invalid_argument("verify.gradcheck_temperatures must be positive");
  }
  if (c.eval.n_val < 2 || c.eval.n_val > c.world.n_concepts) {
    throw std::invalid_argument("eval.n_val must lie in [2, world.n_concepts]");
  }
  for (std::size_t i = 0; i < c.eval.thresholds.size(); ++i) {
    const double t = c.eval.thresholds[i];
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("eval.thresholds must lie in [0, 1]");
    if (i > 0 && !(t > c.eval.thresholds[i - 1])) throw std::invalid_argument("eval.thresholds must be ascending");
  }
  if (c.eval.histogram_bins == 0 || !(c.eval.histogram_max > 0.0)) {
    throw std::invalid_argument("eval histogram binning must be positive");
  }
}

}  // namespace

TrainConfig ExperimentConfig::teacher_config() const {
  TrainConfig t = train;
  t.loss = LossKind::infonce;
  if (teacher_steps > 0) t.steps = teacher_steps;
  return t;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.world.n_concepts = 4096;
  c.world.dim_a = 32;
  c.world.dim_b = 32;
  c.world.latent_dim = 16;
  c.world.emb_noise = 0.1;
  c.world.instance_dim = 8;
  c.world.instance_scale = 0.5;
  c.world.false_neg_rate = 0.3;
  c.world.partial_overlap = 0.5;
  c.world.seed = 1;
  c.train.steps = 2000;
  c.train.batch = 64;
  c.train.learning_rate = 0.05;
  c.train.momentum = 0.9;
  c.train.temperature = 0.1;
  c.train.loss = LossKind::srcl;
  c.train.emb_dim = 16;
  c.train.init_scale = 1.0;
  c.train.seed = 1;
  c.train.regulator.similarity_scale = 3.0;
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg = default_config();
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!known_section(section)) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
    if (section.empty()) throw ConfigError(line_no, "key outside of any section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Field* field = find_field(section, key);
    if (field == nullptr) throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert({section, key}).second) {
      throw ConfigError(line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    try {
      field->set(cfg, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(line_no, section + "." + key + ": " + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(0, std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string write_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError(0, "override '" + std::string(assignment) + "' is not of the form section.key=value");
  }
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const std::string value = trim(assignment.substr(eq + 1));
  const Field* field = find_field(section, key);
  if (field == nullptr) throw ConfigError(0, "override names unknown key '" + section + "." + key + "'");
  ExperimentConfig next = cfg;
  try {
    field->set(next, value);
    validate(next);
  } catch (const std::exception& e) {
    throw ConfigError(0, "override '" + std::string(assignment) + "': " + e.what());
  }
  cfg = std::move(next);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(write_config(cfg))));
  return buf;
}

}  // namespace srcl
