#include "medgrpo/run_config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "medgrpo/errors.hpp"

namespace medgrpo::cfg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return s.substr(b, e - b);
}

// Comment starts at the first # outside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

struct RawValue {
  std::string text;
  bool quoted = false;
  int line = 0;
};

using Section = std::map<std::string, RawValue>;

std::map<std::string, Section> tokenize(const std::string& text) {
  std::map<std::string, Section> sections;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      }
      if (sections.count(current) != 0) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + current + "]");
      }
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    }
    if (current.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any [section]");
    }
    RawValue raw;
    raw.line = line_no;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
      }
      std::string unescaped;
      for (std::size_t i = 1; i + 1 < value.size(); ++i) {
        if (value[i] == '\\' && i + 2 < value.size()) {
          ++i;
        }
        unescaped += value[i];
      }
      raw.text = unescaped;
      raw.quoted = true;
    } else {
      raw.text = value;
    }
    if (!sections[current].emplace(key, raw).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + current + "." + key);
    }
  }
  return sections;
}

// Typed accessors that consume keys so leftovers can be reported as typos.
class SectionReader {
 public:
  SectionReader(std::string name, const Section* section)
      : name_(std::move(name)), section_(section) {}

  bool present() const { return section_ != nullptr; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const RawValue* raw = take(key);
    if (raw == nullptr) {
      return fallback;
    }
    if (!raw->quoted) {
      throw ConfigError(path(key) + ": expected a quoted string");
    }
    return raw->text;
  }

  double get_double(const std::string& key, double fallback) {
    const RawValue* raw = take(key);
    if (raw == nullptr) {
      return fallback;
    }
    return parse_double(*raw, key);
  }

  int get_int(const std::string& key, int fallback) {
    const RawValue* raw = take(key);
    if (raw == nullptr) {
      return fallback;
    }
    const double v = parse_double(*raw, key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
      throw ConfigError(path(key) + ": expected an integer");
    }
    return i;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const RawValue* raw = take(key);
    if (raw == nullptr) {
      return fallback;
    }
    if (raw->quoted) {
      throw ConfigError(path(key) + ": expected an unsigned integer");
    }
    try {
      std::size_t consumed = 0;
      const std::uint64_t v = std::stoull(raw->text, &consumed);
      if (consumed != raw->text.size()) {
        throw std::invalid_argument("");
      }
      return v;
    } catch (const std::exception&) {
      throw ConfigError(path(key) + ": expected an unsigned integer");
    }
  }

  void finish() {
    if (section_ == nullptr) {
      return;
    }
    for (const auto& [key, raw] : *section_) {
      if (used_.count(key) == 0) {
        throw ConfigError("unknown key " + path(key) + " (line " + std::to_string(raw.line) + ")");
      }
    }
  }

 private:
  const RawValue* take(const std::string& key) {
    if (section_ == nullptr) {
      return nullptr;
    }
    auto it = section_->find(key);
    if (it == section_->end()) {
      return nullptr;
    }
    used_.insert(key);
    return &it->second;
  }

  double parse_double(const RawValue& raw, const std::string& key) const {
    if (raw.quoted) {
      throw ConfigError(path(key) + ": expected a number");
    }
    try {
      std::size_t consumed = 0;
      const double v = std::stod(raw.text, &consumed);
      if (consumed != raw.text.size()) {
        throw std::invalid_argument("");
      }
      return v;
    } catch (const std::exception&) {
      throw ConfigError(path(key) + ": expected a number");
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

  std::string name_;
  const Section* section_;
  std::set<std::string> used_;
};

}  // namespace

void RunConfig::validate() const {
  if (steps < 0) {
    throw ConfigError("run.steps must be non-negative");
  }
  if (output_dir.empty()) {
    throw ConfigError("run.output_dir must be non-empty");
  }
  try {
    train.validate();
    for (const auto& spec : datasets) {
      spec.validate();
    }
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (datasets.empty()) {
    throw ConfigError("at least one [dataset.<id>] section required");
  }
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(const std::string& text) {
  const auto sections = tokenize(text);

  RunConfig out;
  out.hash = fnv1a_hex(text);

  const auto* run_section = sections.count("run") ? &sections.at("run") : nullptr;
  SectionReader run("run", run_section);
  out.mode = sim::parse_score_mode(run.get_string("mode", "normalized"));
  out.steps = run.get_int("steps", out.steps);
  out.output_dir = run.get_string("output_dir", out.output_dir);
  const std::uint64_t seed = run.get_u64("seed", 0);
  run.finish();

  const auto* train_section = sections.count("train") ? &sections.at("train") : nullptr;
  SectionReader train("train", train_section);
  out.train.seed = seed;
  out.train.group_size = train.get_int("group_size", out.train.group_size);
  out.train.learning_rate = train.get_double("learning_rate", out.train.learning_rate);
  out.train.gradient_steps = out.steps;
  out.train.temperature = train.get_double("temperature", out.train.temperature);
  out.train.top_p = train.get_double("top_p", out.train.top_p);
  out.train.clip.eps_low = train.get_double("eps_low", out.train.clip.eps_low);
  out.train.clip.eps_high = train.get_double("eps_high", out.train.clip.eps_high);
  out.train.batch_prompts = train.get_int("batch_prompts", out.train.batch_prompts);
  train.finish();

  for (const auto& [name, section] : sections) {
    if (name == "run" || name == "train") {
      continue;
    }
    if (name.rfind("dataset.", 0) != 0 || name.size() <= 8) {
      throw ConfigError("unknown section [" + name + "]");
    }
    sim::SyntheticDatasetSpec spec;
    spec.dataset_id = name.substr(8);
    SectionReader reader(name, &section);
    const std::string task = reader.get_string("task", to_string(spec.task));
    try {
      spec.task = parse_task_kind(task);
    } catch (const ConfigError&) {
      throw ConfigError(name + ".task: unknown task " + task);
    }
    spec.target_median = reader.get_double("target_median", spec.target_median);
    spec.concentration = reader.get_double("concentration", spec.concentration);
    spec.noise_scale = reader.get_double("noise_scale", spec.noise_scale);
    spec.num_prompts = reader.get_int("num_prompts", spec.num_prompts);
    spec.num_candidates = reader.get_int("num_candidates", spec.num_candidates);
    reader.finish();
    out.datasets.push_back(std::move(spec));
  }

  out.validate();
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace medgrpo::cfg
