#include "adamct/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace adamct {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return "";
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true/false, got '" + v + "'");
}

std::int64_t parse_int(const std::string& v) {
  std::size_t used = 0;
  const std::int64_t out = std::stoll(v, &used);
  if (used != v.size()) {
    throw ConfigError("expected an integer, got '" + v + "'");
  }
  return out;
}

Index parse_index(const std::string& v) {
  const std::int64_t out = parse_int(v);
  if (out < 0) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<Index>(out);
}

double parse_real(const std::string& v) {
  std::size_t used = 0;
  const double out = std::stod(v, &used);
  if (used != v.size()) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(static_cast<int>(parse_int(trim(cur))));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) {
    out.push_back(static_cast<int>(parse_int(trim(cur))));
  }
  if (out.empty()) {
    throw ConfigError("expected a comma-separated integer list, got '" + v + "'");
  }
  return out;
}

char parse_delimiter(const std::string& v) {
  if (v == "tab") return '\t';
  if (v.size() != 1) {
    throw ConfigError("delimiter must be one character or 'tab', got '" + v + "'");
  }
  return v[0];
}

std::string delimiter_to_string(char c) {
  return c == '\t' ? "tab" : std::string(1, c);
}

std::string pattern_to_string(SyntheticPattern p) {
  switch (p) {
    case SyntheticPattern::kCyclic: return "cyclic";
    case SyntheticPattern::kMarkov: return "markov";
    case SyntheticPattern::kUniform: return "uniform";
  }
  return "?";
}

SyntheticPattern pattern_from_string(const std::string& v) {
  if (v == "cyclic") return SyntheticPattern::kCyclic;
  if (v == "markov") return SyntheticPattern::kMarkov;
  if (v == "uniform") return SyntheticPattern::kUniform;
  throw ConfigError("unknown pattern '" + v + "' (cyclic|markov|uniform)");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

// Single source of truth for every config key; the parser, the override
// mechanism, and the serializer all walk this table.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source",
       [](RunConfig& c, const std::string& v) {
         if (v == "synthetic") {
           c.data.source = DataConfig::Source::kSynthetic;
         } else if (v == "file") {
           c.data.source = DataConfig::Source::kFile;
         } else {
           throw ConfigError("expected synthetic|file, got '" + v + "'");
         }
       }},
      {"data.path", [](RunConfig& c, const std::string& v) { c.data.path = v; }},
      {"data.delimiter",
       [](RunConfig& c, const std::string& v) { c.data.delimiter = parse_delimiter(v); }},
      {"data.header",
       [](RunConfig& c, const std::string& v) { c.data.header = parse_bool(v); }},
      {"data.malformed_threshold",
       [](RunConfig& c, const std::string& v) { c.data.malformed_threshold = parse_real(v); }},
      {"data.sliding_window",
       [](RunConfig& c, const std::string& v) { c.data.sliding_window = parse_bool(v); }},
      {"data.pattern",
       [](RunConfig& c, const std::string& v) { c.data.synthetic.pattern = pattern_from_string(v); }},
      {"data.num_users",
       [](RunConfig& c, const std::string& v) { c.data.synthetic.num_users = parse_index(v); }},
      {"data.num_items",
       [](RunConfig& c, const std::string& v) { c.data.synthetic.num_items = parse_index(v); }},
      {"data.min_len",
       [](RunConfig& c, const std::string& v) { c.data.synthetic.min_len = parse_index(v); }},
      {"data.max_len",
       [](RunConfig& c, const std::string& v) { c.data.synthetic.max_len = parse_index(v); }},
      {"data.markov_table",
       [](RunConfig& c, const std::string& v) { c.data.markov_table_path = v; }},

      {"model.d_model",
       [](RunConfig& c, const std::string& v) { c.model.d_model = parse_index(v); }},
      {"model.layers",
       [](RunConfig& c, const std::string& v) { c.model.num_layers = parse_index(v); }},
      {"model.heads",
       [](RunConfig& c, const std::string& v) { c.model.num_heads = parse_index(v); }},
      {"model.kernel",
       [](RunConfig& c, const std::string& v) { c.model.kernel_size = parse_index(v); }},
      {"model.reduction",
       [](RunConfig& c, const std::string& v) { c.model.reduction = parse_index(v); }},
      {"model.conv_activation",
       [](RunConfig& c, const std::string& v) { c.model.conv_activation = act_kind_from_string(v); }},
      {"model.max_len",
       [](RunConfig& c, const std::string& v) { c.model.max_len = parse_index(v); }},
      {"model.dropout_hidden",
       [](RunConfig& c, const std::string& v) { c.model.dropout_hidden = parse_real(v); }},
      {"model.dropout_attn",
       [](RunConfig& c, const std::string& v) { c.model.dropout_attn = parse_real(v); }},
      {"model.seatt_local",
       [](RunConfig& c, const std::string& v) { c.model.seatt_local = seatt_score_from_string(v); }},
      {"model.seatt_global",
       [](RunConfig& c, const std::string& v) { c.model.seatt_global = seatt_score_from_string(v); }},
      {"model.mixture_mode",
       [](RunConfig& c, const std::string& v) { c.model.mixture_mode = mixture_mode_from_string(v); }},
      {"model.alpha0",
       [](RunConfig& c, const std::string& v) { c.model.alpha0 = parse_real(v); }},
      {"model.conv_padding",
       [](RunConfig& c, const std::string& v) { c.model.conv_padding = conv_padding_from_string(v); }},
      {"model.seatt_enabled",
       [](RunConfig& c, const std::string& v) { c.model.seatt_enabled = parse_bool(v); }},

      {"train.lr", [](RunConfig& c, const std::string& v) { c.train.lr = parse_real(v); }},
      {"train.beta1", [](RunConfig& c, const std::string& v) { c.train.beta1 = parse_real(v); }},
      {"train.beta2", [](RunConfig& c, const std::string& v) { c.train.beta2 = parse_real(v); }},
      {"train.adam_eps", [](RunConfig& c, const std::string& v) { c.train.adam_eps = parse_real(v); }},
      {"train.weight_decay",
       [](RunConfig& c, const std::string& v) { c.train.weight_decay = parse_real(v); }},
      {"train.max_epochs",
       [](RunConfig& c, const std::string& v) { c.train.max_epochs = static_cast<int>(parse_int(v)); }},
      {"train.patience",
       [](RunConfig& c, const std::string& v) { c.train.patience = static_cast<int>(parse_int(v)); }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_index(v); }},
      {"train.seed",
       [](RunConfig& c, const std::string& v) { c.train.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"train.eval_every",
       [](RunConfig& c, const std::string& v) { c.train.eval_every = static_cast<int>(parse_int(v)); }},
      {"train.clip_norm",
       [](RunConfig& c, const std::string& v) { c.train.clip_norm = parse_real(v); }},

      {"eval.negatives",
       [](RunConfig& c, const std::string& v) { c.eval.negatives = parse_index(v); }},
      {"eval.ks", [](RunConfig& c, const std::string& v) { c.eval.ks = parse_int_list(v); }},
      {"eval.seed",
       [](RunConfig& c, const std::string& v) { c.eval.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"eval.split", [](RunConfig& c, const std::string& v) { c.eval.split = v; }},

      {"gradcheck.batch_size",
       [](RunConfig& c, const std::string& v) { c.gradcheck.batch_size = parse_index(v); }},
      {"gradcheck.seed",
       [](RunConfig& c, const std::string& v) { c.gradcheck.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"gradcheck.eps",
       [](RunConfig& c, const std::string& v) { c.gradcheck.eps = parse_real(v); }},
      {"gradcheck.max_coords",
       [](RunConfig& c, const std::string& v) { c.gradcheck.max_coords = parse_index(v); }},
      {"gradcheck.threshold",
       [](RunConfig& c, const std::string& v) { c.gradcheck.threshold = parse_real(v); }},

      {"output.dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"output.deterministic",
       [](RunConfig& c, const std::string& v) { c.deterministic = parse_bool(v); }},
  };
  return table;
}

std::vector<std::string> validate_run_config(const RunConfig& c) {
  std::vector<std::string> problems;

  if (c.data.source == DataConfig::Source::kFile) {
    if (c.data.path.empty()) {
      problems.push_back("data.path: required when data.source=file");
    }
  } else {
    if (c.data.synthetic.num_items < 5) {
      problems.push_back("data.num_items: synthetic catalogs need >= 5 items");
    }
    if (c.data.synthetic.min_len < 5) {
      problems.push_back("data.min_len: must be >= 5 (5-core contract)");
    }
    if (c.data.synthetic.min_len > c.data.synthetic.max_len) {
      problems.push_back("data.min_len: exceeds data.max_len");
    }
    if (c.data.synthetic.num_users == 0) {
      problems.push_back("data.num_users: must be >= 1");
    }
    if (c.data.synthetic.pattern == SyntheticPattern::kMarkov &&
        c.data.markov_table_path.empty()) {
      problems.push_back("data.markov_table: required for data.pattern=markov");
    }
  }
  if (c.data.malformed_threshold < 0.0 || c.data.malformed_threshold > 1.0) {
    problems.push_back("data.malformed_threshold: must lie in [0, 1]");
  }

  // num_items is derived from the data; validate the rest of the model now.
  ModelConfig m = c.model;
  if (m.num_items == 0) m.num_items = 1;
  for (const std::string& p : m.validate()) problems.push_back(p);

  for (const std::string& p : c.train.validate()) problems.push_back(p);
  for (const std::string& p : c.eval.validate()) problems.push_back(p);

  if (c.gradcheck.eps <= 0.0) problems.push_back("gradcheck.eps: must be > 0");
  if (c.gradcheck.threshold <= 0.0) problems.push_back("gradcheck.threshold: must be > 0");
  if (c.gradcheck.batch_size == 0) problems.push_back("gradcheck.batch_size: must be >= 1");
  if (c.out_dir.empty()) problems.push_back("output.dir: must not be empty");

  return problems;
}

[[noreturn]] void throw_listing(const std::string& origin,
                                const std::vector<std::string>& problems) {
  std::string joined = "invalid config (" + origin + "):";
  for (const std::string& p : problems) joined += "\n  - " + p;
  throw ConfigError(joined);
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& origin) {
  RunConfig config;
  std::vector<std::string> problems;
  std::string section;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back("line " + std::to_string(line_no) +
                           ": malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) +
                         ": expected key = value, got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string dotted = section.empty() ? key : section + "." + key;

    const auto it = setters().find(dotted);
    if (it == setters().end()) {
      problems.push_back(dotted + ": unknown key (line " +
                         std::to_string(line_no) + ")");
      continue;
    }
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      problems.push_back(dotted + ": " + e.what());
    }
  }

  for (const std::string& p : validate_run_config(config)) {
    problems.push_back(p);
  }
  if (!problems.empty()) {
    throw_listing(origin, problems);
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  return parse_run_config(in, path);
}

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[data]\n";
  os << "source = "
     << (c.data.source == DataConfig::Source::kFile ? "file" : "synthetic")
     << "\n";
  os << "path = " << c.data.path << "\n";
  os << "delimiter = " << delimiter_to_string(c.data.delimiter) << "\n";
  os << "header = " << (c.data.header ? "true" : "false") << "\n";
  os << "malformed_threshold = " << format_double(c.data.malformed_threshold) << "\n";
  os << "sliding_window = " << (c.data.sliding_window ? "true" : "false") << "\n";
  os << "pattern = " << pattern_to_string(c.data.synthetic.pattern) << "\n";
  os << "num_users = " << c.data.synthetic.num_users << "\n";
  os << "num_items = " << c.data.synthetic.num_items << "\n";
  os << "min_len = " << c.data.synthetic.min_len << "\n";
  os << "max_len = " << c.data.synthetic.max_len << "\n";
  os << "markov_table = " << c.data.markov_table_path << "\n";
  os << "\n[model]\n";
  os << "d_model = " << c.model.d_model << "\n";
  os << "layers = " << c.model.num_layers << "\n";
  os << "heads = " << c.model.num_heads << "\n";
  os << "kernel = " << c.model.kernel_size << "\n";
  os << "reduction = " << c.model.reduction << "\n";
  os << "conv_activation = " << to_string(c.model.conv_activation) << "\n";
  os << "max_len = " << c.model.max_len << "\n";
  os << "dropout_hidden = " << format_double(c.model.dropout_hidden) << "\n";
  os << "dropout_attn = " << format_double(c.model.dropout_attn) << "\n";
  os << "seatt_local = " << to_string(c.model.seatt_local) << "\n";
  os << "seatt_global = " << to_string(c.model.seatt_global) << "\n";
  os << "mixture_mode = " << to_string(c.model.mixture_mode) << "\n";
  os << "alpha0 = " << format_double(c.model.alpha0) << "\n";
  os << "conv_padding = " << to_string(c.model.conv_padding) << "\n";
  os << "seatt_enabled = " << (c.model.seatt_enabled ? "true" : "false") << "\n";
  os << "\n[train]\n";
  os << "lr = " << format_double(c.train.lr) << "\n";
  os << "beta1 = " << format_double(c.train.beta1) << "\n";
  os << "beta2 = " << format_double(c.train.beta2) << "\n";
  os << "adam_eps = " << format_double(c.train.adam_eps) << "\n";
  os << "weight_decay = " << format_double(c.train.weight_decay) << "\n";
  os << "max_epochs = " << c.train.max_epochs << "\n";
  os << "patience = " << c.train.patience << "\n";
  os << "batch_size = " << c.train.batch_size << "\n";
  os << "seed = " << c.train.seed << "\n";
  os << "eval_every = " << c.train.eval_every << "\n";
  os << "clip_norm = " << format_double(c.train.clip_norm) << "\n";
  os << "\n[eval]\n";
  os << "negatives = " << c.eval.negatives << "\n";
  os << "ks = ";
  for (Index i = 0; i < c.eval.ks.size(); ++i) {
    os << (i ? "," : "") << c.eval.ks[i];
  }
  os << "\n";
  os << "seed = " << c.eval.seed << "\n";
  os << "split = " << c.eval.split << "\n";
  os << "\n[gradcheck]\n";
  os << "batch_size = " << c.gradcheck.batch_size << "\n";
  os << "seed = " << c.gradcheck.seed << "\n";
  os << "eps = " << format_double(c.gradcheck.eps) << "\n";
  os << "max_coords = " << c.gradcheck.max_coords << "\n";
  os << "threshold = " << format_double(c.gradcheck.threshold) << "\n";
  os << "\n[output]\n";
  os << "dir = " << c.out_dir << "\n";
  os << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
  return os.str();
}

void apply_override(RunConfig& config, const std::string& dotted_key,
                    const std::string& value) {
  const auto it = setters().find(dotted_key);
  if (it == setters().end()) {
    throw ConfigError(dotted_key + ": unknown key");
  }
  try {
    it->second(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(dotted_key + ": " + e.what());
  }
}

namespace {

std::vector<std::vector<double>> load_markov_table(const std::string& path,
                                                   Index num_items) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("markov table: cannot open '" + path + "'");
  }
  std::vector<std::vector<double>> table;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        row.push_back(parse_real(trim(cur)));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!trim(cur).empty()) row.push_back(parse_real(trim(cur)));
    table.push_back(std::move(row));
  }
  if (table.size() != num_items) {
    throw ConfigError("markov table: " + std::to_string(table.size()) +
                      " rows for " + std::to_string(num_items) + " items");
  }
  return table;
}

}  // namespace

Dataset build_dataset(const RunConfig& config) {
  if (config.data.source == DataConfig::Source::kFile) {
    IngestOptions opts;
    opts.delimiter = config.data.delimiter;
    opts.header = config.data.header;
    opts.malformed_threshold = config.data.malformed_threshold;
    return build_sequences(ingest_interactions_file(config.data.path, opts));
  }
  SyntheticSpec spec = config.data.synthetic;
  if (spec.pattern == SyntheticPattern::kMarkov) {
    spec.markov_table =
        load_markov_table(config.data.markov_table_path, spec.num_items);
  }
  RngState rng = RngState(config.train.seed).child(0xDA7A);
  return generate_synthetic(spec, rng);
}

}  // namespace adamct
