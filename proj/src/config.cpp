#include "i2drnn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace i2drnn {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      {"seed", "0"},
      {"out", "out"},
      {"threads", "1"},
      {"format", "json"},
      {"task", "copy2"},  // copy2 | copy3 | farima | csv
      {"samples", "200"},
      {"copy.channels", "80"},
      {"copy.s1", "10"},
      {"copy.s2", "10"},
      {"copy.s3", "10"},
      {"copy.t1", "15"},
      {"copy.t2", "15"},
      {"copy.t3", "15"},
      {"farima.ar", "0.9"},
      {"farima.d", "0.1"},
      {"farima.q", "0"},
      {"farima.series", "20"},
      {"farima.length", "3000"},
      {"farima.burn_in", "1000"},
      {"farima.truncation", "1000"},
      {"csv.target", ""},
      {"csv.same", ""},
      {"csv.coarse", ""},
      {"csv.fine", ""},
      {"csv.coarse_ratio", "1"},
      {"csv.fine_ratio", "1"},
      {"csv.target_history", "true"},
      {"split.ratios", "auto"},     // auto: 0.7,0,0.3 for sample sets, 0.64,0.16,0.2 for one sequence
      {"split.val_carve", "auto"},  // auto: 0.2 for sample sets, 0 otherwise
      {"split.train_window", "100"},
      {"model.arch", "I2DRNN"},
      {"model.layers", "10,10"},
      {"model.encoder_dim", "0"},
      {"train.step_size", "0.001"},
      {"train.max_epochs", "500"},
      {"train.patience", "20"},
      {"train.grad_clip", "0"},
      {"train.rec_radius", "0.9"},
      {"train.mode", "per_sample"},  // per_sample | full_epoch
      {"train.resume", ""},
      {"eval.checkpoint", ""},
      {"eval.split", "test"},
      {"mi.bins", "30"},
      {"mi.max_lag", "30"},
      {"mi.pairing", "matched"},  // matched | all_pairs
      {"mi.bias_correction", "true"},
      {"mi.max_joint_cells", "1000000"},
      {"capacity.a", ""},  // a and k given: use g = a k^tau instead of fitting the data
      {"capacity.k", ""},
      {"capacity.layers", "2"},
      {"capacity.grid", "20:20:300"},
      {"capacity.eta", "1"},
      {"capacity.hx", "auto"},
      {"capacity.tau_max", "0"},
      {"capacity.tol", "0.01"},
      {"diagnose.model", "checkpoint"},  // checkpoint | zero | init
      {"diagnose.max_lag", "30"},
      {"diagnose.bins", "10"},
      {"diagnose.region", "0"},
      {"diagnose.top_k", "5"},
      {"experiment.seeds", "5"},
      {"experiment.search_seeds", "3"},
      {"experiment.farima_series", "5,10"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("config: " + key + " = '" + v + "' is not a valid number");
  return out;
}

}  // namespace

Config::Config() : values_(defaults()) {}

Config Config::parse(std::string_view text) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (!c.known(key)) throw ConfigError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    c.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool Config::known(const std::string& key) const { return defaults().count(key) > 0; }

void Config::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = trim(value);
}

void Config::set_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + kv + "'");
  set(trim(std::string_view(kv).substr(0, eq)), kv.substr(eq + 1));
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
std::size_t Config::get_size(const std::string& key) const { return parse_number<std::size_t>(key, get(key)); }
std::uint64_t Config::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " = '" + v + "' is not a boolean");
}

std::vector<std::size_t> Config::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& s : split_commas(get(key))) out.push_back(parse_number<std::size_t>(key, s));
  if (out.empty()) throw ConfigError("config: " + key + " is empty");
  return out;
}

std::vector<long> Config::get_lags(const std::string& key) const {
  std::vector<long> out;
  for (const auto& s : split_commas(get(key))) out.push_back(parse_number<long>(key, s));
  return out;
}

std::string Config::resolved() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
  return s;
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << resolved();
}

std::vector<std::string> Config::keys() {
  std::vector<std::string> k;
  for (const auto& [key, v] : defaults()) k.push_back(key);
  return k;
}

std::vector<std::size_t> size_grid(const std::string& s) {
  if (s.find(':') != std::string::npos) {
    std::vector<std::size_t> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(parse_number<std::size_t>("grid", trim(item)));
    if (parts.size() != 3 || parts[1] == 0 || parts[2] < parts[0]) throw ConfigError("grid: expected from:step:to, got '" + s + "'");
    std::vector<std::size_t> g;
    for (std::size_t h = parts[0]; h <= parts[2]; h += parts[1]) g.push_back(h);
    return g;
  }
  std::vector<std::size_t> g;
  for (const auto& item : split_commas(s)) g.push_back(parse_number<std::size_t>("grid", item));
  if (g.empty()) throw ConfigError("grid: empty");
  return g;
}

CopyTaskSpec copy_spec(const Config& c) {
  CopyTaskSpec s;
  const std::string& task = c.get("task");
  if (task != "copy2" && task != "copy3") throw ConfigError("copy_spec: task is '" + task + "'");
  s.scales = task == "copy3" ? 3 : 2;
  s.channels = c.get_size("copy.channels");
  s.s1 = c.get_size("copy.s1");
  s.s2 = c.get_size("copy.s2");
  s.s3 = c.get_size("copy.s3");
  s.t1 = c.get_size("copy.t1");
  s.t2 = c.get_size("copy.t2");
  s.t3 = c.get_size("copy.t3");
  s.validate();
  return s;
}

FarimaSpec farima_spec(const Config& c) {
  FarimaSpec s;
  s.ar = c.get_double("farima.ar");
  s.d = c.get_double("farima.d");
  s.ma = c.get_size("farima.q");
  s.series = c.get_size("farima.series");
  s.length = c.get_size("farima.length");
  s.burn_in = c.get_size("farima.burn_in");
  s.truncation = c.get_size("farima.truncation");
  s.validate();
  return s;
}

Hyper hyper(const Config& c) {
  Hyper h;
  h.step_size = c.get_double("train.step_size");
  h.max_epochs = c.get_size("train.max_epochs");
  h.patience = c.get_size("train.patience");
  h.grad_clip = c.get_double("train.grad_clip");
  h.rec_radius = c.get_double("train.rec_radius");
  h.seed = c.get_u64("seed");
  const std::string& m = c.get("train.mode");
  if (m == "per_sample") {
    h.mode = UpdateMode::PerSample;
  } else if (m == "full_epoch") {
    h.mode = UpdateMode::FullEpoch;
  } else {
    throw ConfigError("config: train.mode must be per_sample or full_epoch");
  }
  h.validate();
  return h;
}

MiOptions mi_options(const Config& c) {
  MiOptions o;
  o.bins = c.get_size("mi.bins");
  const std::string& p = c.get("mi.pairing");
  if (p == "matched") {
    o.pairing = MiPairing::Matched;
  } else if (p == "all_pairs") {
    o.pairing = MiPairing::AllPairs;
  } else {
    throw ConfigError("config: mi.pairing must be matched or all_pairs");
  }
  o.bias_correction = c.get_bool("mi.bias_correction");
  o.max_joint_cells = c.get_double("mi.max_joint_cells");
  return o;
}

CapacityOptions capacity_options(const Config& c) {
  CapacityOptions o;
  o.eta = c.get_double("capacity.eta");
  if (c.get("capacity.hx") != "auto") o.hx = c.get_double("capacity.hx");
  o.tau_max = c.get_size("capacity.tau_max");
  o.tol = c.get_double("capacity.tol");
  return o;
}

SequenceDataset build_dataset(const Config& c) {
  const std::string& task = c.get("task");
  const std::uint64_t seed = c.get_u64("seed");
  SequenceDataset raw;
  if (task == "copy2" || task == "copy3") {
    raw = gen_copy_task(copy_spec(c), c.get_size("samples"), Rng(seed).split("data"));
  } else if (task == "farima") {
    raw = gen_farima(farima_spec(c), Rng(seed).split("data"));
  } else if (task == "csv") {
    CsvSeriesSpec s;
    if (c.get("csv.target").empty()) throw ConfigError("config: csv.target is required for task = csv");
    s.target = c.get("csv.target");
    if (!c.get("csv.same").empty()) s.same = c.get("csv.same");
    if (!c.get("csv.coarse").empty()) s.coarse = c.get("csv.coarse");
    if (!c.get("csv.fine").empty()) s.fine = c.get("csv.fine");
    s.coarse_ratio = c.get_size("csv.coarse_ratio");
    s.fine_ratio = c.get_size("csv.fine_ratio");
    s.target_history = c.get_bool("csv.target_history");
    raw = load_csv_series(s);
  } else {
    throw ConfigError("config: unknown task '" + task + "'");
  }
  SplitRatios r = raw.single_sequence ? SplitRatios{0.64, 0.16, 0.2} : SplitRatios{0.7, 0.0, 0.3};
  if (c.get("split.ratios") != "auto") {
    std::vector<double> v;
    std::stringstream ss(c.get("split.ratios"));
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_number<double>("split.ratios", trim(item)));
    if (v.size() != 3) throw ConfigError("config: split.ratios needs three values train,val,test");
    r = {v[0], v[1], v[2]};
  }
  SplitOptions so;
  so.val_carve = c.get("split.val_carve") == "auto" ? (raw.single_sequence ? 0.0 : 0.2) : c.get_double("split.val_carve");
  if (raw.single_sequence) so.train_window = c.get_size("split.train_window");
  return normalize_split(std::move(raw), r, so);
}

ModelConfig model_config(const Config& c, const SequenceDataset& ds) {
  auto cfg = ds.model_config(c.get_sizes("model.layers"), parse_arch(c.get("model.arch")), c.get_size("model.encoder_dim"));
  cfg.validate();
  return cfg;
}

}  // namespace i2drnn
