#include "dualdiff/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dualdiff {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long l = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return l;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer value for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config: bad boolean value for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = value;
  else if (key == "point_value") point_value = parse_double(key, value);
  else if (key == "point_dim") point_dim = static_cast<int>(parse_long(key, value));
  else if (key == "schedule") schedule = value;
  else if (key == "schedule_T") schedule_T = static_cast<int>(parse_long(key, value));
  else if (key == "beta_start") beta_start = parse_double(key, value);
  else if (key == "beta_end") beta_end = parse_double(key, value);
  else if (key == "cosine_s") cosine_s = parse_double(key, value);
  else if (key == "model_hidden") model_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "time_embed") time_embed = static_cast<int>(parse_long(key, value));
  else if (key == "train_steps") train_steps = parse_long(key, value);
  else if (key == "batch") batch = static_cast<int>(parse_long(key, value));
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "ema_decay") ema_decay = parse_double(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "lambda_eps") lambda_eps = parse_double(key, value);
  else if (key == "lambda_x") lambda_x = parse_double(key, value);
  else if (key == "lambda_mu") lambda_mu = parse_double(key, value);
  else if (key == "sample_mode") sample_mode = value;
  else if (key == "sample_method") sample_method = value;
  else if (key == "sample_steps") sample_steps = value;
  else if (key == "sigma_rule") sigma_rule = value;
  else if (key == "eta") eta = parse_double(key, value);
  else if (key == "clamp_enabled") clamp_enabled = parse_bool(key, value);
  else if (key == "clamp_lo") clamp_lo = parse_double(key, value);
  else if (key == "clamp_hi") clamp_hi = parse_double(key, value);
  else if (key == "guard_enabled") guard_enabled = parse_bool(key, value);
  else if (key == "guard_floor") guard_floor = parse_double(key, value);
  else if (key == "n_samples") n_samples = parse_long(key, value);
  else if (key == "record_trajectories") record_trajectories = parse_bool(key, value);
  else if (key == "fixed_r_profile") fixed_r_profile = value;
  else if (key == "diag_n_per_t") diag_n_per_t = static_cast<int>(parse_long(key, value));
  else if (key == "swd_projections") swd_projections = static_cast<int>(parse_long(key, value));
  else if (key == "heldout_n") heldout_n = parse_long(key, value);
  else if (key == "out_dir") out_dir = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                               ": expected key=value");
    cfg.apply(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["dataset"] = dataset;
  kv["point_value"] = fmt_double(point_value);
  kv["point_dim"] = std::to_string(point_dim);
  kv["schedule"] = schedule;
  kv["schedule_T"] = std::to_string(schedule_T);
  kv["beta_start"] = fmt_double(beta_start);
  kv["beta_end"] = fmt_double(beta_end);
  kv["cosine_s"] = fmt_double(cosine_s);
  kv["model_hidden"] = std::to_string(model_hidden);
  kv["time_embed"] = std::to_string(time_embed);
  kv["train_steps"] = std::to_string(train_steps);
  kv["batch"] = std::to_string(batch);
  kv["lr"] = fmt_double(lr);
  kv["ema_decay"] = fmt_double(ema_decay);
  kv["seed"] = std::to_string(seed);
  kv["lambda_eps"] = fmt_double(lambda_eps);
  kv["lambda_x"] = fmt_double(lambda_x);
  kv["lambda_mu"] = fmt_double(lambda_mu);
  kv["sample_mode"] = sample_mode;
  kv["sample_method"] = sample_method;
  kv["sample_steps"] = sample_steps;
  kv["sigma_rule"] = sigma_rule;
  kv["eta"] = fmt_double(eta);
  kv["clamp_enabled"] = clamp_enabled ? "1" : "0";
  kv["clamp_lo"] = fmt_double(clamp_lo);
  kv["clamp_hi"] = fmt_double(clamp_hi);
  kv["guard_enabled"] = guard_enabled ? "1" : "0";
  kv["guard_floor"] = fmt_double(guard_floor);
  kv["n_samples"] = std::to_string(n_samples);
  kv["record_trajectories"] = record_trajectories ? "1" : "0";
  kv["fixed_r_profile"] = fixed_r_profile;
  kv["diag_n_per_t"] = std::to_string(diag_n_per_t);
  kv["swd_projections"] = std::to_string(swd_projections);
  kv["heldout_n"] = std::to_string(heldout_n);
  // out_dir is a location, not part of the experiment identity: reruns into
  // different directories must produce byte-identical artifacts.
  return kv;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_kv()) os << k << "=" << v << "\n";
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    out.push_back(static_cast<int>(parse_long("list", t)));
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated integer list, got '" + csv + "'");
  return out;
}

std::vector<float> parse_float_list(const std::string& csv) {
  std::vector<float> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    out.push_back(static_cast<float>(parse_double("list", t)));
  }
  return out;
}

NoiseSchedule make_schedule(const ExperimentConfig& cfg) {
  if (cfg.schedule == "linear") return make_linear(cfg.schedule_T, cfg.beta_start, cfg.beta_end);
  if (cfg.schedule == "cosine") return make_cosine(cfg.schedule_T, cfg.cosine_s);
  throw std::invalid_argument("config: unknown schedule '" + cfg.schedule + "'");
}

DatasetParams dataset_params(const ExperimentConfig& cfg) {
  DatasetParams p;
  p.point_value = static_cast<float>(cfg.point_value);
  p.point_dim = cfg.point_dim;
  return p;
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.lambda_eps = cfg.lambda_eps;
  t.lambda_x = cfg.lambda_x;
  t.lambda_mu = cfg.lambda_mu;
  return t;
}

StabilityGuard stability_guard(const ExperimentConfig& cfg) {
  return StabilityGuard{cfg.guard_enabled, cfg.guard_floor};
}

SamplerConfig sampler_config(const ExperimentConfig& cfg, int K) {
  SamplerConfig sc;
  sc.mode = path_mode_from_string(cfg.sample_mode);
  sc.method = sample_method_from_string(cfg.sample_method);
  sc.steps = K;
  const std::string rule =
      cfg.sigma_rule == "auto"
          ? (sc.method == SampleMethod::ancestral ? "beta" : "zero")
          : cfg.sigma_rule;
  sc.sigma_rule = sigma_rule_from_string(rule);
  sc.eta = cfg.eta;
  sc.clamp_enabled = cfg.clamp_enabled;
  sc.clamp_lo = static_cast<float>(cfg.clamp_lo);
  sc.clamp_hi = static_cast<float>(cfg.clamp_hi);
  sc.seed = cfg.seed;
  if (sc.mode == PathMode::fixed_r) sc.fixed_r_profile = parse_float_list(cfg.fixed_r_profile);
  sc.guard = stability_guard(cfg);
  return sc;
}

}  // namespace dualdiff
