#include "vcsel/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "vcsel/errors.hpp"

namespace vcsel {

using json = nlohmann::json;

namespace {

// Rejects keys the schema does not know; typos would otherwise be ignored.
void check_keys(const json& j, const std::set<std::string>& known,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string noise_name(NoiseType t) {
  return t == NoiseType::kGlobal ? "global" : "background";
}

NoiseType parse_noise(const std::string& s) {
  if (s == "global") return NoiseType::kGlobal;
  if (s == "background") return NoiseType::kBackground;
  throw ConfigError("noise type must be 'global' or 'background'");
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_keys(j,
             {"input", "bank", "encoding", "sfm", "sim", "calibration",
              "detector", "noise", "mnist", "output_dir", "workers", "export"},
             "config");
  if (j.contains("input")) {
    const json& in = j["input"];
    check_keys(in,
               {"images", "builtin", "channel_policy", "threshold",
                "mnist_images", "mnist_labels", "mnist_count", "mnist_offset",
                "mnist_threshold"},
               "input");
    take(in, "images", c.images);
    take(in, "builtin", c.builtin);
    if (in.contains("channel_policy")) {
      c.channel_policy =
          parse_channel_policy(in["channel_policy"].get<std::string>());
    }
    take(in, "threshold", c.threshold);
    take(in, "mnist_images", c.mnist_images);
    take(in, "mnist_labels", c.mnist_labels);
    take(in, "mnist_count", c.mnist_count);
    take(in, "mnist_offset", c.mnist_offset);
    take(in, "mnist_threshold", c.mnist_threshold);
  }
  take(j, "bank", c.bank);
  if (j.contains("encoding")) {
    const json& e = j["encoding"];
    check_keys(e,
               {"pulse_width_ps", "pulse_separation_ps", "pixel_window_ps",
                "use_3x3_preset"},
               "encoding");
    take(e, "pulse_width_ps", c.encoding.pulse_width_ps);
    take(e, "pulse_separation_ps", c.encoding.pulse_separation_ps);
    take(e, "pixel_window_ps", c.encoding.pixel_window_ps);
    take(e, "use_3x3_preset", c.encoding_3x3_preset);
  }
  if (j.contains("sfm")) {
    const json& s = j["sfm"];
    check_keys(s,
               {"gamma_a", "gamma_p", "gamma_n", "gamma_s", "kappa", "alpha",
                "mu", "k_inj", "beta_sp", "delta_f"},
               "sfm");
    take(s, "gamma_a", c.sfm.gamma_a);
    take(s, "gamma_p", c.sfm.gamma_p);
    take(s, "gamma_n", c.sfm.gamma_n);
    take(s, "gamma_s", c.sfm.gamma_s);
    take(s, "kappa", c.sfm.kappa);
    take(s, "alpha", c.sfm.alpha);
    take(s, "mu", c.sfm.mu);
    take(s, "k_inj", c.sfm.k_inj);
    take(s, "beta_sp", c.sfm.beta_sp);
    take(s, "delta_f", c.sfm.delta_f);
  }
  if (j.contains("sim")) {
    const json& s = j["sim"];
    check_keys(s, {"dt_ps", "rng_seed", "noise_enabled", "record_period_ps"},
               "sim");
    take(s, "dt_ps", c.sim.dt_ps);
    take(s, "rng_seed", c.sim.rng_seed);
    take(s, "noise_enabled", c.sim.noise_enabled);
    take(s, "record_period_ps", c.record_period_ps);
  }
  if (j.contains("calibration")) {
    const json& s = j["calibration"];
    check_keys(s,
               {"baseline_margin", "quiet_sum", "depth_iterations",
                "lock_iterations"},
               "calibration");
    take(s, "baseline_margin", c.baseline_margin);
    if (s.contains("quiet_sum") && !s["quiet_sum"].is_null()) {
      c.quiet_sum = s["quiet_sum"].get<double>();
    }
    take(s, "depth_iterations", c.depth_iterations);
    take(s, "lock_iterations", c.lock_iterations);
  }
  if (j.contains("detector")) {
    check_keys(j["detector"], {"refractory_ns"}, "detector");
    take(j["detector"], "refractory_ns", c.refractory_ns);
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    check_keys(n, {"type", "percentages", "seeds"}, "noise");
    if (n.contains("type")) c.noise.type = parse_noise(n["type"].get<std::string>());
    take(n, "percentages", c.noise.percentages);
    take(n, "seeds", c.noise.seeds);
  }
  if (j.contains("mnist")) {
    check_keys(j["mnist"], {"oracle_only", "simulate_sample"}, "mnist");
    take(j["mnist"], "oracle_only", c.oracle_only);
    take(j["mnist"], "simulate_sample", c.simulate_sample);
  }
  take(j, "output_dir", c.output_dir);
  take(j, "workers", c.workers);
  if (j.contains("export")) {
    check_keys(j["export"], {"traces", "waveform"}, "export");
    take(j["export"], "traces", c.export_traces);
    take(j["export"], "waveform", c.export_waveform);
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["input"] = {{"images", images},
                {"builtin", builtin},
                {"channel_policy", std::string(to_string(channel_policy))},
                {"threshold", threshold},
                {"mnist_images", mnist_images},
                {"mnist_labels", mnist_labels},
                {"mnist_count", mnist_count},
                {"mnist_offset", mnist_offset},
                {"mnist_threshold", mnist_threshold}};
  j["bank"] = bank;
  j["encoding"] = {{"pulse_width_ps", encoding.pulse_width_ps},
                   {"pulse_separation_ps", encoding.pulse_separation_ps},
                   {"pixel_window_ps", encoding.pixel_window_ps},
                   {"use_3x3_preset", encoding_3x3_preset}};
  j["sfm"] = {{"gamma_a", sfm.gamma_a}, {"gamma_p", sfm.gamma_p},
              {"gamma_n", sfm.gamma_n}, {"gamma_s", sfm.gamma_s},
              {"kappa", sfm.kappa},     {"alpha", sfm.alpha},
              {"mu", sfm.mu},           {"k_inj", sfm.k_inj},
              {"beta_sp", sfm.beta_sp}, {"delta_f", sfm.delta_f}};
  j["sim"] = {{"dt_ps", sim.dt_ps},
              {"rng_seed", sim.rng_seed},
              {"noise_enabled", sim.noise_enabled},
              {"record_period_ps", record_period_ps}};
  j["calibration"] = {{"baseline_margin", baseline_margin},
                      {"quiet_sum", quiet_sum ? json(*quiet_sum) : json(nullptr)},
                      {"depth_iterations", depth_iterations},
                      {"lock_iterations", lock_iterations}};
  j["detector"] = {{"refractory_ns", refractory_ns}};
  j["noise"] = {{"type", noise_name(noise.type)},
                {"percentages", noise.percentages},
                {"seeds", noise.seeds}};
  j["mnist"] = {{"oracle_only", oracle_only},
                {"simulate_sample", simulate_sample}};
  j["output_dir"] = output_dir;
  j["workers"] = workers;
  j["export"] = {{"traces", export_traces}, {"waveform", export_waveform}};
  return j;
}

void RunConfig::validate() const {
  sfm.validate();
  if (threshold < 0 || threshold > 255) {
    throw ConfigError("input.threshold must be in 0..255");
  }
  if (mnist_threshold < 1 || mnist_threshold > 255) {
    throw ConfigError("input.mnist_threshold must be in 1..255");
  }
  for (const auto& path : images) {
    if (!std::filesystem::exists(path)) {
      throw ConfigError("image file not found: " + path);
    }
  }
  if (!(sim.dt_ps > 0.0) || !(record_period_ps > 0.0)) {
    throw ConfigError("sim.dt_ps and sim.record_period_ps must be positive");
  }
  if (!(baseline_margin > 0.0)) {
    throw ConfigError("calibration.baseline_margin must be positive");
  }
  if (depth_iterations < 4 || lock_iterations < 4) {
    throw ConfigError("calibration iteration counts must be at least 4");
  }
  if (!(refractory_ns >= 0.0)) {
    throw ConfigError("detector.refractory_ns must be non-negative");
  }
  for (double p : noise.percentages) {
    if (!(p >= 0.0 && p <= 100.0)) {
      throw ConfigError("noise percentages must be within [0, 100]");
    }
  }
  if (noise.seeds == 0) throw ConfigError("noise.seeds must be positive");
  bool known = false;
  for (const auto& name : kernel_bank_names()) known = known || name == bank;
  if (!known) throw ConfigError("unknown kernel bank '" + bank + "'");
}

SimConfig RunConfig::sim_config() const {
  SimConfig s = sim;
  s.duration_ns = 0.0;
  s.record_stride = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(record_period_ps / sim.dt_ps)));
  return s;
}

EncodingConfig RunConfig::encoding_for(const std::vector<KernelOp>& kernels) const {
  EncodingConfig e = encoding;
  if (!kernels.empty() && kernels.front().size() == 9 && encoding_3x3_preset) {
    const EncodingConfig p = EncodingConfig::preset_3x3();
    e.pulse_width_ps = p.pulse_width_ps;
    e.pulse_separation_ps = p.pulse_separation_ps;
  }
  e.sample_period_ps = sim.dt_ps;
  return e;
}

CalibrationOptions RunConfig::calibration_options() const {
  CalibrationOptions o;
  o.sim = sim_config();
  o.baseline_margin = baseline_margin;
  o.depth_iterations = depth_iterations;
  o.lock_iterations = lock_iterations;
  return o;
}

std::uint32_t RunConfig::worker_count() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t RunConfig::hash() const {
  // Execution-only settings do not change results.
  json j = to_json();
  j.erase("workers");
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vcsel
