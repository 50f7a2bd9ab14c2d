#include "vcsel/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "vcsel/errors.hpp"
#include "vcsel/image_io.hpp"

namespace vcsel {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::int64_t predicted_runtime_ps(const RunLayout& layout) {
  return static_cast<std::int64_t>(layout.windows.size()) *
         layout.pixel_window_ps;
}

std::int64_t predicted_runtime_ps(std::int64_t out_width,
                                  std::int64_t out_height,
                                  std::int64_t kernels, std::int64_t images,
                                  std::int64_t pixel_window_ps) {
  if (out_width < 0 || out_height < 0 || kernels < 0 || images < 0 ||
      pixel_window_ps <= 0) {
    throw ConfigError("runtime factors must be non-negative");
  }
  return out_width * out_height * kernels * images * pixel_window_ps;
}

std::string format_ps(std::int64_t ps) {
  struct Unit {
    std::int64_t scale;
    const char* name;
  };
  static constexpr Unit kUnits[] = {
      {1'000'000'000'000, "s"}, {1'000'000'000, "ms"}, {1'000'000, "us"},
      {1'000, "ns"},            {1, "ps"}};
  const bool neg = ps < 0;
  const std::int64_t v = neg ? -ps : ps;
  for (const Unit& u : kUnits) {
    if (v < u.scale && u.scale != 1) continue;
    std::int64_t whole = v / u.scale;
    std::int64_t frac = v % u.scale;
    std::string digits;
    if (frac != 0) {
      int width = 0;
      for (std::int64_t s = u.scale; s > 1; s /= 10) ++width;
      std::ostringstream f;
      f << std::setw(width) << std::setfill('0') << frac;
      digits = f.str();
      while (!digits.empty() && digits.back() == '0') digits.pop_back();
    }
    std::ostringstream os;
    if (neg) os << '-';
    os << whole;
    if (!digits.empty()) os << '.' << digits;
    os << ' ' << u.name;
    return os.str();
  }
  return "0 ps";
}

PixelImage builtin_image(std::string_view name) {
  if (name != "digit4") {
    throw ConfigError("unknown built-in image '" + std::string(name) + "'");
  }
  // Printed "4": slanted left arm, crossbar and upright stem.
  PixelImage img(32, 32, -1.0);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const bool stem = c >= 19 && c <= 22 && r >= 4 && r <= 27;
      const bool bar = r >= 18 && r <= 20 && c >= 6 && c <= 26;
      const bool arm = r >= 4 && r <= 18 && r + c >= 23 && r + c <= 26;
      if (stem || bar || arm) img.set(r, c, 1.0);
    }
  }
  return img;
}

std::vector<PixelImage> load_input_images(const RunConfig& cfg) {
  std::vector<PixelImage> out;
  for (const auto& path : cfg.images) {
    out.push_back(binarize(read_image(path), cfg.channel_policy, cfg.threshold));
  }
  if (out.empty()) {
    out.push_back(builtin_image(cfg.builtin.empty() ? "digit4" : cfg.builtin));
  }
  return out;
}

std::uint64_t task_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ (b * 0xd1b54a32d192ed03ull));
}

void parallel_for(std::size_t n, std::uint32_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads =
      std::min<std::size_t>(n, std::max<std::uint32_t>(1, workers));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        // Keep the lowest failing index so the reported error is stable.
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

PipelineContext make_context(const RunConfig& cfg,
                             const std::vector<KernelOp>& kernels) {
  PipelineContext ctx;
  ctx.params = cfg.sfm;
  ctx.encoding = cfg.encoding_for(kernels);
  ctx.sim = cfg.sim_config();
  ctx.refractory_ns = cfg.refractory_ns;
  ctx.calibration = calibrate_bank(ctx.params, ctx.encoding, kernels,
                                   cfg.calibration_options(), cfg.quiet_sum);
  ctx.encoding.baseline_amplitude = ctx.calibration.op.baseline_amplitude;
  return ctx;
}

namespace {

EncodingConfig kernel_encoding(const PipelineContext& ctx,
                               std::size_t kernel_index) {
  EncodingConfig e = ctx.encoding;
  e.modulation_depth = ctx.calibration.kernel_depth.at(kernel_index);
  e.baseline_amplitude = ctx.calibration.op.baseline_amplitude;
  e.sample_period_ps = ctx.sim.dt_ps;
  return e;
}

SpikeTrain run_wave(const PipelineContext& ctx, const InjectionWaveform& wave,
                    std::uint64_t seed, const std::string& trace_csv) {
  SimConfig sim = ctx.sim;
  sim.rng_seed = seed;
  SpikeDetector det(ctx.calibration.detection_threshold, ctx.refractory_ns);
  std::ofstream trace;
  if (!trace_csv.empty()) {
    trace.open(trace_csv);
    if (!trace) throw ConfigError("cannot open " + trace_csv + " for writing");
    trace << "t_ns,power_x,power_y\n";
    trace.precision(10);
  }
  simulate_stream(wave, ctx.params, sim, ctx.calibration.op.rest_state,
                  [&](double t, double px, double py) {
                    det.push(t, px + py);
                    if (trace.is_open()) {
                      trace << t << ',' << px << ',' << py << '\n';
                    }
                  });
  return det.take();
}

double oracle_boundary(const RunConfig& cfg, const KernelOp& k) {
  return cfg.quiet_sum ? 0.5 * (k.target_sum() + *cfg.quiet_sum)
                       : k.decision_boundary();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

ojson metrics_json(const DetectionMetrics& m) {
  return ojson::parse(m.to_json());
}

}  // namespace

KernelRun simulate_kernel(const PipelineContext& ctx,
                          const std::vector<PixelImage>& images,
                          const KernelOp& kernel, std::size_t kernel_index,
                          std::uint64_t seed, const std::string& trace_csv) {
  if (images.empty()) throw ConfigError("no images to simulate");
  std::vector<HadamardField> fields;
  fields.reserve(images.size());
  for (const auto& img : images) fields.push_back(hadamard_field(img, kernel));
  std::vector<FieldSlot> slots;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    slots.push_back({&fields[i], static_cast<std::uint32_t>(kernel_index),
                     static_cast<std::uint32_t>(i)});
  }
  const InjectionWaveform wave =
      encode_run(slots, kernel_encoding(ctx, kernel_index), ctx.params.delta_f);
  KernelRun run;
  run.train = run_wave(ctx, wave, seed, trace_csv);
  run.simulated_ps = predicted_runtime_ps(wave.layout);
  for (auto& d : demultiplex(run.train, wave.layout)) {
    d.map.set_label(kernel.label());
    run.maps.push_back(std::move(d.map));
  }
  return run;
}

bool simulate_window(const PipelineContext& ctx, std::span<const double> products,
                     std::size_t kernel_index, std::uint64_t seed) {
  const InjectionWaveform wave = encode_pixel_burst(
      products, kernel_encoding(ctx, kernel_index), ctx.params.delta_f);
  return run_wave(ctx, wave, seed, {}).size() > 0;
}

ojson calibration_json(const BankCalibration& cal,
                       const std::vector<KernelOp>& kernels) {
  ojson j;
  j["lock_boundary"] = cal.op.lock_boundary;
  j["baseline_amplitude"] = cal.op.baseline_amplitude;
  j["rest_power"] = cal.op.rest_power;
  j["detection_threshold"] = cal.detection_threshold;
  j["rest_state"] = {{"e_x", {cal.op.rest_state.e_x.real(), cal.op.rest_state.e_x.imag()}},
                     {"e_y", {cal.op.rest_state.e_y.real(), cal.op.rest_state.e_y.imag()}},
                     {"n_total", cal.op.rest_state.n_total},
                     {"n_spin", cal.op.rest_state.n_spin}};
  ojson classes = ojson::array();
  for (std::size_t i = 0; i < cal.classes.size(); ++i) {
    const auto& c = cal.classes[i];
    classes.push_back({{"kernels", cal.class_kernels[i]},
                       {"modulation_depth", c.modulation_depth},
                       {"depth_fire", c.depth_fire},
                       {"depth_quiet", c.depth_quiet},
                       {"spike_peak", c.spike_peak},
                       {"class_threshold", c.detection_threshold},
                       {"spike_latency_ns", c.spike_latency_ns}});
  }
  j["classes"] = classes;
  ojson per_kernel = ojson::array();
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    per_kernel.push_back({{"label", kernels[k].label()},
                          {"weights", kernels[k].weights()},
                          {"target_sum", kernels[k].target_sum()},
                          {"max_quiet_sum", kernels[k].max_quiet_sum()},
                          {"modulation_depth", cal.kernel_depth[k]}});
  }
  j["kernels"] = per_kernel;
  return j;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const RunConfig& cfg, const ojson& extra) {
  ensure_dir(dir);
  nlohmann::json config = cfg.to_json();
  config.erase("workers");
  config.erase("output_dir");
  ojson m;
  m["tool"] = "vcsel-edge";
  m["version"] = "0.1.0";
  m["command"] = command;
  m["config_hash"] = hex64(cfg.hash());
  m["config"] = config;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

EdgeDetectResult run_edge_detect(const RunConfig& cfg,
                                 const std::vector<PixelImage>& images) {
  if (images.empty()) throw ConfigError("edge detection needs an image");
  EdgeDetectResult res;
  res.kernels = kernel_bank(cfg.bank);
  const PipelineContext ctx = make_context(cfg, res.kernels);
  res.calibration = ctx.calibration;
  const std::string& out = cfg.output_dir;
  if (!out.empty()) ensure_dir(out + "/maps");

  const std::size_t nk = res.kernels.size();
  std::vector<KernelRun> runs(nk);
  parallel_for(nk, cfg.worker_count(), [&](std::size_t k) {
    std::string trace;
    if (!out.empty() && cfg.export_traces) {
      trace = out + "/trace_" + res.kernels[k].label() + ".csv";
    }
    runs[k] = simulate_kernel(ctx, images, res.kernels[k], k,
                              task_seed(cfg.sim.rng_seed, k), trace);
  });

  res.maps.assign(images.size(), {});
  res.oracle.assign(images.size(), {});
  std::vector<std::vector<DetectionMetrics>> per_kernel(nk);
  std::vector<DetectionMetrics> combined_parts;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t k = 0; k < nk; ++k) {
      res.maps[i].push_back(runs[k].maps[i]);
      res.oracle[i].push_back(reference_edges(images[i], res.kernels[k],
                                              oracle_boundary(cfg, res.kernels[k])));
      per_kernel[k].push_back(score(res.maps[i][k], res.oracle[i][k]));
    }
    res.combined.push_back(combine_maps(res.maps[i]));
    res.combined_oracle.push_back(combine_maps(res.oracle[i]));
    combined_parts.push_back(score(res.combined[i], res.combined_oracle[i]));
  }
  for (auto& parts : per_kernel) res.kernel_metrics.push_back(merge_metrics(parts));
  res.combined_metrics = merge_metrics(combined_parts);
  for (const auto& r : runs) res.simulated_ps += r.simulated_ps;

  if (!out.empty()) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      const std::string stem = out + "/maps/img" + std::to_string(i) + "_";
      write_pgm(stem + "source.pgm", images[i]);
      for (std::size_t k = 0; k < nk; ++k) {
        res.maps[i][k].write_pgm(stem + res.kernels[k].label() + ".pgm");
      }
      res.combined[i].write_pgm(stem + "combined.pgm");
      res.combined_oracle[i].write_pgm(stem + "combined_oracle.pgm");
    }
    for (std::size_t k = 0; k < nk; ++k) {
      runs[k].train.write_csv(out + "/spikes_" + res.kernels[k].label() + ".csv");
      if (cfg.export_waveform) {
        std::vector<HadamardField> fields;
        for (const auto& img : images) fields.push_back(hadamard_field(img, res.kernels[k]));
        std::vector<FieldSlot> slots;
        for (std::size_t i = 0; i < fields.size(); ++i) {
          slots.push_back({&fields[i], static_cast<std::uint32_t>(k),
                           static_cast<std::uint32_t>(i)});
        }
        write_vwav(out + "/waveform_" + res.kernels[k].label() + ".vwav",
                   encode_run(slots, kernel_encoding(ctx, k), ctx.params.delta_f));
      }
    }
    ojson metrics;
    for (std::size_t k = 0; k < nk; ++k) {
      metrics["kernels"][res.kernels[k].label()] = metrics_json(res.kernel_metrics[k]);
    }
    metrics["combined"] = metrics_json(res.combined_metrics);
    metrics["simulated_time_ps"] = res.simulated_ps;
    metrics["simulated_time"] = format_ps(res.simulated_ps);
    write_text(out + "/metrics.json", metrics.dump(2) + "\n");
    const ojson cal = calibration_json(res.calibration, res.kernels);
    write_text(out + "/calibration.json", cal.dump(2) + "\n");
    ojson seeds = ojson::array();
    for (std::size_t k = 0; k < nk; ++k) seeds.push_back(task_seed(cfg.sim.rng_seed, k));
    write_manifest(out, "edge-detect", cfg,
                   {{"task_seeds", seeds}, {"calibration", cal},
                    {"image_count", images.size()}});
  }
  return res;
}

EdgeDetectResult run_edge_detect(const RunConfig& cfg) {
  return run_edge_detect(cfg, load_input_images(cfg));
}

NoiseSweepResult run_noise_sweep(const RunConfig& cfg, const PixelImage& image) {
  const std::vector<KernelOp> kernels = kernel_bank(cfg.bank);
  const PipelineContext ctx = make_context(cfg, kernels);
  NoiseSweepResult res;
  res.calibration = ctx.calibration;
  const std::size_t nk = kernels.size();
  const std::uint32_t workers = cfg.worker_count();
  const bool global = cfg.noise.type == NoiseType::kGlobal;
  const std::string type_name = global ? "global" : "background";

  // Clean reference run and oracle.
  std::vector<ReconstructedMap> clean(nk);
  std::vector<ReconstructedMap> oracle(nk);
  parallel_for(nk, workers, [&](std::size_t k) {
    clean[k] = simulate_kernel(ctx, {image}, kernels[k], k,
                               task_seed(cfg.sim.rng_seed, k))
                   .maps.front();
    oracle[k] = reference_edges(image, kernels[k], oracle_boundary(cfg, kernels[k]));
  });
  for (const auto& m : clean) res.reference_active += m.active_count();

  std::vector<std::size_t> noisy_pct;  // indices of pct > 0
  for (std::size_t j = 0; j < cfg.noise.percentages.size(); ++j) {
    if (cfg.noise.percentages[j] > 0.0) noisy_pct.push_back(j);
  }
  const std::uint32_t seeds = cfg.noise.seeds;
  auto noise_seed = [&](std::uint32_t s, std::size_t j) {
    return task_seed(cfg.sim.rng_seed, 0x5eed0000ull + s, j);
  };

  // One multiplexed run per (seed, kernel) carrying every noisy image.
  std::vector<std::vector<ReconstructedMap>> noisy(
      static_cast<std::size_t>(seeds) * nk);
  if (!noisy_pct.empty()) {
    parallel_for(noisy.size(), workers, [&](std::size_t t) {
      const auto s = static_cast<std::uint32_t>(t / nk);
      const std::size_t k = t % nk;
      std::vector<PixelImage> imgs;
      for (std::size_t j : noisy_pct) {
        const double pct = cfg.noise.percentages[j];
        imgs.push_back(global ? apply_global_noise(image, pct, noise_seed(s, j))
                              : apply_background_noise(image, pct, noise_seed(s, j)));
      }
      noisy[t] = simulate_kernel(ctx, imgs, kernels[k], k,
                                 task_seed(cfg.sim.rng_seed, k, 1 + t))
                     .maps;
    });
  }

  const double ref = static_cast<double>(res.reference_active);
  for (std::uint32_t s = 0; s < seeds; ++s) {
    for (std::size_t j = 0; j < cfg.noise.percentages.size(); ++j) {
      NoiseRow row;
      row.noise_type = type_name;
      row.pct = cfg.noise.percentages[j];
      row.seed_index = s;
      row.seed = noise_seed(s, j);
      std::vector<DetectionMetrics> parts;
      const auto pos = std::find(noisy_pct.begin(), noisy_pct.end(), j);
      for (std::size_t k = 0; k < nk; ++k) {
        const ReconstructedMap& m =
            pos == noisy_pct.end()
                ? clean[k]
                : noisy[s * nk + k][static_cast<std::size_t>(pos - noisy_pct.begin())];
        parts.push_back(score(m, oracle[k], &clean[k]));
      }
      const DetectionMetrics total = merge_metrics(parts);
      row.active_count = total.observed_active;
      row.activation_loss =
          ref > 0.0 ? 1.0 - static_cast<double>(row.active_count) / ref : 0.0;
      row.accuracy = total.accuracy;
      res.rows.push_back(row);
    }
  }
  res.mean_loss.assign(cfg.noise.percentages.size(), 0.0);
  for (const auto& r : res.rows) {
    const auto j = static_cast<std::size_t>(
        std::find(cfg.noise.percentages.begin(), cfg.noise.percentages.end(), r.pct) -
        cfg.noise.percentages.begin());
    res.mean_loss[j] += r.activation_loss / seeds;
  }

  if (!cfg.output_dir.empty()) {
    const std::string& out = cfg.output_dir;
    ensure_dir(out);
    std::ostringstream csv;
    csv << "noise_type,pct,seed,active_count,activation_loss,accuracy\n";
    csv.precision(10);
    for (const auto& r : res.rows) {
      csv << r.noise_type << ',' << r.pct << ',' << r.seed << ','
          << r.active_count << ',' << r.activation_loss << ',' << r.accuracy
          << '\n';
    }
    write_text(out + "/sweep.csv", csv.str());
    ojson summary;
    summary["noise_type"] = type_name;
    summary["reference_active"] = res.reference_active;
    for (std::size_t j = 0; j < cfg.noise.percentages.size(); ++j) {
      summary["mean_activation_loss"].push_back(
          {{"pct", cfg.noise.percentages[j]}, {"mean", res.mean_loss[j]}});
    }
    write_text(out + "/summary.json", summary.dump(2) + "\n");
    const ojson cal = calibration_json(res.calibration, kernels);
    write_text(out + "/calibration.json", cal.dump(2) + "\n");
    write_manifest(out, "noise-sweep", cfg, {{"calibration", cal}});
  }
  return res;
}

NoiseSweepResult run_noise_sweep(const RunConfig& cfg) {
  return run_noise_sweep(cfg, load_input_images(cfg).front());
}

MnistBatchResult run_mnist_batch(const RunConfig& cfg, const MnistSet& set) {
  if (cfg.mnist_count == 0) throw ConfigError("MNIST batch needs at least one image");
  if (static_cast<std::size_t>(cfg.mnist_offset) + cfg.mnist_count > set.size()) {
    throw ConfigError("MNIST selection exceeds the dataset size");
  }
  const std::vector<KernelOp> kernels = kernel_bank(cfg.bank);
  const std::size_t nk = kernels.size();
  const std::size_t n = cfg.mnist_count;
  std::vector<PixelImage> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    images.push_back(mnist_image(set, cfg.mnist_offset + i, cfg.mnist_threshold));
  }

  MnistBatchResult res;
  res.oracle_only = cfg.oracle_only;
  const bool need_laser = !cfg.oracle_only || cfg.simulate_sample > 0;
  PipelineContext ctx;
  if (need_laser) {
    ctx = make_context(cfg, kernels);
    res.calibration = ctx.calibration;
  }
  const std::uint32_t workers = cfg.worker_count();

  std::vector<std::vector<ReconstructedMap>> maps(n, std::vector<ReconstructedMap>(nk));
  if (cfg.oracle_only) {
    parallel_for(n, workers, [&](std::size_t i) {
      for (std::size_t k = 0; k < nk; ++k) {
        maps[i][k] = reference_edges(images[i], kernels[k],
                                     oracle_boundary(cfg, kernels[k]));
      }
    });
  } else {
    // Fixed chunking keeps task boundaries independent of the worker count.
    constexpr std::size_t kChunk = 25;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks * nk, workers, [&](std::size_t t) {
      const std::size_t c = t / nk;
      const std::size_t k = t % nk;
      const std::size_t lo = c * kChunk;
      const std::size_t hi = std::min(n, lo + kChunk);
      std::vector<PixelImage> part(images.begin() + static_cast<long>(lo),
                                   images.begin() + static_cast<long>(hi));
      KernelRun run = simulate_kernel(ctx, part, kernels[k], k,
                                      task_seed(cfg.sim.rng_seed, k, c));
      for (std::size_t i = lo; i < hi; ++i) maps[i][k] = std::move(run.maps[i - lo]);
    });
  }

  // Spot checks: random windows per image through the full simulation.
  std::vector<std::size_t> mismatches(n, 0);
  std::vector<std::vector<std::array<std::uint32_t, 4>>> checked(n);
  if (cfg.simulate_sample > 0) {
    parallel_for(n, workers, [&](std::size_t i) {
      std::mt19937_64 rng(task_seed(cfg.sim.rng_seed, 0xc4ec0000ull + i));
      const ReconstructedMap& probe_map = maps[i].front();
      const auto per_kernel = static_cast<std::uint64_t>(probe_map.width()) *
                              probe_map.height();
      std::uniform_int_distribution<std::uint64_t> pick(0, per_kernel * nk - 1);
      for (std::uint32_t s = 0; s < cfg.simulate_sample; ++s) {
        const std::uint64_t w = pick(rng);
        const auto k = static_cast<std::size_t>(w / per_kernel);
        const auto pix = w % per_kernel;
        const int row = static_cast<int>(pix / probe_map.width());
        const int col = static_cast<int>(pix % probe_map.width());
        const HadamardField field = hadamard_field(images[i], kernels[k]);
        const bool fired = simulate_window(ctx, field.products_at(row, col), k,
                                           task_seed(cfg.sim.rng_seed, i, w));
        const bool expected = maps[i][k].at(row, col);
        if (fired != expected) ++mismatches[i];
        checked[i].push_back({static_cast<std::uint32_t>(k),
                              static_cast<std::uint32_t>(row),
                              static_cast<std::uint32_t>(col), fired ? 1u : 0u});
      }
    });
  }
  for (std::size_t i = 0; i < n; ++i) {
    res.spot_checks += checked[i].size();
    res.spot_mismatches += mismatches[i];
  }

  for (std::size_t i = 0; i < n; ++i) {
    FeatureMapSet fs;
    fs.id = static_cast<std::uint32_t>(cfg.mnist_offset + i);
    fs.label = set.labels[cfg.mnist_offset + i];
    fs.maps = std::move(maps[i]);
    for (std::size_t k = 0; k < nk; ++k) fs.maps[k].set_label(kernels[k].label());
    res.features.push_back(std::move(fs));
  }
  const auto& first = res.features.front().maps.front();
  const std::int64_t window = cfg.encoding_for(kernels).pixel_window_ps;
  res.per_image_ps = predicted_runtime_ps(first.width(), first.height(),
                                          static_cast<std::int64_t>(nk), 1, window);
  res.simulated_ps = predicted_runtime_ps(first.width(), first.height(),
                                          static_cast<std::int64_t>(nk),
                                          static_cast<std::int64_t>(n), window);

  if (!cfg.output_dir.empty()) {
    const std::string& out = cfg.output_dir;
    ensure_dir(out);
    ojson provenance;
    provenance["provenance"] = cfg.oracle_only ? "oracle" : "simulated";
    provenance["bank"] = cfg.bank;
    provenance["source_images"] = cfg.mnist_images;
    provenance["source_offset"] = cfg.mnist_offset;
    provenance["binarize_threshold"] = cfg.mnist_threshold;
    export_feature_maps(res.features, out + "/features.vsfm", provenance);
    ojson timing;
    timing["images"] = n;
    timing["kernels"] = nk;
    timing["pixel_window_ps"] = window;
    timing["per_image_ps"] = res.per_image_ps;
    timing["per_image"] = format_ps(res.per_image_ps);
    timing["batch_ps"] = res.simulated_ps;
    timing["batch"] = format_ps(res.simulated_ps);
    timing["images_per_second"] = 1e12 / static_cast<double>(res.per_image_ps);
    write_text(out + "/timing.json", timing.dump(2) + "\n");
    if (cfg.simulate_sample > 0) {
      std::ostringstream csv;
      csv << "image,kernel,row,col,fired,expected\n";
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& c : checked[i]) {
          csv << cfg.mnist_offset + i << ',' << kernels[c[0]].label() << ','
              << c[1] << ',' << c[2] << ',' << c[3] << ','
              << (res.features[i].maps[c[0]].at(static_cast<int>(c[1]),
                                                static_cast<int>(c[2]))
                      ? 1
                      : 0)
              << '\n';
        }
      }
      write_text(out + "/spot_checks.csv", csv.str());
    }
    ojson extra;
    extra["spot_checks"] = res.spot_checks;
    extra["spot_mismatches"] = res.spot_mismatches;
    extra["timing"] = timing;
    if (need_laser) extra["calibration"] = calibration_json(res.calibration, kernels);
    write_manifest(out, "mnist-run", cfg, extra);
  }
  return res;
}

MnistBatchResult run_mnist_batch(const RunConfig& cfg) {
  if (cfg.mnist_images.empty() || cfg.mnist_labels.empty()) {
    throw ConfigError("MNIST run needs input.mnist_images and input.mnist_labels");
  }
  return run_mnist_batch(cfg, load_mnist_idx(cfg.mnist_images, cfg.mnist_labels));
}

}  // namespace vcsel
