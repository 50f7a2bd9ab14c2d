// vcsel-edge: command-line front end for the spiking VCSEL edge detector.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vcsel/config.hpp"
#include "vcsel/errors.hpp"
#include "vcsel/features.hpp"
#include "vcsel/runner.hpp"

namespace {

using vcsel::RunConfig;
using json = nlohmann::json;

// Flags shared by every simulating subcommand. Unset flags leave the config
// file (or the built-in defaults) untouched.
struct Common {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint32_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt_ps;
  std::optional<std::string> bank;
  std::optional<double> quiet_sum;
  std::optional<double> window_ps;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON run configuration");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("-j,--workers", workers, "worker threads (0: all cores)");
    app->add_option("--seed", seed, "master RNG seed");
    app->add_option("--dt-ps", dt_ps, "integration step in ps");
    app->add_option("--bank", bank, "kernel bank name");
    app->add_option("--quiet-sum", quiet_sum,
                    "calibrate against this quiet-burst sum");
    app->add_option("--pixel-window-ps", window_ps, "pixel window in ps");
  }

  // Loads the config; `bank_default`/`quiet_default` apply only when neither
  // the file nor the command line set them.
  RunConfig load(const std::string& bank_default = {},
                 std::optional<double> quiet_default = std::nullopt) const {
    json raw = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw vcsel::ConfigError("cannot open config " + config_path);
      try {
        in >> raw;
      } catch (const json::exception& e) {
        throw vcsel::ConfigError("config " + config_path +
                                 " is not valid JSON: " + e.what());
      }
    }
    RunConfig cfg = RunConfig::from_json(raw);
    if (!bank_default.empty() && !raw.contains("bank")) cfg.bank = bank_default;
    const bool file_quiet =
        raw.contains("calibration") && raw["calibration"].contains("quiet_sum");
    if (quiet_default && !file_quiet) cfg.quiet_sum = quiet_default;
    if (out) cfg.output_dir = *out;
    if (workers) cfg.workers = *workers;
    if (seed) cfg.sim.rng_seed = *seed;
    if (dt_ps) cfg.sim.dt_ps = *dt_ps;
    if (bank) cfg.bank = *bank;
    if (quiet_sum) cfg.quiet_sum = *quiet_sum;
    if (window_ps) {
      cfg.encoding.pixel_window_ps = static_cast<std::int64_t>(*window_ps);
    }
    return cfg;
  }
};

void print_calibration(const vcsel::BankCalibration& cal,
                       const std::vector<vcsel::KernelOp>& kernels) {
  std::printf("lock boundary     %.6f\n", cal.op.lock_boundary);
  std::printf("baseline          %.6f\n", cal.op.baseline_amplitude);
  std::printf("rest power        %.6f\n", cal.op.rest_power);
  std::printf("detect threshold  %.6f\n", cal.detection_threshold);
  for (std::size_t i = 0; i < cal.classes.size(); ++i) {
    const auto& c = cal.classes[i];
    std::printf("class %zu [%s]: depth %.5f (fire %.5f, quiet %.5f) peak %.4f "
                "latency %.3f ns\n",
                i, cal.class_kernels[i].c_str(), c.modulation_depth,
                c.depth_fire, c.depth_quiet, c.spike_peak, c.spike_latency_ns);
  }
  std::printf("%zu kernels calibrated\n", kernels.size());
}

int cmd_calibrate(const Common& common) {
  RunConfig cfg = common.load();
  cfg.validate();
  const auto kernels = vcsel::kernel_bank(cfg.bank);
  const auto ctx = vcsel::make_context(cfg, kernels);
  print_calibration(ctx.calibration, kernels);
  if (!cfg.output_dir.empty()) {
    const auto cal = vcsel::calibration_json(ctx.calibration, kernels);
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir + "/calibration.json") << cal.dump(2) << '\n';
    vcsel::write_manifest(cfg.output_dir, "calibrate", cfg, {{"calibration", cal}});
  }
  return 0;
}

int cmd_edge_detect(const Common& common, const std::vector<std::string>& images,
                    const std::optional<std::string>& builtin,
                    const std::optional<std::string>& channel,
                    const std::optional<int>& threshold, bool traces,
                    bool waveform) {
  RunConfig cfg = common.load();
  if (!images.empty()) cfg.images = images;
  if (builtin) cfg.builtin = *builtin;
  if (channel) cfg.channel_policy = vcsel::parse_channel_policy(*channel);
  if (threshold) cfg.threshold = *threshold;
  cfg.export_traces = cfg.export_traces || traces;
  cfg.export_waveform = cfg.export_waveform || waveform;
  cfg.validate();
  const auto res = vcsel::run_edge_detect(cfg);
  for (std::size_t k = 0; k < res.kernels.size(); ++k) {
    const auto& m = res.kernel_metrics[k];
    std::printf("%-14s active %6zu  tp %6zu fp %4zu fn %4zu  accuracy %.4f\n",
                res.kernels[k].label().c_str(), m.observed_active, m.true_pos,
                m.false_pos, m.false_neg, m.accuracy);
  }
  const auto& c = res.combined_metrics;
  std::printf("%-14s active %6zu  tp %6zu fp %4zu fn %4zu  accuracy %.4f\n",
              "combined", c.observed_active, c.true_pos, c.false_pos,
              c.false_neg, c.accuracy);
  std::printf("simulated optical time %s\n",
              vcsel::format_ps(res.simulated_ps).c_str());
  return 0;
}

int cmd_noise_sweep(const Common& common, const std::optional<std::string>& type,
                    const std::optional<std::uint32_t>& seeds,
                    const std::vector<double>& pcts,
                    const std::optional<std::string>& image) {
  RunConfig cfg = common.load("noise8_2x2", 2.8);
  if (type) {
    if (*type == "global") {
      cfg.noise.type = vcsel::NoiseType::kGlobal;
    } else if (*type == "background") {
      cfg.noise.type = vcsel::NoiseType::kBackground;
    } else {
      throw vcsel::ConfigError("noise type must be 'global' or 'background'");
    }
  }
  if (seeds) cfg.noise.seeds = *seeds;
  if (!pcts.empty()) cfg.noise.percentages = pcts;
  if (image) cfg.images = {*image};
  cfg.validate();
  const auto res = vcsel::run_noise_sweep(cfg);
  std::printf("reference active %zu\n", res.reference_active);
  for (std::size_t j = 0; j < cfg.noise.percentages.size(); ++j) {
    std::printf("pct %5.1f  mean activation loss %.4f\n",
                cfg.noise.percentages[j], res.mean_loss[j]);
  }
  return 0;
}

struct MnistFlags {
  std::optional<std::string> images;
  std::optional<std::string> labels;
  std::optional<std::uint32_t> count;
  std::optional<std::uint32_t> offset;
  std::optional<int> threshold;
  bool oracle_only = false;
  std::optional<std::uint32_t> sample;

  void attach(CLI::App* app) {
    app->add_option("--images", images, "IDX image file");
    app->add_option("--labels", labels, "IDX label file");
    app->add_option("-n,--count", count, "number of images");
    app->add_option("--offset", offset, "first image index");
    app->add_option("--mnist-threshold", threshold, "ink threshold (0-255)");
    app->add_flag("--oracle-only", oracle_only,
                  "compute maps from the oracle instead of the laser");
    app->add_option("--simulate-sample", sample,
                    "spot-check N random windows per image in the laser");
  }

  RunConfig load(const Common& common) const {
    RunConfig cfg = common.load("mnist6_2x2");
    if (images) cfg.mnist_images = *images;
    if (labels) cfg.mnist_labels = *labels;
    if (count) cfg.mnist_count = *count;
    if (offset) cfg.mnist_offset = *offset;
    if (threshold) cfg.mnist_threshold = *threshold;
    cfg.oracle_only = cfg.oracle_only || oracle_only;
    if (sample) cfg.simulate_sample = *sample;
    cfg.validate();
    return cfg;
  }
};

void print_mnist(const vcsel::MnistBatchResult& res) {
  std::printf("images %zu  maps per image %zu  (%s)\n", res.features.size(),
              res.features.front().maps.size(),
              res.oracle_only ? "oracle" : "simulated");
  std::printf("per image %s, batch %s\n", vcsel::format_ps(res.per_image_ps).c_str(),
              vcsel::format_ps(res.simulated_ps).c_str());
  if (res.spot_checks > 0) {
    std::printf("spot checks %zu, mismatches %zu\n", res.spot_checks,
                res.spot_mismatches);
    if (res.spot_mismatches > 0) {
      std::fprintf(stderr, "warning: laser and oracle disagree on %zu windows\n",
                   res.spot_mismatches);
    }
  }
}

int cmd_mnist_run(const Common& common, const MnistFlags& flags) {
  const auto res = vcsel::run_mnist_batch(flags.load(common));
  print_mnist(res);
  return 0;
}

int cmd_export_features(const Common& common, const MnistFlags& flags,
                        const std::string& path) {
  RunConfig cfg = flags.load(common);
  cfg.output_dir.clear();
  const auto res = vcsel::run_mnist_batch(cfg);
  json extra;
  extra["provenance"] = cfg.oracle_only ? "oracle" : "simulated";
  extra["bank"] = cfg.bank;
  extra["source_images"] = cfg.mnist_images;
  extra["source_offset"] = cfg.mnist_offset;
  extra["binarize_threshold"] = cfg.mnist_threshold;
  extra["config_hash"] = cfg.hash();
  vcsel::export_feature_maps(res.features, path, extra);
  // Read back to prove the file is usable.
  const auto back = vcsel::import_feature_maps(path);
  bool same = back.size() == res.features.size();
  for (std::size_t i = 0; same && i < back.size(); ++i) {
    same = back[i].id == res.features[i].id &&
           back[i].label == res.features[i].label &&
           back[i].maps == res.features[i].maps;
  }
  print_mnist(res);
  std::printf("wrote %s (%zu images), read-back %s\n", path.c_str(), back.size(),
              same ? "identical" : "MISMATCH");
  return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"All-optical spiking VCSEL edge detection simulator", "vcsel-edge"};
  app.require_subcommand(0, 1);
  bool dump_defaults_flag = false;
  app.add_flag("--dump-defaults", dump_defaults_flag,
               "print the default configuration as JSON");

  Common common;
  auto* calibrate = app.add_subcommand("calibrate", "calibrate a kernel bank");
  common.attach(calibrate);

  auto* edge = app.add_subcommand("edge-detect", "run edge detection on images");
  common.attach(edge);
  std::vector<std::string> images;
  std::optional<std::string> builtin, channel;
  std::optional<int> threshold;
  bool traces = false, waveform = false;
  edge->add_option("-i,--image", images, "input PNG/PGM/PPM image(s)");
  edge->add_option("--builtin", builtin, "built-in test image (digit4)");
  edge->add_option("--channel", channel, "colour policy: average|red|green|blue");
  edge->add_option("--threshold", threshold, "binarization threshold (0-255)");
  edge->add_flag("--export-traces", traces, "write power traces as CSV");
  edge->add_flag("--export-waveform", waveform, "write injection waveforms (VWAV)");

  auto* noise = app.add_subcommand("noise-sweep", "activation loss versus noise");
  common.attach(noise);
  std::optional<std::string> noise_type, noise_image;
  std::optional<std::uint32_t> noise_seeds;
  std::vector<double> pcts;
  noise->add_option("--type", noise_type, "global|background");
  noise->add_option("--seeds", noise_seeds, "noise realisations per percentage");
  noise->add_option("--pct", pcts, "noise percentages")->delimiter(',');
  noise->add_option("-i,--image", noise_image, "input image (default digit4)");

  auto* mnist = app.add_subcommand("mnist-run", "MNIST feature extraction batch");
  common.attach(mnist);
  MnistFlags mnist_flags;
  mnist_flags.attach(mnist);

  auto* exportf = app.add_subcommand("export-features",
                                     "write MNIST feature maps to a VSFM file");
  Common export_common;
  export_common.attach(exportf);
  MnistFlags export_flags;
  export_flags.attach(exportf);
  std::string export_path;
  exportf->add_option("-f,--file", export_path, "VSFM output path")->required();

  auto* dump = app.add_subcommand("dump-defaults", "print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (dump_defaults_flag || dump->parsed()) {
      std::cout << RunConfig::defaults().to_json().dump(2) << '\n';
      return 0;
    }
    if (calibrate->parsed()) return cmd_calibrate(common);
    if (edge->parsed()) {
      return cmd_edge_detect(common, images, builtin, channel, threshold, traces,
                             waveform);
    }
    if (noise->parsed()) {
      return cmd_noise_sweep(common, noise_type, noise_seeds, pcts, noise_image);
    }
    if (mnist->parsed()) return cmd_mnist_run(common, mnist_flags);
    if (exportf->parsed()) {
      return cmd_export_features(export_common, export_flags, export_path);
    }
    std::cerr << app.help();
    return 2;
  } catch (const vcsel::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
