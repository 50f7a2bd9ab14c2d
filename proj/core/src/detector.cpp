#include "vcsel/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vcsel/errors.hpp"
#include "vcsel/image_io.hpp"

namespace vcsel {

void SpikeTrain::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "t_ns\n";
  out.precision(12);
  for (double t : times_ns) out << t << '\n';
}

SpikeDetector::SpikeDetector(double threshold, double refractory_ns) {
  if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
  if (!(refractory_ns >= 0.0)) {
    throw ConfigError("refractory window must be non-negative");
  }
  train_.threshold = threshold;
  train_.refractory_ns = refractory_ns;
}

void SpikeDetector::push(double t_ns, double power) {
  if (have_prev_ && prev_p_ < train_.threshold && power >= train_.threshold) {
    const double f = (train_.threshold - prev_p_) / (power - prev_p_);
    const double t = prev_t_ + f * (t_ns - prev_t_);
    if (train_.times_ns.empty() ||
        t - train_.times_ns.back() >= train_.refractory_ns) {
      train_.times_ns.push_back(t);
    }
  }
  prev_t_ = t_ns;
  prev_p_ = power;
  have_prev_ = true;
}

SpikeTrain detect_spikes(const PowerTrace& trace, double threshold,
                         double refractory_ns) {
  if (trace.power_x.size() != trace.power_y.size()) {
    throw ConfigError("power trace polarisations differ in length");
  }
  SpikeDetector det(threshold, refractory_ns);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    det.push(trace.time_ns(i), trace.power_x[i] + trace.power_y[i]);
  }
  return det.take();
}

ReconstructedMap::ReconstructedMap(int width, int height, std::string label)
    : width_(width), height_(height), label_(std::move(label)) {
  if (width <= 0 || height <= 0) throw ConfigError("map must be non-empty");
  cells_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t ReconstructedMap::active_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

void ReconstructedMap::write_pgm(const std::string& path) const {
  RawImage raw;
  raw.width = width_;
  raw.height = height_;
  raw.channels = 1;
  raw.data.reserve(cells_.size());
  for (auto c : cells_) raw.data.push_back(c ? 0 : 255);
  write_pnm(path, raw);
}

std::vector<DemuxMap> demultiplex(const SpikeTrain& train,
                                  const RunLayout& layout) {
  // Grid extent of each (kernel, image) block.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> slot;
  std::vector<DemuxMap> maps;
  std::vector<std::pair<int, int>> extent;
  for (const PixelWindow& w : layout.windows) {
    auto key = std::make_pair(w.kernel, w.image);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, maps.size()).first;
      maps.push_back({w.kernel, w.image, {}});
      extent.emplace_back(0, 0);
    }
    auto& e = extent[it->second];
    e.first = std::max(e.first, static_cast<int>(w.col) + 1);
    e.second = std::max(e.second, static_cast<int>(w.row) + 1);
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    maps[i].map = ReconstructedMap(extent[i].first, extent[i].second);
  }
  for (double t : train.times_ns) {
    const auto idx = layout.window_at(t);
    if (!idx) {
      std::ostringstream os;
      os << "spike at " << t << " ns lies outside every pixel window";
      throw ConfigError(os.str());
    }
    const PixelWindow& w = layout.windows[*idx];
    maps[slot.at({w.kernel, w.image})].map.set(static_cast<int>(w.row),
                                                static_cast<int>(w.col), true);
  }
  return maps;
}

ReconstructedMap combine_maps(const std::vector<ReconstructedMap>& maps) {
  if (maps.empty()) throw ConfigError("nothing to combine");
  ReconstructedMap out(maps.front().width(), maps.front().height(), "combined");
  for (const auto& m : maps) {
    if (m.width() != out.width() || m.height() != out.height()) {
      throw ConfigError("cannot combine maps of different sizes");
    }
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        if (m.at(r, c)) out.set(r, c, true);
      }
    }
  }
  return out;
}

ReconstructedMap reference_edges(const PixelImage& image, const KernelOp& kernel,
                                 std::optional<double> boundary) {
  const HadamardField field = hadamard_field(image, kernel);
  const double b = boundary.value_or(kernel.decision_boundary());
  ReconstructedMap out(field.out_width(), field.out_height(), kernel.label());
  for (int r = 0; r < field.out_height(); ++r) {
    for (int c = 0; c < field.out_width(); ++c) {
      out.set(r, c, field.sum_at(r, c) >= b - 1e-12);
    }
  }
  return out;
}

namespace {

void finish(DetectionMetrics& m) {
  const std::size_t n = m.total();
  m.accuracy = n == 0 ? 0.0
                      : static_cast<double>(m.true_pos + m.true_neg) /
                            static_cast<double>(n);
  if (m.reference_active) {
    m.activation_loss =
        *m.reference_active == 0
            ? 0.0
            : 1.0 - static_cast<double>(m.observed_active) /
                        static_cast<double>(*m.reference_active);
  }
}

}  // namespace

DetectionMetrics score(const ReconstructedMap& observed,
                       const ReconstructedMap& oracle,
                       const ReconstructedMap* reference_observed) {
  if (observed.width() != oracle.width() ||
      observed.height() != oracle.height()) {
    throw ConfigError("observed and oracle maps differ in size");
  }
  DetectionMetrics m;
  for (std::size_t i = 0; i < observed.cells().size(); ++i) {
    const bool o = observed.cells()[i] != 0;
    const bool e = oracle.cells()[i] != 0;
    if (o && e) ++m.true_pos;
    else if (o) ++m.false_pos;
    else if (e) ++m.false_neg;
    else ++m.true_neg;
  }
  m.observed_active = observed.active_count();
  if (reference_observed != nullptr) {
    if (reference_observed->width() != observed.width() ||
        reference_observed->height() != observed.height()) {
      throw ConfigError("reference map differs in size");
    }
    m.reference_active = reference_observed->active_count();
  }
  finish(m);
  return m;
}

DetectionMetrics merge_metrics(const std::vector<DetectionMetrics>& parts) {
  DetectionMetrics m;
  bool all_ref = !parts.empty();
  std::size_t ref = 0;
  for (const auto& p : parts) {
    m.true_pos += p.true_pos;
    m.false_pos += p.false_pos;
    m.false_neg += p.false_neg;
    m.true_neg += p.true_neg;
    m.observed_active += p.observed_active;
    if (p.reference_active) ref += *p.reference_active;
    else all_ref = false;
  }
  if (all_ref) m.reference_active = ref;
  finish(m);
  return m;
}

std::string DetectionMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["true_pos"] = true_pos;
  j["false_pos"] = false_pos;
  j["false_neg"] = false_neg;
  j["true_neg"] = true_neg;
  j["accuracy"] = accuracy;
  j["observed_active"] = observed_active;
  j["reference_active"] =
      reference_active ? nlohmann::ordered_json(*reference_active) : nlohmann::ordered_json(nullptr);
  j["activation_loss"] =
      activation_loss ? nlohmann::ordered_json(*activation_loss) : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

}  // namespace vcsel
