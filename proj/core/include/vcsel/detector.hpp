#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vcsel/imaging.hpp"
#include "vcsel/sfm.hpp"
#include "vcsel/waveform.hpp"

namespace vcsel {

struct SpikeTrain {
  std::vector<double> times_ns;
  double threshold = 0.0;
  double refractory_ns = 0.0;

  std::size_t size() const { return times_ns.size(); }
  void write_csv(const std::string& path) const;
};

// Streaming threshold-crossing detector over total output power.
class SpikeDetector {
 public:
  SpikeDetector(double threshold, double refractory_ns);

  void push(double t_ns, double power);
  const SpikeTrain& train() const { return train_; }
  SpikeTrain take() { return std::move(train_); }

 private:
  SpikeTrain train_;
  double prev_t_ = 0.0;
  double prev_p_ = 0.0;
  bool have_prev_ = false;
};

// Upward crossings of `threshold` by power_x + power_y; crossings within
// `refractory_ns` of the previous spike are dropped. Times are linearly
// interpolated between samples.
SpikeTrain detect_spikes(const PowerTrace& trace, double threshold,
                         double refractory_ns);

class ReconstructedMap {
 public:
  ReconstructedMap() = default;
  ReconstructedMap(int width, int height, std::string label = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }
  bool at(int row, int col) const { return cells_[index(row, col)] != 0; }
  void set(int row, int col, bool active) {
    cells_[index(row, col)] = active ? 1 : 0;
  }
  std::size_t active_count() const;
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  // Active pixels black (0), others white (255).
  void write_pgm(const std::string& path) const;

  bool operator==(const ReconstructedMap& o) const {
    return width_ == o.width_ && height_ == o.height_ && cells_ == o.cells_;
  }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  int width_ = 0;
  int height_ = 0;
  std::string label_;
  std::vector<std::uint8_t> cells_;
};

struct DemuxMap {
  std::uint32_t kernel = 0;
  std::uint32_t image = 0;
  ReconstructedMap map;
};

// One map per (kernel, image) present in the layout, in layout order.
std::vector<DemuxMap> demultiplex(const SpikeTrain& train,
                                  const RunLayout& layout);

ReconstructedMap combine_maps(const std::vector<ReconstructedMap>& maps);

// Active iff the Hadamard sum reaches the kernel's decision boundary, or
// `boundary` when given.
ReconstructedMap reference_edges(const PixelImage& image, const KernelOp& kernel,
                                 std::optional<double> boundary = std::nullopt);

struct DetectionMetrics {
  std::size_t true_pos = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
  std::size_t true_neg = 0;
  double accuracy = 0.0;
  std::size_t observed_active = 0;
  std::optional<std::size_t> reference_active;
  std::optional<double> activation_loss;

  std::size_t total() const {
    return true_pos + false_pos + false_neg + true_neg;
  }
  std::string to_json() const;
};

DetectionMetrics score(const ReconstructedMap& observed,
                       const ReconstructedMap& oracle,
                       const ReconstructedMap* reference_observed = nullptr);

// Totals over several maps; activation loss from the summed active counts.
DetectionMetrics merge_metrics(const std::vector<DetectionMetrics>& parts);

}  // namespace vcsel
