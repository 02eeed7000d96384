#pragma once

// Optimization loop for 2D image fitting: Adam on every Gaussian parameter,
// with densification, the confidence filter and density-scale rescaling on a
// fixed iteration schedule.

#include "fds/cloud.hpp"
#include "fds/common.hpp"
#include "fds/render.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fds {

struct LearningRates {
  // Position rate decays exponentially from init to final over total_iters;
  // both are multiplied by the scene extent.
  double position_init = 1.6e-4;
  double position_final = 1.6e-6;
  double rotation = 0.002;
  double scale_log = 0.005;  // log s_a
  double scale_rel = 0.01;   // s_r_raw
  double opacity = 0.05;     // alpha_raw
  double color = 0.64;       // [0,255] channels
};

struct TrainConfig {
  long total_iters = 30000;
  long densify_interval = 500;
  long densify_start = 1000;
  long confidence_interval = 1000;
  long control_end = 15000;
  long opacity_reset_interval = 3000;
  long log_interval = 2000;
  std::size_t K = 50;
  double theta = 1.2;
  double grad_preset = 0.0005;
  std::size_t M = 2;
  double tau_c = 0.2;
  double ssim_lambda = 0.2;
  LearningRates lr;
  std::uint64_t seed = 0;

  std::size_t init_count = 2000;
  double init_opacity = 0.1;

  // Ablation switches. All three off gives the baseline control scheme.
  bool link = true;               // s_a = theta * R~ after structural changes
  bool dynamic_threshold = true;  // otherwise tau_pos = fixed_threshold
  bool confidence_filter = true;  // otherwise large-Gaussian pruning
  double fixed_threshold = 0.0002;
  double large_fraction = 0.1;

  /// Where to write the cloud if the loss stops being finite. Empty: no dump.
  std::filesystem::path divergence_dump;

  /// Throws InvalidParameter for non-positive intervals or control_end > total_iters.
  void validate() const;
};

struct Checkpoint {
  long iteration = 0;
  double train_loss = 0.0;  // mean loss over iterations since the previous checkpoint
  double psnr = 0.0;        // on the first view
  double ssim = 0.0;
  std::size_t count = 0;
  double tau_pos = 0.0;                // latest threshold used, 0 before the first densify
  std::size_t filter_deletions = 0;    // since the previous checkpoint
};

enum class ControlKind { Filter, Densify, Opacity, Rescale };

struct ControlEvent {
  long iteration = 0;
  ControlKind kind = ControlKind::Densify;
  std::size_t count_after = 0;
  double tau_pos = 0.0;     // Densify
  std::size_t added = 0;    // Densify: clones + extra split children
  std::size_t removed = 0;  // Filter / Opacity
  bool reset = false;       // Opacity
};

[[nodiscard]] const char* to_string(ControlKind kind);

struct IterationRecord {
  long iteration = 0;
  int view = 0;
  double loss = 0.0;
  double l1 = 0.0;
  double ssim = 1.0;
  std::size_t count = 0;
};

struct TrainLog {
  std::vector<Checkpoint> checkpoints;
  std::vector<ControlEvent> events;
  std::vector<IterationRecord> iterations;
};

struct TrainResult {
  GaussianCloud cloud;
  TrainLog log;
};

/// Loss became NaN or infinite.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long iteration)
      : NumericalError(what), iteration_(iteration) {}
  [[nodiscard]] long iteration() const { return iteration_; }

 private:
  long iteration_;
};

/// Uniform positions over [-0.5, w-0.5) x [-0.5, h-0.5) of `reference`,
/// colors read from it, isotropic shape, identity rotation, s_a from an
/// immediate rescale with (k, theta).
[[nodiscard]] GaussianCloud init_from_random(std::size_t n, const RasterImage& reference,
                                             std::size_t k, double theta, double init_opacity,
                                             std::mt19937_64& rng);

/// The canonical image plus affine re-views of it (zoom, small rotations
/// about the image center), each rendered at the canonical resolution.
[[nodiscard]] std::vector<ViewSpec> make_views(const RasterImage& canonical, int count = 4);

/// Diagonal of the pixel domain.
[[nodiscard]] double scene_extent(const RasterImage& reference);

using CheckpointCallback = std::function<void(const Checkpoint&)>;

/// Views are visited round-robin. Throws DivergenceError on a non-finite loss.
[[nodiscard]] TrainResult train(std::span<const ViewSpec> views, const TrainConfig& cfg,
                                GaussianCloud init, const CheckpointCallback& on_checkpoint = {});

void write_checkpoints_csv(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& stamp);
void write_convergence_csv(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& stamp);
void write_events_csv(const TrainLog& log, const std::filesystem::path& path,
                      const std::string& stamp);

}  // namespace fds
