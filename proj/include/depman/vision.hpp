#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "depman/geometry.hpp"
#include "depman/object.hpp"

namespace depman {

/// Camera model: the frame is centred on the world origin, rows grow towards -y.
struct FrameGeometry {
  int width = 256;
  int height = 205;
  double pitch = 2.75e-6;  // m per pixel
  int crop = 80;

  Eigen::Vector2d pixel_to_world(double col, double row) const;
  Eigen::Vector2d world_to_pixel(const Eigen::Vector2d& xy) const;
  void validate() const;
};

struct RenderConfig {
  double background = 40.0;
  double edge_intensity = 160.0;
  double edge_sigma_px = 1.0;  // Gaussian profile across the outline
  double gradient = 0.05;      // illumination ramp, grey levels per pixel along x
  double noise_sigma = 3.0;    // pixel noise, grey levels
};

/// Sub-rectangle of the full frame in pixel coordinates.
struct Window {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

struct Frame {
  Window win;
  std::vector<float> px;  // row-major over win

  float at(int row, int col) const { return px[static_cast<std::size_t>(row) * win.w + col]; }
};

struct BinaryImage {
  Window win;
  std::vector<std::uint8_t> px;

  std::uint8_t at(int row, int col) const { return px[static_cast<std::size_t>(row) * win.w + col]; }
  int count() const;
};

/// Renders the footprint outline as bright pixels. `region` defaults to the full
/// frame; noise is drawn from `noise_seed` so a render is reproducible.
Frame rasterize(const ObjectModel& obj, const Pose& pose, const FrameGeometry& geom,
                const RenderConfig& render, std::uint64_t noise_seed = 0,
                std::optional<Window> region = std::nullopt);

/// Local variance over a k x k window, thresholded at mean + c * std of the variance map.
BinaryImage detect_edges(const Frame& frame, int k = 5, double c = 1.5);

/// Largest 8-connected component; ties go to the component with the smallest first
/// pixel in raster order.
BinaryImage largest_blob(const BinaryImage& bin);

/// Sets every pixel not 4-reachable from the border through background.
BinaryImage fill_holes(const BinaryImage& bin);

struct PoseEstimate {
  double x = 0, y = 0;  // m
  double phi = 0;       // rad
  bool valid = false;
  bool stale = false;
  bool low_confidence = false;
  int blob_area = 0;
};

/// Per-shape offsets between the filled-blob moments and the body frame.
struct ShapeCalibration {
  double axis_angle = 0;                      // principal axis in the body frame, mod pi
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();  // blob centroid in the body frame
  double skew_angle = 0;                      // body direction with the larger third moment
  double skew_sign = 0;                       // sign there; 0 disables skew disambiguation
  double area = 0;                            // filled blob area, px; 0 disables the area check
};

struct EdgeParams {
  int k = 5;
  double c = 1.5;
  int min_blob = 30;
  // Accepted filled-blob area relative to the calibrated one. Thresholded noise alone
  // forms blobs above min_blob, so a crop that lost the object must not pass.
  double area_min = 0.5;
  double area_max = 2.0;
};

/// Pose from the second-order central moments of a filled blob. The mod-pi axis
/// ambiguity is resolved by the calibrated skew sign (asymmetric shapes) and otherwise
/// by continuity with `previous`.
PoseEstimate pose_from_moments(const BinaryImage& blob, const FrameGeometry& geom,
                               const ShapeCalibration& cal, int symmetry_order,
                               const PoseEstimate& previous, int min_blob = 30);

/// Stateful estimator: crop tracking around the last detection plus the pipeline above.
class VisionEstimator {
 public:
  VisionEstimator(const ObjectModel& obj, FrameGeometry geom, RenderConfig render, EdgeParams params = {});

  /// Renders the current crop of `true_pose` and estimates the pose.
  PoseEstimate observe(const Pose& true_pose, std::uint64_t noise_seed);
  PoseEstimate process(const Frame& frame);

  Window next_window() const;
  const ShapeCalibration& calibration() const { return cal_; }
  const PoseEstimate& last() const { return last_; }
  void reset();

  /// Noise-free renders at a set of known poses; averages the moment offsets.
  static ShapeCalibration calibrate(const ObjectModel& obj, const FrameGeometry& geom,
                                    const RenderConfig& render, const EdgeParams& params);

 private:
  const ObjectModel* obj_;
  FrameGeometry geom_;
  RenderConfig render_;
  EdgeParams params_;
  ShapeCalibration cal_;
  PoseEstimate last_;
  bool grow_ = false;
};

/// Binary PGM (P5) dump of a frame or a binary image, for debugging.
void write_pgm(const std::string& path, const Frame& frame);
void write_pgm(const std::string& path, const BinaryImage& bin);

}  // namespace depman
