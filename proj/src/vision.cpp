#include "depman/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "depman/errors.hpp"

namespace depman {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Standard normal keyed on (seed, pixel): a crop render matches the full render.
double pixel_gaussian(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(index));
  const std::uint64_t b = splitmix64(a);
  const double u1 = ((a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (b >> 11) * 0x1.0p-53;
  return std::sqrt(-2 * std::log(u1)) * std::cos(2 * kPi * u2);
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

Window clamp_window(int cx, int cy, int size, const FrameGeometry& g) {
  Window w;
  w.w = std::min(size, g.width);
  w.h = std::min(size, g.height);
  w.x0 = std::clamp(cx - w.w / 2, 0, g.width - w.w);
  w.y0 = std::clamp(cy - w.h / 2, 0, g.height - w.h);
  return w;
}

struct Moments {
  double area = 0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double m20 = 0, m11 = 0, m02 = 0;
  std::vector<Eigen::Vector2d> pts;  // world coordinates of set pixels

  double axis() const { return 0.5 * std::atan2(2 * m11, m20 - m02); }
  // Normalized third central moment along direction angle a.
  double skew(double a) const {
    const Eigen::Vector2d d(std::cos(a), std::sin(a));
    double s2 = 0, s3 = 0;
    for (const auto& p : pts) {
      const double t = (p - c).dot(d);
      s2 += t * t;
      s3 += t * t * t;
    }
    s2 /= area;
    s3 /= area;
    return s2 > 0 ? s3 / std::pow(s2, 1.5) : 0.0;
  }
};

Moments moments(const BinaryImage& bin, const FrameGeometry& g) {
  Moments m;
  for (int r = 0; r < bin.win.h; ++r)
    for (int c = 0; c < bin.win.w; ++c)
      if (bin.at(r, c)) m.pts.push_back(g.pixel_to_world(bin.win.x0 + c, bin.win.y0 + r));
  m.area = static_cast<double>(m.pts.size());
  if (m.pts.empty()) return m;
  for (const auto& p : m.pts) m.c += p;
  m.c /= m.area;
  for (const auto& p : m.pts) {
    const Eigen::Vector2d d = p - m.c;
    m.m20 += d.x() * d.x();
    m.m11 += d.x() * d.y();
    m.m02 += d.y() * d.y();
  }
  m.m20 /= m.area;
  m.m11 /= m.area;
  m.m02 /= m.area;
  return m;
}

Eigen::Vector2d rot2(double a, const Eigen::Vector2d& v) {
  return {std::cos(a) * v.x() - std::sin(a) * v.y(), std::sin(a) * v.x() + std::cos(a) * v.y()};
}

double wrap_pi(double a) { return std::remainder(a, 2 * kPi); }

bool touches_border(const BinaryImage& bin, const FrameGeometry& g) {
  const Window& w = bin.win;
  for (int r = 0; r < w.h; ++r)
    for (int c = 0; c < w.w; ++c) {
      if (!bin.at(r, c)) continue;
      if ((c == 0 && w.x0 > 0) || (r == 0 && w.y0 > 0) || (c == w.w - 1 && w.x0 + w.w < g.width) ||
          (r == w.h - 1 && w.y0 + w.h < g.height))
        return true;
    }
  return false;
}

BinaryImage silhouette(const Frame& frame, const EdgeParams& p) {
  return fill_holes(largest_blob(detect_edges(frame, p.k, p.c)));
}

}  // namespace

Eigen::Vector2d FrameGeometry::pixel_to_world(double col, double row) const {
  return {(col - 0.5 * (width - 1)) * pitch, (0.5 * (height - 1) - row) * pitch};
}

Eigen::Vector2d FrameGeometry::world_to_pixel(const Eigen::Vector2d& xy) const {
  return {xy.x() / pitch + 0.5 * (width - 1), 0.5 * (height - 1) - xy.y() / pitch};
}

void FrameGeometry::validate() const {
  if (width < 8 || height < 8) throw ConfigError("frame must be at least 8x8 pixels");
  if (!(pitch > 0)) throw ConfigError("pixel pitch must be > 0");
  if (crop < 8) throw ConfigError("crop must be at least 8 pixels");
}

int BinaryImage::count() const { return static_cast<int>(std::count(px.begin(), px.end(), 1)); }

Frame rasterize(const ObjectModel& obj, const Pose& pose, const FrameGeometry& geom,
                const RenderConfig& render, std::uint64_t noise_seed, std::optional<Window> region) {
  Frame f;
  f.win = region.value_or(Window{0, 0, geom.width, geom.height});
  f.px.resize(static_cast<std::size_t>(f.win.w) * f.win.h);
  const auto segs = obj.outline();
  const double yaw = pose.yaw();
  const Eigen::Vector2d r = pose.r.head<2>();
  const double sigma = render.edge_sigma_px * geom.pitch;
  const double reach = obj.footprint_radius() + 6 * sigma;
  for (int row = 0; row < f.win.h; ++row)
    for (int col = 0; col < f.win.w; ++col) {
      const int fr = f.win.y0 + row, fc = f.win.x0 + col;
      double v = render.background + render.gradient * fc;
      const Eigen::Vector2d body = rot2(-yaw, geom.pixel_to_world(fc, fr) - r);
      if (body.norm() < reach) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& [a, b] : segs) d = std::min(d, segment_distance(body, a, b));
        v += render.edge_intensity * std::exp(-0.5 * d * d / (sigma * sigma));
      }
      if (render.noise_sigma > 0)
        v += render.noise_sigma * pixel_gaussian(noise_seed, static_cast<std::uint64_t>(fr) * geom.width + fc);
      f.px[static_cast<std::size_t>(row) * f.win.w + col] = static_cast<float>(v);
    }
  return f;
}

BinaryImage detect_edges(const Frame& frame, int k, double c) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("variance window must be odd and positive");
  const int W = frame.win.w, H = frame.win.h;
  // integral images of value and value^2
  std::vector<double> s((W + 1) * (H + 1), 0.0), s2((W + 1) * (H + 1), 0.0);
  auto I = [W](int r, int col) { return static_cast<std::size_t>(r) * (W + 1) + col; };
  for (int r = 0; r < H; ++r)
    for (int col = 0; col < W; ++col) {
      const double v = frame.at(r, col);
      s[I(r + 1, col + 1)] = v + s[I(r, col + 1)] + s[I(r + 1, col)] - s[I(r, col)];
      s2[I(r + 1, col + 1)] = v * v + s2[I(r, col + 1)] + s2[I(r + 1, col)] - s2[I(r, col)];
    }
  const int h = k / 2;
  std::vector<double> var(static_cast<std::size_t>(W) * H);
  double sum = 0, sum2 = 0;
  for (int r = 0; r < H; ++r)
    for (int col = 0; col < W; ++col) {
      const int r0 = std::max(0, r - h), r1 = std::min(H, r + h + 1);
      const int c0 = std::max(0, col - h), c1 = std::min(W, col + h + 1);
      const double n = static_cast<double>((r1 - r0) * (c1 - c0));
      const double a = s[I(r1, c1)] - s[I(r0, c1)] - s[I(r1, c0)] + s[I(r0, c0)];
      const double b = s2[I(r1, c1)] - s2[I(r0, c1)] - s2[I(r1, c0)] + s2[I(r0, c0)];
      const double v = std::max(0.0, b / n - (a / n) * (a / n));
      var[static_cast<std::size_t>(r) * W + col] = v;
      sum += v;
      sum2 += v * v;
    }
  const double n = static_cast<double>(var.size());
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
  const double thr = mean + c * sd;
  // rounding in the integral images leaves ~1e-9 residue on flat frames
  const double floor = 1e-6 * (1 + mean);
  BinaryImage out{frame.win, std::vector<std::uint8_t>(var.size(), 0)};
  for (std::size_t i = 0; i < var.size(); ++i) out.px[i] = var[i] > thr && var[i] > floor;
  return out;
}

BinaryImage largest_blob(const BinaryImage& bin) {
  const int W = bin.win.w, H = bin.win.h;
  std::vector<int> label(bin.px.size(), -1);
  std::vector<int> sizes;
  std::vector<int> stack;
  for (int start = 0; start < W * H; ++start) {
    if (!bin.px[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    int size = 0;
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int r = p / W, c = p % W;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          const int q = rr * W + cc;
          if (bin.px[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
    }
    sizes.push_back(size);
  }
  BinaryImage out{bin.win, std::vector<std::uint8_t>(bin.px.size(), 0)};
  if (sizes.empty()) return out;
  // labels are issued in raster order of first pixel, so the first maximum wins ties
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.px[i] = label[i] == best;
  return out;
}

BinaryImage fill_holes(const BinaryImage& bin) {
  const int W = bin.win.w, H = bin.win.h;
  std::vector<std::uint8_t> outside(bin.px.size(), 0);
  std::vector<int> stack;
  auto seed = [&](int r, int c) {
    const int p = r * W + c;
    if (!bin.px[p] && !outside[p]) {
      outside[p] = 1;
      stack.push_back(p);
    }
  };
  for (int c = 0; c < W; ++c) {
    seed(0, c);
    seed(H - 1, c);
  }
  for (int r = 0; r < H; ++r) {
    seed(r, 0);
    seed(r, W - 1);
  }
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int r = p / W, c = p % W;
    if (r > 0) seed(r - 1, c);
    if (r + 1 < H) seed(r + 1, c);
    if (c > 0) seed(r, c - 1);
    if (c + 1 < W) seed(r, c + 1);
  }
  BinaryImage out{bin.win, std::vector<std::uint8_t>(bin.px.size(), 0)};
  for (std::size_t i = 0; i < out.px.size(); ++i) out.px[i] = !outside[i];
  return out;
}

PoseEstimate pose_from_moments(const BinaryImage& blob, const FrameGeometry& geom,
                               const ShapeCalibration& cal, int symmetry_order,
                               const PoseEstimate& previous, int min_blob) {
  const Moments m = moments(blob, geom);
  if (m.area < std::max(1, min_blob)) {
    PoseEstimate stale = previous;
    stale.valid = false;
    stale.stale = true;
    stale.blob_area = static_cast<int>(m.area);
    return stale;
  }
  PoseEstimate est;
  est.valid = true;
  est.blob_area = static_cast<int>(m.area);
  const double spread = m.m20 + m.m02;
  double axis = m.axis();
  if (std::abs(m.m20 - m.m02) < 1e-6 * spread && std::abs(m.m11) < 1e-6 * spread) {
    axis = 0;
    est.low_confidence = true;
  }
  double yaw = axis - cal.axis_angle;  // one of yaw + k pi
  bool resolved = false;
  if (symmetry_order == 1 && cal.skew_sign != 0) {
    const double sk = m.skew(yaw + cal.skew_angle);
    if (std::abs(sk) > 0.05) {
      if ((sk > 0) != (cal.skew_sign > 0)) yaw += kPi;
      resolved = true;
    }
  }
  if (!resolved) {
    // nearest candidate to the previous yaw (or to 0 on a cold start)
    const double ref = previous.valid || previous.stale ? previous.phi : 0.0;
    yaw = ref + std::remainder(yaw - ref, kPi);
  }
  est.phi = wrap_pi(yaw);
  const Eigen::Vector2d pos = m.c - rot2(est.phi, cal.offset);
  est.x = pos.x();
  est.y = pos.y();
  return est;
}

VisionEstimator::VisionEstimator(const ObjectModel& obj, FrameGeometry geom, RenderConfig render,
                                 EdgeParams params)
    : obj_(&obj), geom_(geom), render_(render), params_(params) {
  geom_.validate();
  cal_ = calibrate(obj, geom_, render_, params_);
}

void VisionEstimator::reset() {
  last_ = {};
  grow_ = false;
}

Window VisionEstimator::next_window() const {
  if (!last_.valid && !last_.stale) return {0, 0, geom_.width, geom_.height};
  const Eigen::Vector2d px = geom_.world_to_pixel({last_.x, last_.y});
  return clamp_window(static_cast<int>(std::lround(px.x())), static_cast<int>(std::lround(px.y())),
                      grow_ ? 2 * geom_.crop : geom_.crop, geom_);
}

PoseEstimate VisionEstimator::observe(const Pose& true_pose, std::uint64_t noise_seed) {
  return process(rasterize(*obj_, true_pose, geom_, render_, noise_seed, next_window()));
}

PoseEstimate VisionEstimator::process(const Frame& frame) {
  const BinaryImage blob = largest_blob(detect_edges(frame, params_.k, params_.c));
  grow_ = touches_border(blob, geom_);
  PoseEstimate est = pose_from_moments(fill_holes(blob), geom_, cal_, obj_->shape.symmetry_order, last_,
                                       params_.min_blob);
  if (est.valid && cal_.area > 0 &&
      (est.blob_area < params_.area_min * cal_.area || est.blob_area > params_.area_max * cal_.area)) {
    const int area = est.blob_area;
    est = last_;
    est.valid = false;
    est.stale = true;
    est.blob_area = area;
  }
  if (!est.valid) {
    // two misses in a row: fall back to a full-frame search
    if (last_.stale) est.stale = false;
    grow_ = true;
  }
  last_ = est;
  return est;
}

ShapeCalibration VisionEstimator::calibrate(const ObjectModel& obj, const FrameGeometry& geom,
                                            const RenderConfig& render, const EdgeParams& params) {
  RenderConfig clean = render;
  clean.noise_sigma = 0;
  constexpr int kPoses = 24;
  struct Sample {
    Moments m;
    double yaw;
    Eigen::Vector2d r;
  };
  std::vector<Sample> samples;
  for (int i = 0; i < kPoses; ++i) {
    const double yaw = wrap_pi(2 * kPi * i / kPoses + 0.137);
    const Eigen::Vector2d r((0.37 * i - std::floor(0.37 * i)) * geom.pitch,
                            (0.61 * i - std::floor(0.61 * i)) * geom.pitch);
    const Pose pose = Pose::planar(r.x(), r.y(), 0, yaw);
    const Eigen::Vector2d px = geom.world_to_pixel(r);
    const Window win = clamp_window(static_cast<int>(std::lround(px.x())), static_cast<int>(std::lround(px.y())),
                                    geom.crop, geom);
    const BinaryImage bin = silhouette(rasterize(obj, pose, geom, clean, 0, win), params);
    samples.push_back({moments(bin, geom), yaw, r});
  }
  ShapeCalibration cal;
  // circular mean of the doubled axis offset
  double sx = 0, sy = 0;
  for (const auto& s : samples) {
    const double d = 2 * (s.m.axis() - s.yaw);
    sx += std::cos(d);
    sy += std::sin(d);
  }
  cal.axis_angle = 0.5 * std::atan2(sy, sx);
  for (const auto& s : samples) cal.offset += rot2(-s.yaw, s.m.c - s.r);
  cal.offset /= kPoses;
  for (const auto& s : samples) cal.area += s.m.area / kPoses;
  if (obj.shape.symmetry_order == 1) {
    double along = 0, across = 0;
    for (const auto& s : samples) {
      along += s.m.skew(s.yaw + cal.axis_angle);
      across += s.m.skew(s.yaw + cal.axis_angle + kPi / 2);
    }
    along /= kPoses;
    across /= kPoses;
    const bool use_along = std::abs(along) >= std::abs(across);
    const double sk = use_along ? along : across;
    cal.skew_angle = cal.axis_angle + (use_along ? 0.0 : kPi / 2);
    cal.skew_sign = std::abs(sk) > 0.05 ? (sk > 0 ? 1.0 : -1.0) : 0.0;
  }
  return cal;
}

void write_pgm(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << frame.win.w << ' ' << frame.win.h << "\n255\n";
  for (float v : frame.px) out.put(static_cast<char>(std::clamp(static_cast<int>(std::lround(v)), 0, 255)));
}

void write_pgm(const std::string& path, const BinaryImage& bin) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << bin.win.w << ' ' << bin.win.h << "\n255\n";
  for (auto v : bin.px) out.put(static_cast<char>(v ? 255 : 0));
}

}  // namespace depman
