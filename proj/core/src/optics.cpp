// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxel::optics {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double ramp_raised_cosine(double s, double rim) {
  if (s <= 0.0) return 0.0;
  if (s >= rim) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * s / rim));
}

// Signed distances, positive inside the cross-section.
double sd_circle(double x, double y, double r) { return r - std::hypot(x, y); }

double sd_rect(double x, double y, double cx, double cy, double hx, double hy) {
  const double qx = std::abs(x - cx) - hx;
  const double qy = std::abs(y - cy) - hy;
  const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
  const double inside = std::min(std::max(qx, qy), 0.0);
  return -(outside + inside);
}

double sd_square(double x, double y, double area) {
  const double half = 0.5 * std::sqrt(area);
  return sd_rect(x, y, 0.0, 0.0, half, half);
}

double sd_triangle(double x, double y, double area) {
  // Equilateral, centroid at the origin.
  const double side = std::sqrt(4.0 * area / std::sqrt(3.0));
  const double r_in = side / (2.0 * std::sqrt(3.0));
  double sd = std::numeric_limits<double>::infinity();
  for (double angle : {270.0, 30.0, 150.0}) {
    const double nx = std::cos(angle * kDegToRad);
    const double ny = std::sin(angle * kDegToRad);
    sd = std::min(sd, r_in - (x * nx + y * ny));
  }
  return sd;
}

double sd_tshape(double x, double y, double area) {
  // Bar 3w x w over a stem w x 2w, centroid at the origin.
  const double w = std::sqrt(area / 5.0);
  const double yq = y - 0.1 * w;
  const double bar = sd_rect(x, yq, 0.0, 0.5 * w, 1.5 * w, 0.5 * w);
  const double stem = sd_rect(x, yq, 0.0, -w, 0.5 * w, w);
  return std::max(bar, stem);
}

double shape_sdf(ShapeKind kind, double x, double y, double area) {
  switch (kind) {
    case ShapeKind::Circle: return sd_circle(x, y, std::sqrt(area / std::numbers::pi));
    case ShapeKind::Square: return sd_square(x, y, area);
    case ShapeKind::Triangle: return sd_triangle(x, y, area);
    case ShapeKind::TShape: return sd_tshape(x, y, area);
  }
  throw std::invalid_argument("shape_sdf: unknown shape");
}

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

const char* shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Square: return "square";
    case ShapeKind::Triangle: return "triangle";
    case ShapeKind::TShape: return "t_shape";
  }
  throw std::invalid_argument("shape_name: unknown shape");
}

ShapeKind shape_from_name(const std::string& name) {
  if (name == "circle") return ShapeKind::Circle;
  if (name == "square") return ShapeKind::Square;
  if (name == "triangle") return ShapeKind::Triangle;
  if (name == "t_shape") return ShapeKind::TShape;
  throw std::invalid_argument("shape_from_name: unknown shape \"" + name + "\"");
}

std::array<double, 3> LightingRig::light_dir(int i) const {
  const double az = azimuth_deg.at(static_cast<std::size_t>(i)) * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  return {std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el)};
}

void LightingRig::validate() const {
  if (!(ambient >= 0.0) || !(albedo > 0.0))
    throw std::invalid_argument("LightingRig: ambient must be >= 0 and albedo > 0");
  if (ambient + albedo > 1.0 + 1e-12)
    throw std::invalid_argument("LightingRig: ambient + albedo must not exceed 1");
  if (!(elevation_deg > 0.0) || !(elevation_deg <= 90.0))
    throw std::invalid_argument("LightingRig: elevation must be in (0, 90] degrees");
}

GradientField GradientField::zeros(int h, int w, double pitch) {
  GradientField g;
  g.height = h;
  g.width = w;
  g.pitch = pitch;
  g.gx.assign(static_cast<std::size_t>(h) * w, 0.0);
  g.gy.assign(static_cast<std::size_t>(h) * w, 0.0);
  return g;
}

HeightField height_field_sphere(double radius, double depth, int height, int width,
                                double pitch, double center_x_mm, double center_y_mm) {
  if (!(radius > 0.0)) throw std::invalid_argument("height_field_sphere: radius must be > 0");
  if (depth < 0.0) throw std::invalid_argument("height_field_sphere: depth must be >= 0");
  if (height <= 0 || width <= 0 || !(pitch > 0.0))
    throw std::invalid_argument("height_field_sphere: bad raster dimensions");
  HeightField hf = HeightField::zeros(height, width, pitch);
  const double cx = 0.5 * (width - 1) * pitch + center_x_mm;
  const double cy = 0.5 * (height - 1) * pitch + center_y_mm;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double x = c * pitch - cx;
      const double y = r * pitch - cy;
      hf.at(r, c) = std::max(0.0, depth - (x * x + y * y) / radius);
    }
  return hf;
}

HeightField height_field_prism(ShapeKind kind, double area_mm2, double depth,
                               double rim_mm, int height, int width, double pitch) {
  if (!(area_mm2 > 0.0)) throw std::invalid_argument("height_field_prism: area must be > 0");
  if (depth < 0.0) throw std::invalid_argument("height_field_prism: depth must be >= 0");
  if (!(rim_mm > 0.0)) throw std::invalid_argument("height_field_prism: rim must be > 0");
  if (height <= 0 || width <= 0 || !(pitch > 0.0))
    throw std::invalid_argument("height_field_prism: bad raster dimensions");

  // A perfectly centered shape puts mirrored boundary rows at identical
  // signed distances, so whole rows of pixels enter or leave the footprint
  // together and the discrete area gets stuck far from the analytic one.
  // Distinct sub-pixel center offsets per axis break those ties.
  std::vector<double> sd(static_cast<std::size_t>(height) * width);
  const double cx = (0.5 * (width - 1) + 0.25) * pitch;
  const double cy = (0.5 * (height - 1) + 0.37) * pitch;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      sd[static_cast<std::size_t>(r) * width + c] =
          shape_sdf(kind, c * pitch - cx, r * pitch - cy, area_mm2);

  // Center sampling still quantizes the footprint; shift the iso-level by a
  // sub-pixel amount so the discrete footprint matches the analytic count.
  const auto count_above = [&](double tau) {
    std::size_t n = 0;
    for (double s : sd) n += (s > tau) ? 1 : 0;
    return static_cast<double>(n);
  };
  const double target = area_mm2 / (pitch * pitch);
  double lo = -pitch, hi = pitch;
  double best_tau = 0.0;
  double best_err = std::abs(count_above(0.0) - target);
  for (int it = 0; it < 48; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double err = std::abs(count_above(mid) - target);
    if (err < best_err) {
      best_err = err;
      best_tau = mid;
    }
    if (count_above(mid) > target)
      lo = mid;
    else
      hi = mid;
  }

  HeightField hf = HeightField::zeros(height, width, pitch);
  for (std::size_t i = 0; i < sd.size(); ++i)
    hf.data[i] = depth * ramp_raised_cosine(sd[i] - best_tau, rim_mm);
  return hf;
}

GradientField gradients_from_height(const HeightField& hf) {
  if (hf.height < 2 || hf.width < 2)
    throw std::invalid_argument("gradients_from_height: field too small");
  // Forward differences with a zero pad on the far edge. The Poisson solver
  // applies the matching backward-difference divergence, so integration
  // inverts differentiation exactly up to the mean.
  GradientField g = GradientField::zeros(hf.height, hf.width, hf.pitch);
  const double invh = 1.0 / hf.pitch;
  for (int r = 0; r < hf.height; ++r)
    for (int c = 0; c < hf.width; ++c) {
      g.gx_at(r, c) = (c + 1 < hf.width) ? (hf.at(r, c + 1) - hf.at(r, c)) * invh : 0.0;
      g.gy_at(r, c) = (r + 1 < hf.height) ? (hf.at(r + 1, c) - hf.at(r, c)) * invh : 0.0;
    }
  return g;
}

ImageRGB render_frame(const GradientField& g, const LightingRig& rig) {
  rig.validate();
  ImageRGB img = ImageRGB::zeros(g.height, g.width);
  std::array<std::array<double, 3>, 3> dirs;
  for (int i = 0; i < 3; ++i) dirs[static_cast<std::size_t>(i)] = rig.light_dir(i);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      const double gx = g.gx_at(r, c);
      const double gy = g.gy_at(r, c);
      const double norm = std::sqrt(gx * gx + gy * gy + 1.0);
      const double nx = -gx / norm, ny = -gy / norm, nz = 1.0 / norm;
      for (int ch = 0; ch < 3; ++ch) {
        const auto& d = dirs[static_cast<std::size_t>(ch)];
        const double lambert = std::max(0.0, nx * d[0] + ny * d[1] + nz * d[2]);
        img.at(r, c, ch) = std::clamp(rig.ambient + rig.albedo * lambert, 0.0, 1.0);
      }
    }
  return img;
}

double flat_level(const LightingRig& rig) {
  rig.validate();
  return std::clamp(rig.ambient + rig.albedo * std::sin(rig.elevation_deg * kDegToRad), 0.0, 1.0);
}

std::array<int, 3> CalibrationLut::quantize(const std::array<double, 3>& delta) const {
  std::array<int, 3> b{};
  for (int ch = 0; ch < 3; ++ch) {
    const auto i = static_cast<std::size_t>(ch);
    const double span = hi[i] - lo[i];
    const double t = (delta[i] - lo[i]) / span * bins;
    b[i] = std::clamp(static_cast<int>(std::floor(t)), 0, bins - 1);
  }
  return b;
}

void CalibrationLut::validate() const {
  if (bins < 2) throw std::invalid_argument("CalibrationLut: bins must be >= 2");
  for (int ch = 0; ch < 3; ++ch)
    if (!(hi[static_cast<std::size_t>(ch)] > lo[static_cast<std::size_t>(ch)]))
      throw std::invalid_argument("CalibrationLut: empty delta range");
  if (gx.size() != cell_count() || gy.size() != cell_count() || counts.size() != cell_count())
    throw std::invalid_argument("CalibrationLut: table size mismatch");
}

CalibrationLut calibrate_lut(const std::vector<ImageRGB>& frames,
                             const std::vector<GradientField>& gradients,
                             const LightingRig& rig, int bins) {
  if (frames.empty() || frames.size() != gradients.size())
    throw std::invalid_argument("calibrate_lut: need matching frames and gradient fields");
  if (bins < 2) throw std::invalid_argument("calibrate_lut: bins must be >= 2");
  const double flat = flat_level(rig);

  CalibrationLut lut;
  lut.bins = bins;

  // Fit the delta range to the calibration data with a 5% margin so the
  // table's resolution tracks the shading span actually produced.
  std::array<double, 3> dmin{0.0, 0.0, 0.0}, dmax{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const ImageRGB& f = frames[k];
    const GradientField& g = gradients[k];
    if (f.height != g.height || f.width != g.width)
      throw std::invalid_argument("calibrate_lut: frame/gradient size mismatch");
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const double d = f.data[i] - flat;
      const auto ch = i % 3;
      dmin[ch] = std::min(dmin[ch], d);
      dmax[ch] = std::max(dmax[ch], d);
    }
  }
  for (int ch = 0; ch < 3; ++ch) {
    const auto i = static_cast<std::size_t>(ch);
    const double span = std::max(dmax[i] - dmin[i], 1e-6);
    lut.lo[i] = dmin[i] - 0.05 * span;
    lut.hi[i] = dmax[i] + 0.05 * span;
  }

  const std::size_t cells = lut.cell_count();
  std::vector<double> sum_gx(cells, 0.0), sum_gy(cells, 0.0);
  lut.counts.assign(cells, 0);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const ImageRGB& f = frames[k];
    const GradientField& g = gradients[k];
    const std::size_t n = static_cast<std::size_t>(f.height) * f.width;
    for (std::size_t p = 0; p < n; ++p) {
      const std::array<double, 3> delta{f.data[3 * p] - flat, f.data[3 * p + 1] - flat,
                                        f.data[3 * p + 2] - flat};
      const std::size_t cell = lut.cell_index(lut.quantize(delta));
      sum_gx[cell] += g.gx[p];
      sum_gy[cell] += g.gy[p];
      lut.counts[cell] += 1;
    }
  }

  lut.gx.assign(cells, 0.0);
  lut.gy.assign(cells, 0.0);

  // Resolve empty cells by breadth-first flood from the populated ones, so
  // any delta maps to the estimate of its nearest calibrated neighbor.
  std::vector<int> dist(cells, -1);
  std::queue<std::size_t> frontier;
  for (std::size_t c = 0; c < cells; ++c)
    if (lut.counts[c] > 0) {
      lut.gx[c] = sum_gx[c] / lut.counts[c];
      lut.gy[c] = sum_gy[c] / lut.counts[c];
      dist[c] = 0;
      frontier.push(c);
    }
  if (frontier.empty()) throw std::invalid_argument("calibrate_lut: no calibration samples");

  const int b = lut.bins;
  while (!frontier.empty()) {
    const std::size_t cur = frontier.front();
    frontier.pop();
    const int i0 = static_cast<int>(cur) / (b * b);
    const int i1 = (static_cast<int>(cur) / b) % b;
    const int i2 = static_cast<int>(cur) % b;
    const std::array<std::array<int, 3>, 6> nbrs{{{i0 - 1, i1, i2},
                                                  {i0 + 1, i1, i2},
                                                  {i0, i1 - 1, i2},
                                                  {i0, i1 + 1, i2},
                                                  {i0, i1, i2 - 1},
                                                  {i0, i1, i2 + 1}}};
    for (const auto& nb : nbrs) {
      if (nb[0] < 0 || nb[0] >= b || nb[1] < 0 || nb[1] >= b || nb[2] < 0 || nb[2] >= b)
        continue;
      const std::size_t ni = lut.cell_index(nb);
      if (dist[ni] != -1) continue;
      dist[ni] = dist[cur] + 1;
      lut.gx[ni] = lut.gx[cur];
      lut.gy[ni] = lut.gy[cur];
      frontier.push(ni);
    }
  }
  return lut;
}

std::array<double, 2> lut_lookup(const CalibrationLut& lut,
                                 const std::array<double, 3>& delta) {
  const std::size_t cell = lut.cell_index(lut.quantize(delta));
  return {lut.gx[cell], lut.gy[cell]};
}

namespace {

GradientField decode_deltas(const ImageRGB& frame, const CalibrationLut& lut, double pitch,
                            double mask_norm,
                            const std::function<std::array<double, 3>(std::size_t)>& delta_at) {
  lut.validate();
  GradientField g = GradientField::zeros(frame.height, frame.width, pitch);
  const std::size_t n = static_cast<std::size_t>(frame.height) * frame.width;
  for (std::size_t p = 0; p < n; ++p) {
    const std::array<double, 3> delta = delta_at(p);
    const double norm =
        std::sqrt(delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]);
    if (norm <= mask_norm) continue;  // non-contact pixel, leave flat
    const auto est = lut_lookup(lut, delta);
    g.gx[p] = est[0];
    g.gy[p] = est[1];
  }
  return g;
}

}  // namespace

GradientField gradients_from_frame(const ImageRGB& frame, const ImageRGB& reference,
                                   const CalibrationLut& lut, double pitch, double mask_norm) {
  if (frame.height != reference.height || frame.width != reference.width)
    throw std::invalid_argument("gradients_from_frame: frame and reference sizes differ");
  return decode_deltas(frame, lut, pitch, mask_norm, [&](std::size_t p) {
    return std::array<double, 3>{frame.data[3 * p] - reference.data[3 * p],
                                 frame.data[3 * p + 1] - reference.data[3 * p + 1],
                                 frame.data[3 * p + 2] - reference.data[3 * p + 2]};
  });
}

GradientField gradients_from_frame(const ImageRGB& frame, const LightingRig& rig,
                                   const CalibrationLut& lut, double pitch, double mask_norm) {
  const double flat = flat_level(rig);
  return decode_deltas(frame, lut, pitch, mask_norm, [&](std::size_t p) {
    return std::array<double, 3>{frame.data[3 * p] - flat, frame.data[3 * p + 1] - flat,
                                 frame.data[3 * p + 2] - flat};
  });
}

void save_lut(const std::string& path, const CalibrationLut& lut) {
  lut.validate();
  nlohmann::json j;
  j["bins"] = lut.bins;
  j["lo"] = lut.lo;
  j["hi"] = lut.hi;
  j["gx"] = lut.gx;
  j["gy"] = lut.gy;
  j["counts"] = lut.counts;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_lut: cannot open " + path);
  out << j.dump();
  if (!out) throw std::runtime_error("save_lut: short write to " + path);
}

CalibrationLut load_lut(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_lut: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("load_lut: malformed JSON in " + path + ": " + e.what());
  }
  CalibrationLut lut;
  lut.bins = j.at("bins").get<int>();
  lut.lo = j.at("lo").get<std::array<double, 3>>();
  lut.hi = j.at("hi").get<std::array<double, 3>>();
  lut.gx = j.at("gx").get<std::vector<double>>();
  lut.gy = j.at("gy").get<std::vector<double>>();
  lut.counts = j.at("counts").get<std::vector<std::uint32_t>>();
  lut.validate();
  return lut;
}

HeightField poisson_reconstruct(const GradientField& g) {
  if (g.height < 3 || g.width < 3)
    throw std::invalid_argument("poisson_reconstruct: field too small");
  const int h = g.height, w = g.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double invh = 1.0 / g.pitch;

  // Backward-difference divergence, the negative adjoint of the
  // forward-difference gradient. Their composition is the five-point Neumann
  // Laplacian, which the DCT-II basis diagonalizes exactly, so the round trip
  // through differentiation is exact up to transform rounding.
  std::vector<double> div(n, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double ddx = (g.gx_at(r, c) - (c > 0 ? g.gx_at(r, c - 1) : 0.0)) * invh;
      const double ddy = (g.gy_at(r, c) - (r > 0 ? g.gy_at(r - 1, c) : 0.0)) * invh;
      div[i] = ddx + ddy;
    }

  std::vector<double> spec(n, 0.0);
  {
    // Plan creation and destruction are not thread-safe in FFTW; execution
    // on distinct plans is.
    fftw_plan fwd, inv;
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      fwd = fftw_plan_r2r_2d(h, w, div.data(), spec.data(), FFTW_REDFT10, FFTW_REDFT10,
                             FFTW_ESTIMATE);
      inv = fftw_plan_r2r_2d(h, w, spec.data(), div.data(), FFTW_REDFT01, FFTW_REDFT01,
                             FFTW_ESTIMATE);
    }
    if (!fwd || !inv) throw std::runtime_error("poisson_reconstruct: FFTW planning failed");
    fftw_execute(fwd);

    const double h2 = g.pitch * g.pitch;
    for (int u = 0; u < h; ++u)
      for (int v = 0; v < w; ++v) {
        if (u == 0 && v == 0) {
          spec[0] = 0.0;  // gauge freedom: the mean is fixed afterwards
          continue;
        }
        const double lambda = (2.0 * std::cos(std::numbers::pi * u / h) +
                               2.0 * std::cos(std::numbers::pi * v / w) - 4.0) /
                              h2;
        spec[static_cast<std::size_t>(u) * w + v] /= lambda;
      }

    fftw_execute(inv);
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      fftw_destroy_plan(fwd);
      fftw_destroy_plan(inv);
    }
  }

  HeightField out = HeightField::zeros(h, w, g.pitch);
  const double scale = 1.0 / (4.0 * static_cast<double>(h) * static_cast<double>(w));
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = div[i] * scale;
    mean += out.data[i];
  }
  mean /= static_cast<double>(n);
  for (double& z : out.data) z -= mean;
  return out;
}

HeightField rezero_to_border(const HeightField& hf) {
  if (hf.height < 3 || hf.width < 3)
    throw std::invalid_argument("rezero_to_border: field too small");
  std::vector<double> ring;
  ring.reserve(2u * (hf.height + hf.width));
  for (int c = 0; c < hf.width; ++c) {
    ring.push_back(hf.at(0, c));
    ring.push_back(hf.at(hf.height - 1, c));
  }
  for (int r = 1; r + 1 < hf.height; ++r) {
    ring.push_back(hf.at(r, 0));
    ring.push_back(hf.at(r, hf.width - 1));
  }
  const std::size_t mid = ring.size() / 2;
  std::nth_element(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(mid), ring.end());
  const double median = ring[mid];
  HeightField out = hf;
  for (double& z : out.data) z -= median;
  return out;
}

std::optional<ContactRegion> fit_contact_region(const HeightField& hf, double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("fit_contact_region: threshold must be > 0");
  ContactRegion region;
  for (double z : hf.data)
    if (z >= threshold) {
      region.pixel_count += 1;
      region.max_depth = std::max(region.max_depth, z);
    }
  if (region.pixel_count == 0) return std::nullopt;
  region.area_mm2 = region.pixel_count * hf.pitch * hf.pitch;
  return region;
}

double normalized_mae(const HeightField& recon, const HeightField& truth) {
  if (recon.height != truth.height || recon.width != truth.width)
    throw std::invalid_argument("normalized_mae: size mismatch");
  double peak = 0.0;
  for (double z : truth.data) peak = std::max(peak, std::abs(z));
  if (peak < 1e-12)
    throw std::invalid_argument("normalized_mae: reference field is identically zero");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.data.size(); ++i)
    acc += std::abs(recon.data[i] - truth.data[i]);
  return acc / static_cast<double>(truth.data.size()) / peak;
}

}  // namespace taxel::optics
