#include "semloc/projection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "semloc/errors.hpp"

namespace semloc {
namespace {

void check_mask(const DepthMaskPair& pair) {
  if (pair.depth == nullptr) throw InvalidArgument("depth/mask pair has no depth image");
  if (pair.mask.empty()) throw InvalidArgument("empty segmentation mask");
  const DepthImage& img = *pair.depth;
  if (img.data.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height)) {
    throw InvalidArgument("depth image size does not match its dimensions");
  }
  for (const Pixel& p : pair.mask) {
    if (p.u < 0 || p.v < 0 || p.u >= img.height || p.v >= img.width) {
      throw InvalidArgument("mask pixel (" + std::to_string(p.u) + "," + std::to_string(p.v) +
                            ") outside the image");
    }
  }
}

std::uint32_t to_little_endian(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((bits & 0xffU) << 24) | ((bits & 0xff00U) << 8) | ((bits >> 8) & 0xff00U) | (bits >> 24);
  }
  return bits;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (cx < 0.0 || cx > width || cy < 0.0 || cy > height) {
    throw InvalidArgument("principal point outside the image");
  }
}

Pixel landmark_range_pixel(const DepthMaskPair& pair) {
  check_mask(pair);
  float best = std::numeric_limits<float>::infinity();
  const Pixel* arg = nullptr;
  for (const Pixel& p : pair.mask) {
    const float d = pair.depth->at(p);
    if (d > 0.0f && d < best) {
      best = d;
      arg = &p;
    }
  }
  if (arg == nullptr) throw NoValidDepth();
  return *arg;
}

double landmark_range(const DepthMaskPair& pair) {
  return static_cast<double>(pair.depth == nullptr ? 0.0f
                                                   : pair.depth->at(landmark_range_pixel(pair)));
}

CameraPoint pixel_to_camera(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw InvalidArgument("back-projection needs a positive depth");
  return {depth * (v - k.cx) / k.fx, depth * (u - k.cy) / k.fy, depth};
}

std::pair<double, double> camera_to_pixel(const CameraPoint& point, const CameraIntrinsics& k) {
  if (!(point.z > 0.0)) throw InvalidArgument("projection needs a point in front of the camera");
  const double u = point.y * k.fy / point.z + k.cy;
  const double v = point.x * k.fx / point.z + k.cx;
  return {u, v};
}

BevLandmark camera_to_bev(const CameraPoint& point, SemanticClass cls) {
  return {-point.x, point.z, cls};
}

BevLandmark project_detection(const DepthMaskPair& pair, const CameraIntrinsics& k) {
  const Pixel p = landmark_range_pixel(pair);
  const double depth = static_cast<double>(pair.depth->at(p));
  return camera_to_bev(pixel_to_camera(p, depth, k), pair.cls);
}

SemanticScan fuse_semantic_scan(const RangeScan& scan, std::span<const BevLandmark> landmarks,
                                double r_sem) {
  if (!(r_sem > 0.0)) throw InvalidArgument("semantic inflation radius must be positive");
  SemanticScan out;
  out.observations.reserve(scan.ranges.size());
  const double r_sem_sq = r_sem * r_sem;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (scan.is_sentinel(i)) continue;
    const double range = scan.ranges[i];
    const double bearing = scan.beam_angle(i);
    const double px = range * std::sin(bearing);  // BEV x (left)
    const double pz = range * std::cos(bearing);  // BEV z (forward)

    SemanticClass cls = SemanticClass::background;
    double best_sq = std::numeric_limits<double>::infinity();
    for (const BevLandmark& lm : landmarks) {
      const double dx = px - lm.x_bev;
      const double dz = pz - lm.z_bev;
      const double d_sq = dx * dx + dz * dz;
      if (d_sq > r_sem_sq) continue;
      if (d_sq < best_sq || (d_sq == best_sq && lm.cls == SemanticClass::pole)) {
        best_sq = d_sq;
        cls = lm.cls;
      }
    }
    out.observations.push_back({cls, range, bearing});
  }
  return out;
}

SemanticScan detections_to_scan(std::span<const BevLandmark> landmarks) {
  SemanticScan out;
  out.observations.reserve(landmarks.size());
  for (const BevLandmark& lm : landmarks) {
    out.observations.push_back(
        {lm.cls, std::hypot(lm.x_bev, lm.z_bev), normalize_angle(std::atan2(lm.x_bev, lm.z_bev))});
  }
  return out;
}

SemanticScan clip_to_range(SemanticScan scan, double max_range) {
  std::erase_if(scan.observations, [&](const Observation& o) { return !(o.range <= max_range); });
  return scan;
}

DepthImage read_depth_f32le(const std::filesystem::path& path, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("depth image dimensions must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open depth file " + path.string());
  DepthImage img{width, height, {}};
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  img.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
      throw ParseError(i, "depth file " + path.string() + " is shorter than width*height floats");
    }
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    img.data[i] = std::bit_cast<float>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(n, "depth file " + path.string() + " has trailing bytes");
  }
  return img;
}

void write_depth_f32le(const std::filesystem::path& path, const DepthImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write depth file " + path.string());
  for (float f : image.data) {
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.write(bytes, 4);
  }
}

std::vector<Pixel> read_mask_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mask file " + path.string());
  std::vector<Pixel> mask;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Pixel p;
    char comma = 0;
    if (!(ss >> p.u >> comma >> p.v) || comma != ',') {
      throw ParseError(line_no, "expected 'u,v' in mask file");
    }
    mask.push_back(p);
  }
  return mask;
}

void write_mask_file(const std::filesystem::path& path, std::span<const Pixel> mask) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mask file " + path.string());
  out << "# u,v\n";
  for (const Pixel& p : mask) out << p.u << ',' << p.v << '\n';
}

}  // namespace semloc
