#include "fds/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fds {

RasterImage::RasterImage(int width, int height, const Vec3& fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw InvalidParameter("RasterImage: dimensions must be positive");
  }
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data_[3 * i] = fill.x();
    data_[3 * i + 1] = fill.y();
    data_[3 * i + 2] = fill.z();
  }
}

double RasterImage::sample(double x, double y, int c) const {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), width_ - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), height_ - 1);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
  const double bottom = (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

Vec3 RasterImage::sample(const Vec2& p) const {
  return {sample(p.x(), p.y(), 0), sample(p.x(), p.y(), 1), sample(p.x(), p.y(), 2)};
}

StripImage::StripImage(int n) {
  if (n < 1) {
    throw InvalidParameter("StripImage: length must be >= 1");
  }
  values_.assign(static_cast<std::size_t>(n), Vec3::Zero());
}

namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::vector<std::uint8_t> to_bytes(const RasterImage& img) {
  std::vector<std::uint8_t> bytes(img.data().size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize);
  return bytes;
}

RasterImage from_bytes(int w, int h, const std::uint8_t* bytes) {
  RasterImage img(w, h);
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = bytes[i];
  }
  return img;
}

// Next whitespace-separated PPM header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

void write_ppm(const RasterImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  const auto bytes = to_bytes(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  if (ppm_token(in) != "P6") throw ParseError(path.string() + ": not a binary P6 PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ParseError(path.string() + ": unsupported PPM dimensions or maxval");
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string() + ": truncated PPM payload");
  }
  return from_bytes(w, h, bytes.data());
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width());
  pi.height = static_cast<png_uint_32>(img.height());
  pi.format = PNG_FORMAT_RGB;
  const auto bytes = to_bytes(img);
  if (!png_image_write_to_file(&pi, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("png write failed for " + path.string() + ": " + pi.message);
  }
}

RasterImage read_png(const std::filesystem::path& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    throw IoError("cannot read png " + path.string() + ": " + pi.message);
  }
  pi.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw ParseError("png decode failed for " + path.string() + ": " + pi.message);
  }
  return from_bytes(static_cast<int>(pi.width), static_cast<int>(pi.height), bytes.data());
}

RasterImage read_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw IoError("unsupported image extension: " + path.string());
}

void write_image(const RasterImage& img, const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return write_png(img, path);
  if (ext == ".ppm") return write_ppm(img, path);
  throw IoError("unsupported image extension: " + path.string());
}

void write_strip_csv(const StripImage& strip, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(17);
  out << "r,g,b\n";
  for (int i = 0; i < strip.size(); ++i) {
    out << strip[i].x() << "," << strip[i].y() << "," << strip[i].z() << "\n";
  }
}

RasterImage make_test_texture(int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidParameter("make_test_texture: empty size");
  RasterImage img(width, height);
  const double w = width, h = height;
  struct Disk {
    double cx, cy, r;
    Vec3 color;
  };
  const Disk disks[] = {{0.72, 0.70, 0.13, {230, 40, 60}},
                        {0.85, 0.85, 0.07, {30, 30, 40}},
                        {0.60, 0.88, 0.05, {250, 220, 40}}};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = x / w, v = y / h;
      Vec3 c(60 + 150 * u, 90 + 100 * v, 200 - 120 * u * v);
      if (u < 0.5 && v < 0.5) {
        const double s = 0.5 + 0.5 * std::sin(2 * kPi * (6 * u + 3 * v));
        c = Vec3(40 + 180 * s, 120, 220 - 160 * s);
      } else if (u >= 0.5 && v < 0.5) {
        const bool odd = (static_cast<int>(u * 16) + static_cast<int>(v * 16)) % 2 != 0;
        c = odd ? Vec3(235, 235, 225) : Vec3(35, 70, 45);
      } else if (u < 0.5) {
        const double r = std::hypot(u - 0.25, v - 0.75);
        const double s = 0.5 + 0.5 * std::cos(2 * kPi * r * 10);
        c = Vec3(200 * s + 30, 80 + 60 * s, 60);
      }
      for (const Disk& d : disks) {
        if (std::hypot(u - d.cx, v - d.cy) < d.r) c = d.color;
      }
      img.set_pixel(x, y, c);
    }
  }
  return img;
}

}  // namespace fds
