#include "fds/ply.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace fds {

namespace {

enum class Type { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<Type> type_from_name(const std::string& s) {
  static const std::map<std::string, Type> names{
      {"char", Type::Int8},     {"int8", Type::Int8},       {"uchar", Type::UInt8},
      {"uint8", Type::UInt8},   {"short", Type::Int16},     {"int16", Type::Int16},
      {"ushort", Type::UInt16}, {"uint16", Type::UInt16},   {"int", Type::Int32},
      {"int32", Type::Int32},   {"uint", Type::UInt32},     {"uint32", Type::UInt32},
      {"float", Type::Float32}, {"float32", Type::Float32}, {"double", Type::Float64},
      {"float64", Type::Float64}};
  const auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::size_t size_of(Type t) {
  switch (t) {
    case Type::Int8:
    case Type::UInt8: return 1;
    case Type::Int16:
    case Type::UInt16: return 2;
    case Type::Int32:
    case Type::UInt32:
    case Type::Float32: return 4;
    case Type::Float64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const std::byte* p) {
  std::array<std::byte, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  return std::bit_cast<T>(buf);
}

template <typename T>
void store_le(std::vector<std::byte>& out, T v) {
  auto buf = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
  out.insert(out.end(), buf.begin(), buf.end());
}

double load_as_double(Type t, const std::byte* p) {
  switch (t) {
    case Type::Int8: return load_le<std::int8_t>(p);
    case Type::UInt8: return load_le<std::uint8_t>(p);
    case Type::Int16: return load_le<std::int16_t>(p);
    case Type::UInt16: return load_le<std::uint16_t>(p);
    case Type::Int32: return load_le<std::int32_t>(p);
    case Type::UInt32: return load_le<std::uint32_t>(p);
    case Type::Float32: return load_le<float>(p);
    case Type::Float64: return load_le<double>(p);
  }
  return 0.0;
}

std::uint64_t load_count(Type t, const std::byte* p) {
  const double v = load_as_double(t, p);
  if (!(v >= 0.0)) throw ParseError("PLY: negative list length");
  return static_cast<std::uint64_t>(v);
}

struct Property {
  std::string name;
  Type type = Type::Float32;
  bool is_list = false;
  Type count_type = Type::UInt8;
};

struct Element {
  std::string name;
  std::uint64_t count = 0;
  std::vector<Property> props;

  [[nodiscard]] bool fixed_stride() const {
    for (const auto& p : props)
      if (p.is_list) return false;
    return true;
  }
  [[nodiscard]] std::size_t stride() const {
    std::size_t s = 0;
    for (const auto& p : props) s += size_of(p.type);
    return s;
  }
};

constexpr std::array<const char*, 14> kRequired{
    "x",       "y",       "z",       "f_dc_0",  "f_dc_1",  "f_dc_2",
    "opacity", "scale_0", "scale_1", "scale_2", "rot_0",   "rot_1",
    "rot_2",   "rot_3"};

std::uint64_t parse_count(const std::string& tok, const std::string& line) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(tok, &used);
    if (used != tok.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("PLY: bad element count in '" + line + "'");
  }
}

}  // namespace

double volume_of(const SplatRecord3D& r) {
  return 4.0 / 3.0 * kPi * std::exp(r.scale_log.x()) * std::exp(r.scale_log.y()) *
         std::exp(r.scale_log.z());
}

std::vector<SplatRecord3D> parse_ply(std::span<const std::byte> bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::string_view marker = "end_header";
  std::size_t end = text.find(marker);
  if (text.substr(0, 3) != "ply" || end == std::string_view::npos) {
    throw ParseError("PLY: missing 'ply' magic or 'end_header'");
  }
  std::size_t payload = end + marker.size();
  if (payload < text.size() && text[payload] == '\r') ++payload;
  if (payload >= text.size() || text[payload] != '\n') {
    // A zero-vertex file may end right after end_header.
    if (payload != text.size()) throw ParseError("PLY: malformed end_header line");
  } else {
    ++payload;
  }

  std::istringstream header{std::string(text.substr(0, end))};
  std::string line;
  std::vector<Element> elements;
  bool have_format = false;
  std::getline(header, line);  // "ply"
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") throw ParseError("PLY: ASCII format is not supported; export binary_little_endian");
      if (fmt != "binary_little_endian") throw ParseError("PLY: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (kw == "element") {
      Element e;
      std::string count;
      ls >> e.name >> count;
      e.count = parse_count(count, line);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw ParseError("PLY: property before any element");
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        const auto c = type_from_name(ct), i = type_from_name(it);
        if (!c || !i) throw ParseError("PLY: unknown list types in '" + line + "'");
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        ls >> p.name;
        const auto ty = type_from_name(t);
        if (!ty) throw ParseError("PLY: unknown type '" + t + "' for property '" + p.name + "'");
        p.type = *ty;
      }
      if (p.name.empty()) throw ParseError("PLY: property without a name: '" + line + "'");
      elements.back().props.push_back(p);
    } else {
      throw ParseError("PLY: unexpected header line '" + line + "'");
    }
  }
  if (!have_format) throw ParseError("PLY: missing format line");

  std::size_t pos = payload;
  auto need = [&](std::size_t n, const std::string& what) {
    if (bytes.size() - pos < n) throw ParseError("PLY: truncated payload in " + what);
  };

  for (const Element& e : elements) {
    if (e.name != "vertex") {
      // Skip elements we do not use.
      if (e.fixed_stride()) {
        need(e.count * e.stride(), "element '" + e.name + "'");
        pos += e.count * e.stride();
        continue;
      }
      for (std::uint64_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.props) {
          if (!p.is_list) {
            need(size_of(p.type), "element '" + e.name + "'");
            pos += size_of(p.type);
            continue;
          }
          need(size_of(p.count_type), "element '" + e.name + "'");
          const std::uint64_t n = load_count(p.count_type, bytes.data() + pos);
          pos += size_of(p.count_type);
          need(n * size_of(p.type), "element '" + e.name + "'");
          pos += n * size_of(p.type);
        }
      }
      continue;
    }

    std::map<std::string, std::pair<std::size_t, Type>> offsets;
    std::size_t offset = 0;
    for (const auto& p : e.props) {
      if (p.is_list) throw ParseError("PLY: list property '" + p.name + "' in vertex element");
      offsets[p.name] = {offset, p.type};
      offset += size_of(p.type);
    }
    std::array<std::pair<std::size_t, Type>, kRequired.size()> slot;
    for (std::size_t k = 0; k < kRequired.size(); ++k) {
      const auto it = offsets.find(kRequired[k]);
      if (it == offsets.end()) {
        throw ParseError(std::string("PLY: missing required vertex property '") + kRequired[k] + "'");
      }
      slot[k] = it->second;
    }
    need(e.count * offset, "vertex element");
    std::vector<SplatRecord3D> out(e.count);
    for (std::uint64_t i = 0; i < e.count; ++i) {
      const std::byte* row = bytes.data() + pos + i * offset;
      std::array<double, kRequired.size()> v;
      for (std::size_t k = 0; k < kRequired.size(); ++k) {
        v[k] = load_as_double(slot[k].second, row + slot[k].first);
      }
      SplatRecord3D& r = out[i];
      r.position = Vec3(v[0], v[1], v[2]);
      r.dc_color = Vec3(v[3], v[4], v[5]);
      r.opacity_logit = v[6];
      r.scale_log = Vec3(v[7], v[8], v[9]);
      r.rotation = Vec4(v[10], v[11], v[12], v[13]);
      if (r.rotation.isZero(0.0)) {
        throw ParseError("PLY: vertex " + std::to_string(i) + " has a zero quaternion (rot_0..rot_3)");
      }
    }
    return out;
  }
  throw ParseError("PLY: no 'vertex' element");
}

std::vector<std::byte> serialize_ply(std::span<const SplatRecord3D> records, PlyScalar scalar) {
  const char* type = scalar == PlyScalar::Float32 ? "float" : "double";
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\nelement vertex " << records.size() << '\n';
  for (const char* name : kRequired) h << "property " << type << ' ' << name << '\n';
  h << "end_header\n";
  const std::string head = h.str();
  std::vector<std::byte> out(reinterpret_cast<const std::byte*>(head.data()),
                             reinterpret_cast<const std::byte*>(head.data()) + head.size());
  for (const auto& r : records) {
    const std::array<double, kRequired.size()> v{
        r.position.x(), r.position.y(),  r.position.z(),  r.dc_color.x(), r.dc_color.y(),
        r.dc_color.z(), r.opacity_logit, r.scale_log.x(), r.scale_log.y(), r.scale_log.z(),
        r.rotation[0],  r.rotation[1],   r.rotation[2],   r.rotation[3]};
    for (double x : v) {
      if (scalar == PlyScalar::Float32) store_le(out, static_cast<float>(x));
      else store_le(out, x);
    }
  }
  return out;
}

std::vector<SplatRecord3D> read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return parse_ply(std::as_bytes(std::span(raw)));
}

void write_ply(std::span<const SplatRecord3D> records, const std::filesystem::path& path,
               PlyScalar scalar) {
  const auto bytes = serialize_ply(records, scalar);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fds
