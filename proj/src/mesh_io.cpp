#include "mvps/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace mvps {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

ScalarType parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  throw InputError("ply: unknown scalar type '" + name + "'");
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary_scalar(std::istream& in, ScalarType t) {
  char buf[8];
  const std::size_t n = scalar_size(t);
  if (!in.read(buf, static_cast<std::streamsize>(n))) {
    throw InputError("ply: unexpected end of binary data");
  }
  switch (t) {
    case ScalarType::Int8: return load<std::int8_t>(buf);
    case ScalarType::UInt8: return load<std::uint8_t>(buf);
    case ScalarType::Int16: return load<std::int16_t>(buf);
    case ScalarType::UInt16: return load<std::uint16_t>(buf);
    case ScalarType::Int32: return load<std::int32_t>(buf);
    case ScalarType::UInt32: return load<std::uint32_t>(buf);
    case ScalarType::Float32: return load<float>(buf);
    case ScalarType::Float64: return load<double>(buf);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw InputError("unsupported mesh format: " + path.string());
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open mesh: " + path.string());

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InputError("not a PLY file: " + path.string());

  bool binary = false;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw InputError("ply: unsupported format " + fmt);
      }
    } else if (keyword == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw InputError("ply: property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(count_type);
        p.type = parse_scalar(item_type);
      } else {
        p.type = parse_scalar(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      break;
    }
  }

  TriangleMesh mesh;
  bool has_color = false;
  auto next_ascii = [&](std::istream& s) {
    double v;
    if (!(s >> v)) throw InputError("ply: malformed ASCII data");
    return v;
  };

  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex) {
      mesh.vertices.reserve(e.count);
      has_color = std::any_of(e.properties.begin(), e.properties.end(),
                              [](const PlyProperty& p) { return p.name == "red"; });
    }
    for (std::size_t i = 0; i < e.count; ++i) {
      std::istringstream row;
      if (!binary) {
        if (!std::getline(in, line)) throw InputError("ply: truncated ASCII data");
        row.str(line);
      }
      Vec3 position = Vec3::Zero();
      Vec3 color = Vec3::Zero();
      for (const PlyProperty& p : e.properties) {
        if (p.is_list) {
          const auto count = static_cast<std::size_t>(
              binary ? read_binary_scalar(in, p.count_type) : next_ascii(row));
          std::vector<int> indices(count);
          for (std::size_t k = 0; k < count; ++k) {
            indices[k] = static_cast<int>(binary ? read_binary_scalar(in, p.type)
                                                 : next_ascii(row));
          }
          if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
            for (std::size_t k = 2; k < count; ++k) {
              mesh.triangles.push_back({indices[0], indices[k - 1], indices[k]});
            }
          }
          continue;
        }
        const double v = binary ? read_binary_scalar(in, p.type) : next_ascii(row);
        if (!is_vertex) continue;
        const double scale =
            p.type == ScalarType::UInt8 ? 1.0 / 255.0
            : p.type == ScalarType::UInt16 ? 1.0 / 65535.0 : 1.0;
        if (p.name == "x") position.x() = v;
        else if (p.name == "y") position.y() = v;
        else if (p.name == "z") position.z() = v;
        else if (p.name == "red") color.x() = v * scale;
        else if (p.name == "green") color.y() = v * scale;
        else if (p.name == "blue") color.z() = v * scale;
      }
      if (is_vertex) {
        mesh.vertices.push_back(position);
        if (has_color) mesh.albedo.push_back(color);
      }
    }
  }
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh: " + path.string());
  TriangleMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) throw InputError("obj: malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string token;
      while (ls >> token) {
        int idx = std::stoi(token.substr(0, token.find('/')));
        idx = idx < 0 ? static_cast<int>(mesh.vertices.size()) + idx : idx - 1;
        face.push_back(idx);
      }
      for (std::size_t k = 2; k < face.size(); ++k) {
        mesh.triangles.push_back({face[0], face[k - 1], face[k]});
      }
    }
  }
  validate_mesh(mesh);
  return mesh;
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  const std::string ext = lower_extension(path);
  if (ext == ".ply") return write_ply(path, mesh);
  if (ext == ".obj") return write_obj(path, mesh);
  throw InputError("unsupported mesh format: " + path.string());
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh,
               PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write mesh: " + path.string());
  const bool color = mesh.has_albedo();
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n"
                                     : "format binary_little_endian 1.0\n")
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (color) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  if (format == PlyFormat::Ascii) {
    out.precision(17);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      const Vec3& v = mesh.vertices[i];
      out << v.x() << ' ' << v.y() << ' ' << v.z();
      if (color) {
        const Vec3& c = mesh.albedo[i];
        out << ' ' << int(to_byte(c.x())) << ' ' << int(to_byte(c.y())) << ' '
            << int(to_byte(c.z()));
      }
      out << '\n';
    }
    for (const Triangle& t : mesh.triangles) {
      out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    put(out, v.x());
    put(out, v.y());
    put(out, v.z());
    if (color) {
      put(out, to_byte(mesh.albedo[i].x()));
      put(out, to_byte(mesh.albedo[i].y()));
      put(out, to_byte(mesh.albedo[i].z()));
    }
  }
  for (const Triangle& t : mesh.triangles) {
    put(out, std::uint8_t{3});
    for (int idx : t) put(out, static_cast<std::int32_t>(idx));
  }
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh: " + path.string());
  out.precision(17);
  for (const Vec3& v : mesh.vertices) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const Triangle& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

}  // namespace mvps
