#include "advlogo/mesh.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "advlogo/errors.hpp"

namespace advlogo {

namespace {

const Eigen::Vector3d kDefaultGray(0.5, 0.5, 0.5);

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_number(std::string_view token, int line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError("malformed number '" + std::string(token) + "'", line);
  }
  return value;
}

long parse_index(std::string_view token, int line) {
  const std::string_view head = token.substr(0, token.find('/'));
  long value = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (head.empty() || ec != std::errc() || ptr != head.data() + head.size()) {
    throw ParseError("malformed face index '" + std::string(token) + "'", line);
  }
  return value;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void TriMesh::validate() const {
  if (faces.empty()) throw DomainError("mesh '" + name + "' has no faces");
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    if ((f.array() < 0).any() || (f.array() >= n).any()) {
      throw IndexError("mesh '" + name + "': face index out of range");
    }
  }
  if (face_textures.size() != faces.size()) {
    throw DimensionError("mesh '" + name + "': one texture cube per face required");
  }
}

TriMesh parse_obj(std::string_view text, std::string name) {
  TriMesh mesh;
  mesh.name = std::move(name);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw ParseError("vertex needs 3 coordinates", line_no);
      mesh.vertices.emplace_back(parse_number(tokens[1], line_no), parse_number(tokens[2], line_no),
                                 parse_number(tokens[3], line_no));
    } else if (tokens[0] == "f") {
      if (tokens.size() != 4) {
        throw UnsupportedFaceError(
            "only triangular faces are supported (got " + std::to_string(tokens.size() - 1) + ")",
            line_no);
      }
      Eigen::Vector3i face;
      const long count = static_cast<long>(mesh.vertices.size());
      for (int k = 0; k < 3; ++k) {
        long idx = parse_index(tokens[static_cast<std::size_t>(k) + 1], line_no);
        if (idx < 0) idx = count + idx + 1;  // relative reference
        if (idx < 1) {
          throw IndexError("line " + std::to_string(line_no) + ": face index out of range");
        }
        face[k] = static_cast<int>(idx - 1);
      }
      mesh.faces.push_back(face);
    } else if (tokens[0] == "o" && tokens.size() > 1 && mesh.name.empty()) {
      mesh.name = std::string(tokens[1]);
    }
    if (end == text.size()) break;
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    if ((f.array() >= n).any()) throw IndexError("face references a vertex beyond the vertex list");
  }
  if (mesh.faces.empty()) throw DomainError("OBJ contains no faces");
  mesh.face_textures.assign(mesh.faces.size(), TextureCube::filled(kDefaultGray));
  return mesh;
}

TriMesh load_obj(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.rfind('.'));
  TriMesh mesh = parse_obj(ss.str());
  if (mesh.name.empty()) mesh.name = stem;
  return mesh;
}

std::string write_obj(const TriMesh& mesh) {
  std::string out;
  if (!mesh.name.empty()) out += "o " + mesh.name + "\n";
  for (const auto& v : mesh.vertices) {
    out += "v " + format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z()) + "\n";
  }
  for (const auto& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " +
           std::to_string(f[2] + 1) + "\n";
  }
  return out;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << write_obj(mesh);
}

LogoSubmesh extract_logo_submesh(const TriMesh& mesh, std::span<const int> face_ids) {
  if (face_ids.empty()) throw DomainError("logo submesh needs at least one face");
  LogoSubmesh logo;
  logo.host_name = mesh.name;
  logo.host_face_count = mesh.face_count();
  logo.is_logo_face.assign(mesh.faces.size(), false);
  for (int id : face_ids) {
    if (id < 0 || id >= mesh.face_count()) {
      throw IndexError("logo face id " + std::to_string(id) + " out of range");
    }
    if (logo.is_logo_face[static_cast<std::size_t>(id)]) continue;
    logo.is_logo_face[static_cast<std::size_t>(id)] = true;
    logo.face_ids.push_back(id);
    logo.centroids.push_back(mesh.face_centroid(id));
    logo.bbox.extend(logo.centroids.back());
  }
  return logo;
}

PersonProxy generate_person_proxy(const ProxyParams& p) {
  if (!(p.height > 0) || !(p.radius > 0) || !(p.depth_scale > 0)) {
    throw DomainError("person proxy: height, radius and depth_scale must be positive");
  }
  if (p.segments < 8) throw DomainError("person proxy: segments must be >= 8");
  if (p.rings < 1) throw DomainError("person proxy: rings must be >= 1");

  PersonProxy proxy;
  TriMesh& mesh = proxy.mesh;
  mesh.name = p.name;
  const int n = p.segments;
  for (int r = 0; r <= p.rings; ++r) {
    const double y = -p.height / 2 + p.height * r / p.rings;
    for (int k = 0; k < n; ++k) {
      const double theta = 2.0 * std::numbers::pi * (k + 0.5) / n;
      mesh.vertices.emplace_back(p.radius * std::sin(theta), y,
                                 p.depth_scale * p.radius * std::cos(theta));
    }
  }
  const int bottom_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, -p.height / 2, 0.0);
  mesh.vertices.emplace_back(0.0, p.height / 2, 0.0);
  const int top_center = bottom_center + 1;

  auto vid = [n](int r, int k) { return r * n + (k % n); };
  for (int r = 0; r < p.rings; ++r) {
    for (int k = 0; k < n; ++k) {
      mesh.faces.emplace_back(vid(r, k), vid(r, k + 1), vid(r + 1, k + 1));
      mesh.faces.emplace_back(vid(r, k), vid(r + 1, k + 1), vid(r + 1, k));
    }
  }
  for (int k = 0; k < n; ++k) mesh.faces.emplace_back(bottom_center, vid(0, k + 1), vid(0, k));
  for (int k = 0; k < n; ++k) {
    mesh.faces.emplace_back(top_center, vid(p.rings, k), vid(p.rings, k + 1));
  }
  mesh.face_textures.assign(mesh.faces.size(), TextureCube::filled(kDefaultGray));
  proxy.front_panel = front_panel_faces(p, 1.0);
  return proxy;
}

PersonProxy generate_person_proxy(double height, double radius, int segments) {
  ProxyParams p;
  p.height = height;
  p.radius = radius;
  p.segments = segments;
  return generate_person_proxy(p);
}

std::vector<int> front_panel_faces(const ProxyParams& p, double scale) {
  if (!(scale > 0 && scale <= 1)) throw DomainError("panel scale must lie in (0, 1]");
  const int n = p.segments;
  const double half_angle = p.panel_half_angle_deg * scale * std::numbers::pi / 180.0;
  const double band_center = (p.panel_bottom + p.panel_top) / 2;
  const double band_half = (p.panel_top - p.panel_bottom) / 2 * scale;
  constexpr double kTol = 1e-9;
  std::vector<int> ids;
  for (int r = 0; r < p.rings; ++r) {
    const double frac = (r + 0.5) / p.rings;
    if (std::abs(frac - band_center) > band_half + kTol) continue;
    for (int k = 0; k < n; ++k) {
      // Segment k spans vertex angles (k + 0.5) and (k + 1.5) steps.
      double center = 2.0 * std::numbers::pi * (k + 1) / n;
      if (center > std::numbers::pi) center -= 2.0 * std::numbers::pi;
      if (std::abs(center) > half_angle + kTol) continue;
      ids.push_back(2 * (r * n + k));
      ids.push_back(2 * (r * n + k) + 1);
    }
  }
  if (ids.empty()) throw DomainError("front panel selection is empty at this scale");
  return ids;
}

}  // namespace advlogo
