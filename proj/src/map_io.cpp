#include "mtp/map_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mtp {

namespace {

/// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string expectLine(std::istream& in, const char* what) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  throw MapFormatError(std::string("unexpected end of map file, expected ") + what);
}

GridGeometry readHeader(std::istream& in) {
  GridGeometry g;
  {
    std::istringstream ls(expectLine(in, "magic"));
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != "voxmap" || version != 1)
      throw MapFormatError("bad magic, expected 'voxmap 1'");
  }
  {
    std::istringstream ls(expectLine(in, "dims"));
    std::string key;
    if (!(ls >> key >> g.dims[0] >> g.dims[1] >> g.dims[2]) || key != "dims")
      throw MapFormatError("bad dims line");
  }
  {
    std::istringstream ls(expectLine(in, "res"));
    std::string key;
    if (!(ls >> key >> g.resolution) || key != "res") throw MapFormatError("bad res line");
  }
  {
    std::istringstream ls(expectLine(in, "origin"));
    std::string key;
    if (!(ls >> key >> g.origin.x() >> g.origin.y() >> g.origin.z()) || key != "origin")
      throw MapFormatError("bad origin line");
  }
  if (!g.valid()) throw MapFormatError("invalid grid geometry in header");
  return g;
}

void writeHeader(std::ostream& out, const GridGeometry& g) {
  out << "voxmap 1\n";
  out << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
  out << "res " << shortest(g.resolution) << '\n';
  out << "origin " << shortest(g.origin.x()) << ' ' << shortest(g.origin.y()) << ' '
      << shortest(g.origin.z()) << '\n';
}

std::ifstream openIn(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw MapFormatError("cannot open file: " + path);
  return in;
}

}  // namespace

OccupancyGrid readVoxmap(std::istream& in) {
  const GridGeometry g = readHeader(in);
  {
    std::istringstream ls(expectLine(in, "data"));
    std::string key, enc;
    if (!(ls >> key >> enc) || key != "data" || enc != "01-rle")
      throw MapFormatError("expected 'data 01-rle'");
  }
  OccupancyGrid grid(g);
  auto& cells = grid.cells();
  std::size_t filled = 0;
  long long count = 0;
  int value = 0;
  while (filled < cells.size() && (in >> count >> value)) {
    if (count < 0 || (value != 0 && value != 1)) throw MapFormatError("bad run-length pair");
    if (filled + static_cast<std::size_t>(count) > cells.size())
      throw MapFormatError("run-length payload exceeds grid size");
    std::fill_n(cells.begin() + filled, count, static_cast<std::uint8_t>(value));
    filled += count;
  }
  if (filled != cells.size()) throw MapFormatError("run-length payload shorter than grid");
  return grid;
}

OccupancyGrid loadVoxmap(const std::string& path) {
  auto in = openIn(path);
  return readVoxmap(in);
}

void writeVoxmap(std::ostream& out, const OccupancyGrid& grid) {
  writeHeader(out, grid.geometry());
  out << "data 01-rle\n";
  const auto& cells = grid.cells();
  std::size_t i = 0;
  int on_line = 0;
  while (i < cells.size()) {
    std::size_t j = i;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    out << (j - i) << ' ' << int(cells[i]);
    out << (++on_line % 16 == 0 ? '\n' : ' ');
    i = j;
  }
  out << '\n';
}

void saveVoxmap(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream out(path);
  if (!out) throw MapFormatError("cannot write map file: " + path);
  writeVoxmap(out, grid);
}

void writeEsdfCache(std::ostream& out, const EsdfGrid& esdf) {
  writeHeader(out, esdf.geometry());
  out << "data f32-le " << shortest(esdf.saturation()) << '\n';
  for (float f : esdf.data()) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.write(buf, 4);
  }
}

void saveEsdfCache(const std::string& path, const EsdfGrid& esdf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapFormatError("cannot write esdf cache: " + path);
  writeEsdfCache(out, esdf);
}

EsdfGrid readEsdfCache(std::istream& in) {
  const GridGeometry g = readHeader(in);
  double d_sat = 0.0;
  {
    std::istringstream ls(expectLine(in, "data"));
    std::string key, enc;
    if (!(ls >> key >> enc >> d_sat) || key != "data" || enc != "f32-le" || !(d_sat > 0))
      throw MapFormatError("expected 'data f32-le <d_sat>'");
  }
  std::vector<float> dist(g.cellCount());
  for (auto& f : dist) {
    char buf[4];
    if (!in.read(buf, 4)) throw MapFormatError("esdf payload truncated");
    std::uint32_t bits;
    std::memcpy(&bits, buf, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    f = std::bit_cast<float>(bits);
  }
  return EsdfGrid(g, std::move(dist), d_sat);
}

EsdfGrid loadEsdfCache(const std::string& path) {
  auto in = openIn(path, std::ios::in | std::ios::binary);
  return readEsdfCache(in);
}

GoalSequence readGoals(std::istream& in, double r_tol) {
  GoalSequence goals;
  goals.r_tol = r_tol;
  std::string line;
  int lineno = 0;
  bool any_direction = false;
  std::vector<std::optional<GoalSequence::PassDirection>> dirs;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw MapFormatError("goal file line " + std::to_string(lineno) + ": bad number");
    if (v.empty()) continue;
    if (v.size() != 3 && v.size() != 7)
      throw MapFormatError("goal file line " + std::to_string(lineno) +
                           ": expected 'x y z' or 'x y z dx dy dz max_angle'");
    goals.positions.emplace_back(v[0], v[1], v[2]);
    if (v.size() == 7) {
      const Vec3 d(v[3], v[4], v[5]);
      if (!(d.norm() > 0.0) || !(v[6] >= 0.0))
        throw MapFormatError("goal file line " + std::to_string(lineno) +
                             ": pass direction needs a nonzero vector and angle >= 0");
      dirs.push_back(GoalSequence::PassDirection{d.normalized(), v[6]});
      any_direction = true;
    } else {
      dirs.emplace_back(std::nullopt);
    }
  }
  if (any_direction) goals.directions = std::move(dirs);
  return goals;
}

GoalSequence loadGoals(const std::string& path, double r_tol) {
  auto in = openIn(path, std::ios::in);
  return readGoals(in, r_tol);
}

void writeGoals(std::ostream& out, const GoalSequence& goals) {
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const Vec3& p = goals.positions[i];
    out << shortest(p.x()) << ' ' << shortest(p.y()) << ' ' << shortest(p.z());
    if (const auto d = goals.directionAt(i))
      out << ' ' << shortest(d->direction.x()) << ' ' << shortest(d->direction.y()) << ' '
          << shortest(d->direction.z()) << ' ' << shortest(d->max_angle);
    out << '\n';
  }
}

void saveGoals(const std::string& path, const GoalSequence& goals) {
  std::ofstream out(path);
  if (!out) throw MapFormatError("cannot write goal file: " + path);
  writeGoals(out, goals);
}

}  // namespace mtp
