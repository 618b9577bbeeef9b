#include "histreg/core/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace histreg {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_affine_rows(std::ostream& os, const AffineTransform2D& a) {
  os << format_double(a.a11) << ' ' << format_double(a.a12) << ' ' << format_double(a.tx) << '\n';
  os << format_double(a.a21) << ' ' << format_double(a.a22) << ' ' << format_double(a.ty) << '\n';
}

AffineTransform2D read_affine_rows(std::istream& is, int& line) {
  AffineTransform2D a;
  if (!(is >> a.a11 >> a.a12 >> a.tx)) throw ParseError("transform: bad affine row 1", line);
  ++line;
  if (!(is >> a.a21 >> a.a22 >> a.ty)) throw ParseError("transform: bad affine row 2", line);
  ++line;
  return a;
}

}  // namespace

void write_transform(std::ostream& os, const Transform& t) {
  os << "# transform v1\n";
  if (std::holds_alternative<AffineTransform2D>(t)) {
    os << "type affine\n";
    write_affine_rows(os, std::get<AffineTransform2D>(t));
  } else {
    const TpsWarp& w = std::get<TpsWarp>(t);
    os << "type tps\n";
    os << "lambda " << format_double(w.regularization) << '\n';
    os << "affine\n";
    write_affine_rows(os, w.affinePart);
    os << "points " << w.controlPoints.size() << '\n';
    for (std::size_t i = 0; i < w.controlPoints.size(); ++i) {
      os << format_double(w.controlPoints[i].x) << ' ' << format_double(w.controlPoints[i].y) << ' '
         << format_double(w.kernelWeights[i][0]) << ' ' << format_double(w.kernelWeights[i][1]) << '\n';
    }
  }
}

Transform read_transform(std::istream& is) {
  std::string word;
  int line = 1;
  if (!std::getline(is, word) || word != "# transform v1") throw ParseError("transform: missing header", 1);
  ++line;
  std::string key, type;
  if (!(is >> key >> type) || key != "type") throw ParseError("transform: missing type field", line);
  ++line;
  if (type == "affine") {
    return read_affine_rows(is, line);
  }
  if (type == "tps") {
    TpsWarp w;
    if (!(is >> key >> w.regularization) || key != "lambda") throw ParseError("transform: missing lambda", line);
    ++line;
    if (!(is >> key) || key != "affine") throw ParseError("transform: missing affine section", line);
    ++line;
    w.affinePart = read_affine_rows(is, line);
    std::size_t n = 0;
    if (!(is >> key >> n) || key != "points") throw ParseError("transform: missing points count", line);
    ++line;
    w.controlPoints.resize(n);
    w.kernelWeights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(is >> w.controlPoints[i].x >> w.controlPoints[i].y >> w.kernelWeights[i][0] >> w.kernelWeights[i][1]))
        throw ParseError("transform: bad control point row", line);
      ++line;
    }
    return w;
  }
  throw ParseError("transform: unknown type '" + type + "'", line);
}

void write_transform_file(const std::string& path, const Transform& t) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_transform(os, t);
  if (!os) throw IoError("write failed: " + path);
}

Transform read_transform_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  return read_transform(is);
}

}  // namespace histreg
