#include "histreg/eval/landmarks.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "histreg/core/serialize.hpp"

namespace histreg::metrics {

namespace {

double parse_number(const std::string& text, const std::string& path, int line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{}) throw ParseError(path + ": bad number '" + text + "' at line " + std::to_string(line), line);
  for (const char* p = ptr; p < end; ++p)
    if (*p != ' ' && *p != '\t')
      throw ParseError(path + ": trailing junk '" + text + "' at line " + std::to_string(line), line);
  return value;
}

}  // namespace

std::vector<Landmark> read_landmarks(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  int lineNo = 1;
  if (!std::getline(is, line) || line != "# landmarks v1")
    throw ParseError(path + ": missing '# landmarks v1' header", 1);

  std::vector<Landmark> out;
  while (std::getline(is, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError(path + ": expected 'label,x,y' at line " + std::to_string(lineNo), lineNo);
    Landmark lm;
    lm.label = line.substr(0, c1);
    lm.point.x = parse_number(line.substr(c1 + 1, c2 - c1 - 1), path, lineNo);
    lm.point.y = parse_number(line.substr(c2 + 1), path, lineNo);
    out.push_back(std::move(lm));
  }
  return out;
}

void write_landmarks(const std::string& path, const std::vector<Landmark>& points) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# landmarks v1\n";
  for (const Landmark& lm : points)
    os << lm.label << ',' << format_double(lm.point.x) << ',' << format_double(lm.point.y) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

std::vector<LandmarkPair> pair_landmarks(const std::vector<Landmark>& moving,
                                         const std::vector<Landmark>& reference) {
  std::map<std::string, PixelCoord> refByLabel;
  for (const Landmark& lm : reference)
    if (!refByLabel.emplace(lm.label, lm.point).second)
      throw ParseError("pair_landmarks: duplicate reference label '" + lm.label + "'", 0);

  std::vector<LandmarkPair> pairs;
  pairs.reserve(moving.size());
  std::map<std::string, bool> seen;
  for (const Landmark& lm : moving) {
    if (!seen.emplace(lm.label, true).second)
      throw ParseError("pair_landmarks: duplicate moving label '" + lm.label + "'", 0);
    const auto it = refByLabel.find(lm.label);
    if (it == refByLabel.end())
      throw ParseError("pair_landmarks: label '" + lm.label + "' missing on the reference side", 0);
    pairs.push_back({lm.point, it->second, lm.label});
  }
  if (pairs.size() != reference.size())
    throw ParseError("pair_landmarks: reference side has extra labels", 0);
  return pairs;
}

}  // namespace histreg::metrics
