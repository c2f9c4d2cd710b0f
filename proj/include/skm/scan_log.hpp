#pragma once

// Scan logs: one JSON object per line,
//   {"t":..,"pose":[x,y,theta],"angles":[..],"ranges":[..],"max_range":..}

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skm/core_types.hpp"
#include "skm/errors.hpp"

namespace skm {

inline nlohmann::json scan_to_json(const RangeScan& s) {
  return {{"t", s.t},
          {"pose", {s.pose.position.x(), s.pose.position.y(), s.pose.heading}},
          {"angles", s.angles},
          {"ranges", s.ranges},
          {"max_range", s.max_range}};
}

inline RangeScan scan_from_json(const nlohmann::json& j) {
  RangeScan s;
  try {
    s.t = j.value("t", 0.0);
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 3) throw ParseError("scan pose must be [x, y, theta]");
    s.pose.position = Point2(pose[0].get<double>(), pose[1].get<double>());
    s.pose.heading = pose[2].get<double>();
    s.angles = j.at("angles").get<std::vector<double>>();
    s.ranges = j.at("ranges").get<std::vector<double>>();
    s.max_range = j.at("max_range").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scan record: ") + e.what());
  }
  try {
    s.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(std::string("invalid scan record: ") + e.what());
  }
  return s;
}

inline void write_scan_log(std::ostream& out, const std::vector<RangeScan>& scans) {
  for (const auto& s : scans) out << scan_to_json(s).dump() << '\n';
}

/// Blank lines are skipped; any other malformed line raises ParseError.
inline std::vector<RangeScan> read_scan_log(std::istream& in) {
  std::vector<RangeScan> scans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      scans.push_back(scan_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("scan log line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("scan log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scans;
}

inline std::vector<RangeScan> read_scan_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scan log: " + path);
  return read_scan_log(in);
}

inline void write_scan_log(const std::string& path, const std::vector<RangeScan>& scans) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open scan log for writing: " + path);
  write_scan_log(out, scans);
}

}  // namespace skm
