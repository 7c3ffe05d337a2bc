// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rff/errors.hpp"

namespace rff {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double from_number_or_null(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

double parse_double(const std::string& s) {
  if (s.empty()) return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in number");
  return v;
}

std::string to_json(const MetricsReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["confusion"] = r.confusion;
  json auc = json::array();
  for (double a : r.auc_per_class) auc.push_back(number_or_null(a));
  j["auc_per_class"] = auc;
  j["auc_macro"] = number_or_null(r.auc_macro);
  if (r.latency) {
    j["latency"] = {{"mean_ms", round_to(r.latency->mean_ms, 4)},
                    {"std_ms", round_to(r.latency->std_ms, 4)},
                    {"ci95_ms", round_to(r.latency->ci95_ms, 4)},
                    {"runs", r.latency->runs}};
  }
  return j.dump(2) + "\n";
}

MetricsReport from_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.accuracy = j.at("accuracy").get<double>();
  r.confusion = j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
  for (const json& a : j.at("auc_per_class")) r.auc_per_class.push_back(from_number_or_null(a));
  r.auc_macro = from_number_or_null(j.at("auc_macro"));
  if (j.contains("latency")) {
    const json& l = j.at("latency");
    r.latency = LatencyStats{l.at("mean_ms").get<double>(), l.at("std_ms").get<double>(),
                             l.at("ci95_ms").get<double>(), l.at("runs").get<std::size_t>()};
  }
  return r;
}

// Rows of `field,index,value`; a confusion row's value is its counts joined
// by spaces.
std::string to_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "field,index,value\n";
  out << "accuracy,," << format_double(r.accuracy) << '\n';
  out << "auc_macro,," << format_double(r.auc_macro) << '\n';
  for (std::size_t c = 0; c < r.auc_per_class.size(); ++c) {
    out << "auc_per_class," << c << ',' << format_double(r.auc_per_class[c]) << '\n';
  }
  for (std::size_t c = 0; c < r.confusion.size(); ++c) {
    out << "confusion," << c << ',';
    for (std::size_t k = 0; k < r.confusion[c].size(); ++k) out << (k ? " " : "") << r.confusion[c][k];
    out << '\n';
  }
  if (r.latency) {
    out << "latency_mean_ms,," << format_double(round_to(r.latency->mean_ms, 4)) << '\n';
    out << "latency_std_ms,," << format_double(round_to(r.latency->std_ms, 4)) << '\n';
    out << "latency_ci95_ms,," << format_double(round_to(r.latency->ci95_ms, 4)) << '\n';
    out << "latency_runs,," << r.latency->runs << '\n';
  }
  return out.str();
}

MetricsReport from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "field,index,value") throw std::invalid_argument("missing CSV header");
  MetricsReport r;
  LatencyStats lat;
  bool has_latency = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw std::invalid_argument("malformed CSV row");
    const std::string field = line.substr(0, c1);
    const std::string index = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string value = line.substr(c2 + 1);
    if (field == "accuracy") {
      r.accuracy = parse_double(value);
    } else if (field == "auc_macro") {
      r.auc_macro = parse_double(value);
    } else if (field == "auc_per_class") {
      if (std::stoul(index) != r.auc_per_class.size()) throw std::invalid_argument("AUC rows out of order");
      r.auc_per_class.push_back(parse_double(value));
    } else if (field == "confusion") {
      if (std::stoul(index) != r.confusion.size()) throw std::invalid_argument("confusion rows out of order");
      std::istringstream cells(value);
      std::vector<std::uint64_t> row;
      std::uint64_t v = 0;
      while (cells >> v) row.push_back(v);
      r.confusion.push_back(std::move(row));
    } else if (field == "latency_mean_ms") {
      lat.mean_ms = parse_double(value);
      has_latency = true;
    } else if (field == "latency_std_ms") {
      lat.std_ms = parse_double(value);
    } else if (field == "latency_ci95_ms") {
      lat.ci95_ms = parse_double(value);
    } else if (field == "latency_runs") {
      lat.runs = std::stoul(value);
    } else {
      throw std::invalid_argument("unknown field '" + field + "'");
    }
  }
  if (has_latency) r.latency = lat;
  return r;
}

}  // namespace

double round_to(double value, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(value * f) / f;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw ConfigError("unknown report format '" + name + "' (expected json or csv)");
}

std::string format_report(const MetricsReport& report, ReportFormat format) {
  return format == ReportFormat::kJson ? to_json(report) : to_csv(report);
}

MetricsReport parse_report(const std::string& text, ReportFormat format) {
  try {
    return format == ReportFormat::kJson ? from_json(text) : from_csv(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid report: ") + e.what(), 0);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid report: ") + e.what(), 0);
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("invalid report: ") + e.what(), 0);
  }
}

void export_report(const MetricsReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_report(report, format);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

MetricsReport import_report(const std::filesystem::path& path, ReportFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_report(text.str(), format);
}

}  // namespace rff
