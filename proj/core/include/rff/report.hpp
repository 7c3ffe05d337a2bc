// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "rff/metrics.hpp"

namespace rff {

enum class ReportFormat { kJson, kCsv };

ReportFormat parse_report_format(const std::string& name);

// Latency figures are written in ms rounded to 4 decimals; an undefined
// per-class AUC is written as null (JSON) or an empty cell (CSV).
std::string format_report(const MetricsReport& report, ReportFormat format);
MetricsReport parse_report(const std::string& text, ReportFormat format);

void export_report(const MetricsReport& report, const std::filesystem::path& path, ReportFormat format);
MetricsReport import_report(const std::filesystem::path& path, ReportFormat format);

double round_to(double value, int decimals);

}  // namespace rff
