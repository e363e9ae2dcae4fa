// Copyright 2026 The chunkflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chunkflow/results.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "chunkflow/errors.h"

namespace chunkflow {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
T ParseNumber(std::string_view field, int line) {
  T value{};
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IoError("rows file line " + std::to_string(line) +
                  ": bad number '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double Mean(const std::vector<double>& values) {
  double total = 0.0;
  int count = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    total += v;
    ++count;
  }
  return count > 0 ? total / count : kNaN;
}

nlohmann::json MeansToJson(const MetricMeans& m) {
  return {{"success", m.success},   {"env_steps", m.env_steps},
          {"l2_mean", m.l2_mean},   {"l2_max", m.l2_max},
          {"max_acc", m.max_acc},   {"max_jerk", m.max_jerk}};
}

// Arithmetic mean over delays, metric by metric, skipping NaN.
MetricMeans AverageOverDelays(const std::vector<MetricMeans>& per_delay) {
  auto field = [&](double MetricMeans::*member) {
    std::vector<double> values;
    for (const auto& m : per_delay) values.push_back(m.*member);
    return Mean(values);
  };
  MetricMeans out;
  out.success = field(&MetricMeans::success);
  out.env_steps = field(&MetricMeans::env_steps);
  out.l2_mean = field(&MetricMeans::l2_mean);
  out.l2_max = field(&MetricMeans::l2_max);
  out.max_acc = field(&MetricMeans::max_acc);
  out.max_jerk = field(&MetricMeans::max_jerk);
  return out;
}

}  // namespace

void WriteRowsCsv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kRowsHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << MethodName(r.method) << ',' << r.delay << ',' << r.suite << ','
        << r.seed << ',' << (m.success ? 1 : 0) << ',' << m.env_steps << ','
        << FormatDouble(m.l2_mean) << ',' << FormatDouble(m.l2_max) << ','
        << FormatDouble(m.max_acc) << ',' << FormatDouble(m.max_jerk) << '\n';
  }
}

std::vector<ResultRow> ReadRowsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRowsHeader) {
    throw IoError("rows file must start with header '" +
                  std::string(kRowsHeader) + "'");
  }
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitCommas(line);
    if (f.size() != 10) {
      throw IoError("rows file line " + std::to_string(line_no) +
                    ": expected 10 fields");
    }
    ResultRow r;
    try {
      r.method = ParseMethod(f[0]);
    } catch (const StructuralError& e) {
      throw IoError("rows file line " + std::to_string(line_no) + ": " +
                    e.what());
    }
    r.delay = ParseNumber<int>(f[1], line_no);
    r.suite = std::string(f[2]);
    r.seed = ParseNumber<uint64_t>(f[3], line_no);
    r.metrics.success = ParseNumber<int>(f[4], line_no) != 0;
    r.metrics.env_steps = ParseNumber<int>(f[5], line_no);
    r.metrics.l2_mean = ParseNumber<double>(f[6], line_no);
    r.metrics.l2_max = ParseNumber<double>(f[7], line_no);
    r.metrics.max_acc = ParseNumber<double>(f[8], line_no);
    r.metrics.max_jerk = ParseNumber<double>(f[9], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

MetricMeans EpisodeMeans(std::span<const ResultRow> rows) {
  if (rows.empty()) {
    return {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
  }
  MetricMeans m{};
  double steps_total = 0.0;
  int successes = 0;
  for (const auto& r : rows) {
    m.success += r.metrics.success ? 1.0 : 0.0;
    if (r.metrics.success) {
      steps_total += r.metrics.env_steps;
      ++successes;
    }
    m.l2_mean += r.metrics.l2_mean;
    m.l2_max += r.metrics.l2_max;
    m.max_acc += r.metrics.max_acc;
    m.max_jerk += r.metrics.max_jerk;
  }
  const double n = static_cast<double>(rows.size());
  m.success /= n;
  m.env_steps = successes > 0 ? steps_total / successes : kNaN;
  m.l2_mean /= n;
  m.l2_max /= n;
  m.max_acc /= n;
  m.max_jerk /= n;
  return m;
}

MetricMeans AggregateSuites(std::span<const WeightedSuite> suites) {
  auto field = [&](double MetricMeans::*member) {
    std::vector<SuiteValue> values;
    for (const auto& s : suites) {
      if (!std::isnan(s.means.*member)) {
        values.push_back({s.count, s.means.*member});
      }
    }
    return values.empty() ? kNaN : AggregateWeighted(values);
  };
  MetricMeans out;
  out.success = field(&MetricMeans::success);
  out.env_steps = field(&MetricMeans::env_steps);
  out.l2_mean = field(&MetricMeans::l2_mean);
  out.l2_max = field(&MetricMeans::l2_max);
  out.max_acc = field(&MetricMeans::max_acc);
  out.max_jerk = field(&MetricMeans::max_jerk);
  return out;
}

MetricMeans AggregateCell(std::span<const ResultRow> rows,
                          GuidanceMethod method, int delay,
                          const std::map<std::string, int>& suite_weights) {
  std::map<std::string, std::vector<ResultRow>> by_suite;
  for (const auto& r : rows) {
    if (r.method == method && r.delay == delay) by_suite[r.suite].push_back(r);
  }
  std::vector<WeightedSuite> suites;
  for (const auto& [suite, suite_rows] : by_suite) {
    const auto it = suite_weights.find(suite);
    const int weight = it == suite_weights.end() ? 1 : it->second;
    suites.push_back({weight, EpisodeMeans(suite_rows)});
  }
  if (suites.empty()) return {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
  return AggregateSuites(suites);
}

double RelativeChangePercent(double value, double reference) {
  if (reference == 0.0 || std::isnan(reference) || std::isnan(value)) {
    return kNaN;
  }
  return 100.0 * (value - reference) / reference;
}

nlohmann::json EmitSummary(std::span<const ResultRow> rows,
                           const std::map<std::string, int>& suite_weights,
                           std::vector<std::string>* warnings) {
  std::vector<std::string> local_warnings;
  std::set<GuidanceMethod> methods;
  std::set<int> delays;
  std::set<std::string> suites;
  for (const auto& r : rows) {
    methods.insert(r.method);
    delays.insert(r.delay);
    suites.insert(r.suite);
  }
  for (const auto& s : suites) {
    if (!suite_weights.count(s)) {
      local_warnings.push_back("suite '" + s +
                               "' has no configured weight; using N_s = 1");
    }
  }

  nlohmann::json doc;
  doc["aggregate_delays"] = kAggregateDelays;
  nlohmann::json excluded = nlohmann::json::array();
  for (int d : delays) {
    if (std::find(kAggregateDelays.begin(), kAggregateDelays.end(), d) ==
        kAggregateDelays.end()) {
      excluded.push_back(d);
    }
  }
  doc["excluded_delays"] = excluded;
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& s : suites) {
    const auto it = suite_weights.find(s);
    weights[s] = it == suite_weights.end() ? 1 : it->second;
  }
  doc["suites"] = weights;

  std::map<GuidanceMethod, MetricMeans> main;
  for (GuidanceMethod method : methods) {
    const std::string name(MethodName(method));
    std::vector<MetricMeans> aggregated;
    for (int d : delays) {
      const MetricMeans cell = AggregateCell(rows, method, d, suite_weights);
      nlohmann::json entry = MeansToJson(cell);
      const bool in_aggregate =
          std::find(kAggregateDelays.begin(), kAggregateDelays.end(), d) !=
          kAggregateDelays.end();
      entry["excluded_from_aggregate"] = !in_aggregate;
      doc["per_delay"][name][std::to_string(d)] = entry;
      if (in_aggregate) aggregated.push_back(cell);
    }
    main[method] = AverageOverDelays(aggregated);
    doc["methods"][name] = MeansToJson(main[method]);

    // Worst case: per-suite mean over the aggregate delays, max over suites.
    std::map<std::string, std::vector<MetricMeans>> per_suite;
    for (int d : kAggregateDelays) {
      std::map<std::string, std::vector<ResultRow>> by_suite;
      for (const auto& r : rows) {
        if (r.method == method && r.delay == d) by_suite[r.suite].push_back(r);
      }
      for (const auto& [suite, suite_rows] : by_suite) {
        per_suite[suite].push_back(EpisodeMeans(suite_rows));
      }
    }
    if (!per_suite.empty()) {
      std::vector<double> l2m, l2M, acc, jerk;
      for (const auto& [suite, cells] : per_suite) {
        const MetricMeans avg = AverageOverDelays(cells);
        l2m.push_back(avg.l2_mean);
        l2M.push_back(avg.l2_max);
        acc.push_back(avg.max_acc);
        jerk.push_back(avg.max_jerk);
      }
      doc["worst_case"][name] = {{"l2_mean", WorstCase(l2m)},
                                 {"l2_max", WorstCase(l2M)},
                                 {"max_acc", WorstCase(acc)},
                                 {"max_jerk", WorstCase(jerk)}};
    }
  }

  const bool has_rtc = methods.count(GuidanceMethod::kRtc) > 0;
  if (has_rtc) {
    const MetricMeans& rtc = main[GuidanceMethod::kRtc];
    for (GuidanceMethod method : methods) {
      if (method == GuidanceMethod::kRtc) continue;
      const MetricMeans& m = main[method];
      doc["vs_rtc"][std::string(MethodName(method))] = {
          {"success", RelativeChangePercent(m.success, rtc.success)},
          {"env_steps", RelativeChangePercent(m.env_steps, rtc.env_steps)},
          {"l2_mean", RelativeChangePercent(m.l2_mean, rtc.l2_mean)},
          {"l2_max", RelativeChangePercent(m.l2_max, rtc.l2_max)},
          {"max_acc", RelativeChangePercent(m.max_acc, rtc.max_acc)},
          {"max_jerk", RelativeChangePercent(m.max_jerk, rtc.max_jerk)}};
    }
  } else if (!methods.empty()) {
    local_warnings.push_back("no RTC rows; relative-change block omitted");
  }

  doc["warnings"] = local_warnings;
  if (warnings) {
    warnings->insert(warnings->end(), local_warnings.begin(),
                     local_warnings.end());
  }
  return doc;
}

}  // namespace chunkflow
