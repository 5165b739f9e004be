#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rmiat/analysis.hpp"

namespace rmiat {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const Table& t);
std::string to_markdown(const Table& t);

// "***" for p < .001, "**" for p < .01, "*" for p < .05, else "".
std::string significance_stars(double p);

// One row per analyzed IAT; IATs with refusals get an extra starred row for
// the refusal-inclusive view.
Table effect_size_table(const AnalysisResult& result);
Table effect_size_csv_table(const AnalysisResult& result);

Table model_summary_table(const AnalysisResult& result);
Table model_summary_csv_table(const AnalysisResult& result);

Table descriptives_csv_table(const AnalysisResult& result);

struct ChartSeries {
  std::string label;
  ConditionDescriptives descriptives;
};

std::vector<ChartSeries> chart_series(const AnalysisResult& result);

// Grouped bars (compatible, incompatible) per IAT with +/- 1 SE error bars.
// Output bytes depend only on the input.
std::string condition_bar_chart(std::span<const ChartSeries> series);

std::string markdown_report(const AnalysisResult& result);

// Writes report.md, effect_sizes.csv, model_summaries.csv, descriptives.csv
// and figure_conditions.svg into out_dir.
void write_reports(const AnalysisResult& result, const std::filesystem::path& out_dir);

}  // namespace rmiat
