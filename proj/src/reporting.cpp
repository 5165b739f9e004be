#include "rmiat/reporting.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rmiat/util.hpp"

namespace rmiat {

namespace {

std::string f2(double v) { return fmt::format("{:.2f}", v); }

std::string thousands(size_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<size_t>(i), ",");
  return s;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

struct Row {
  const IatAnalysis* iat;
  const ViewResult* view;
  std::string_view view_name;
  bool starred;
};

// Rows in display order: the refusal-excluded view, then the inclusive view
// when it adds information.
std::vector<Row> display_rows(const AnalysisResult& r) {
  std::vector<Row> rows;
  for (const auto& a : r.iats) {
    if (a.excluded) rows.push_back({&a, &*a.excluded, "excluded", false});
    if (a.inclusive && (a.refusals > 0 || !a.excluded)) {
      rows.push_back({&a, &*a.inclusive, "inclusive", a.refusals > 0});
    }
  }
  return rows;
}

std::string row_label(const Row& row) { return row.iat->display_name + (row.starred ? "*" : ""); }

}  // namespace

std::string to_csv(const Table& t) {
  std::string out = csv_row(t.header);
  for (const auto& r : t.rows) out += csv_row(r);
  return out;
}

std::string to_markdown(const Table& t) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) {
      std::string cell = c;
      std::replace(cell.begin(), cell.end(), '|', '/');
      s += " " + cell + " |";
    }
    return s + "\n";
  };
  std::string out = line(t.header);
  out += "|";
  for (size_t i = 0; i < t.header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : t.rows) out += line(r);
  return out;
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

Table effect_size_table(const AnalysisResult& result) {
  Table t{{"RM-IAT", "Cohen's d", "95% CI", "n (compatible / incompatible)"}, {}};
  for (const auto& row : display_rows(result)) {
    if (!row.view->effect) {
      t.rows.push_back({row_label(row), "n/a", "n/a", "n/a"});
      continue;
    }
    const EffectSize& e = *row.view->effect;
    t.rows.push_back({row_label(row), f2(e.d), "[" + f2(e.ci_low) + ", " + f2(e.ci_high) + "]",
                      thousands(e.n1) + " / " + thousands(e.n2)});
  }
  return t;
}

Table effect_size_csv_table(const AnalysisResult& result) {
  Table t{{"iat_id", "display_name", "view", "starred", "d", "ci_low", "ci_high", "n_compatible", "n_incompatible",
           "pooled_sd"},
          {}};
  for (const auto& row : display_rows(result)) {
    std::vector<std::string> cells = {row.iat->iat_id, row.iat->display_name, std::string(row.view_name),
                                      row.starred ? "1" : "0"};
    if (row.view->effect) {
      const EffectSize& e = *row.view->effect;
      for (auto s : {fmt::format("{:.6g}", e.d), fmt::format("{:.6g}", e.ci_low), fmt::format("{:.6g}", e.ci_high),
                     std::to_string(e.n1), std::to_string(e.n2), fmt::format("{:.6g}", e.pooled_sd)}) {
        cells.push_back(s);
      }
    } else {
      cells.insert(cells.end(), 6, "");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table model_summary_table(const AnalysisResult& result) {
  Table t{{"RM-IAT", "Intercept (SE)", "Condition (SE)", "Prompt intercept variance", "Residual variance",
           "Observations", "Log likelihood"},
          {}};
  for (const auto& row : display_rows(result)) {
    if (!row.view->fit) {
      t.rows.push_back({row_label(row), "n/a", "n/a", "n/a", "n/a", thousands(row.view->n), "n/a"});
      continue;
    }
    const LmmFit& f = *row.view->fit;
    t.rows.push_back({row_label(row), f2(f.beta_intercept) + " (" + f2(f.se_intercept) + ")",
                      f2(f.beta_condition) + significance_stars(f.p_value) + " (" + f2(f.se_condition) + ")",
                      f2(f.sigma2_u), f2(f.sigma2_e), thousands(f.n), f2(f.loglik)});
  }
  return t;
}

Table model_summary_csv_table(const AnalysisResult& result) {
  Table t{{"iat_id", "view", "intercept", "intercept_se", "condition", "condition_se", "stars", "z", "p_value",
           "prompt_intercept_variance", "residual_variance", "observations", "groups", "loglik", "criterion"},
          {}};
  for (const auto& row : display_rows(result)) {
    std::vector<std::string> cells = {row.iat->iat_id, std::string(row.view_name)};
    if (row.view->fit) {
      const LmmFit& f = *row.view->fit;
      auto g = [](double v) { return fmt::format("{:.6g}", v); };
      std::vector<std::string> rest = {g(f.beta_intercept), g(f.se_intercept), g(f.beta_condition),
                                       g(f.se_condition),   significance_stars(f.p_value), g(f.z),
                                       g(f.p_value),        g(f.sigma2_u),    g(f.sigma2_e),
                                       std::to_string(f.n), std::to_string(f.n_groups), g(f.loglik),
                                       std::string(to_string(f.criterion))};
      cells.insert(cells.end(), rest.begin(), rest.end());
    } else {
      cells.insert(cells.end(), 13, "");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table descriptives_csv_table(const AnalysisResult& result) {
  Table t{{"iat_id", "view", "condition", "n", "mean", "sd", "se"}, {}};
  auto g = [](double v) { return fmt::format("{:.6g}", v); };
  for (const auto& a : result.iats) {
    for (const auto& [name, view] : {std::pair{"excluded", &a.excluded}, std::pair{"inclusive", &a.inclusive}}) {
      if (!*view || !(*view)->error.empty()) continue;
      const auto& d = (*view)->descriptives;
      for (const auto& [cond, desc] : {std::pair{"compatible", &d.compatible}, std::pair{"incompatible", &d.incompatible}}) {
        t.rows.push_back({a.iat_id, name, cond, std::to_string(desc->n), g(desc->mean), g(desc->sd), g(desc->se)});
      }
    }
  }
  return t;
}

std::vector<ChartSeries> chart_series(const AnalysisResult& result) {
  std::vector<ChartSeries> out;
  for (const auto& a : result.iats) {
    const ViewResult* v = a.excluded ? &*a.excluded : (a.inclusive ? &*a.inclusive : nullptr);
    if (v && v->error.empty()) out.push_back({a.display_name, v->descriptives});
  }
  return out;
}

std::string condition_bar_chart(std::span<const ChartSeries> series) {
  constexpr double kLeft = 80, kTop = 50, kPlotHeight = 300, kBottom = 170, kGroupWidth = 110, kBarWidth = 36;
  const double plot_width = kGroupWidth * static_cast<double>(std::max<size_t>(series.size(), 1));
  const double width = kLeft + plot_width + 40;
  const double height = kTop + kPlotHeight + kBottom;

  double peak = 0.0;
  for (const auto& s : series) {
    peak = std::max({peak, s.descriptives.compatible.mean + s.descriptives.compatible.se,
                     s.descriptives.incompatible.mean + s.descriptives.incompatible.se});
  }
  // Axis top: smallest 1/2/5 x 10^k step count of five that covers the data.
  double step = 1.0;
  if (peak > 0) {
    const double raw = peak / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
  }
  const double y_max = step * 5.0;
  auto y_px = [&](double v) { return kTop + kPlotHeight * (1.0 - v / y_max); };
  auto n2 = [](double v) { return fmt::format("{:.2f}", v); };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n",
      n2(width), n2(height), n2(width), n2(height));
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", n2(width), n2(height));
  svg += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Reasoning tokens by condition</text>\n",
                     n2(kLeft + plot_width / 2));

  // Axes and ticks.
  svg += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000\"/>\n", n2(kLeft),
                     n2(kTop), n2(kTop + kPlotHeight));
  svg += fmt::format("<line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000\"/>\n", n2(kLeft),
                     n2(kTop + kPlotHeight), n2(kLeft + plot_width));
  for (int i = 0; i <= 5; ++i) {
    const double v = step * i;
    const double y = y_px(v);
    svg += fmt::format("<line class=\"tick\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000\"/>\n", n2(kLeft - 5),
                       n2(y), n2(kLeft), n2(y));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", n2(kLeft - 8), n2(y + 4),
                       fmt::format("{:g}", v));
  }
  svg += fmt::format(
      "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">Reasoning tokens (mean &#177; SE)</text>\n",
      n2(kTop + kPlotHeight / 2));

  const char* colors[2] = {"#4c72b0", "#dd8452"};
  const char* names[2] = {"compatible", "incompatible"};
  for (size_t i = 0; i < series.size(); ++i) {
    const double gx = kLeft + kGroupWidth * static_cast<double>(i) + (kGroupWidth - 2 * kBarWidth) / 2;
    const Descriptive* d[2] = {&series[i].descriptives.compatible, &series[i].descriptives.incompatible};
    for (int k = 0; k < 2; ++k) {
      const double x = gx + kBarWidth * k;
      const double top = y_px(d[k]->mean);
      svg += fmt::format(
          "<rect class=\"bar {}\" data-iat=\"{}\" data-mean=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
          names[k], escape_xml(series[i].label), fmt::format("{:.3f}", d[k]->mean), n2(x), n2(top), n2(kBarWidth),
          n2(kTop + kPlotHeight - top), colors[k]);
      const double cx = x + kBarWidth / 2;
      const double lo = y_px(d[k]->mean - d[k]->se), hi = y_px(d[k]->mean + d[k]->se);
      svg += fmt::format("<g class=\"error-bar\" data-se=\"{}\" stroke=\"#000\">", fmt::format("{:.3f}", d[k]->se));
      svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>", n2(cx), n2(lo), n2(hi));
      svg += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\"/>", n2(cx - 6), n2(cx + 6), n2(lo));
      svg += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\"/>", n2(cx - 6), n2(cx + 6), n2(hi));
      svg += "</g>\n";
    }
    const double lx = gx + kBarWidth;
    const double ly = kTop + kPlotHeight + 14;
    svg += fmt::format("<text x=\"{0}\" y=\"{1}\" text-anchor=\"end\" transform=\"rotate(-35 {0} {1})\">{2}</text>\n",
                       n2(lx), n2(ly), escape_xml(series[i].label));
  }

  // Legend.
  for (int k = 0; k < 2; ++k) {
    const double lx = kLeft + plot_width - 200 + 110 * k;
    svg += fmt::format("<rect class=\"legend\" x=\"{}\" y=\"32\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", n2(lx),
                       colors[k]);
    svg += fmt::format("<text x=\"{}\" y=\"42\">{}</text>\n", n2(lx + 16), names[k]);
  }
  svg += "</svg>\n";
  return svg;
}

std::string markdown_report(const AnalysisResult& r) {
  std::string md = "# RM-IAT analysis report\n\n";
  md += fmt::format("**Backend:** {}", r.run.backend.empty() ? "unknown" : r.run.backend);
  if (r.run.seed) md += fmt::format(" | **Seed:** {}", *r.run.seed);
  if (!r.run.model.empty()) md += fmt::format(" | **Model:** {}", r.run.model);
  md += fmt::format(" | **Run:** {} | **Criterion:** {} | **Refusal handling:** {}\n\n", r.run.run_id,
                    to_string(r.criterion), to_string(r.mode));

  md += "## Configuration\n\n```json\n" + r.run.config.dump(2) + "\n```\n\n";

  md += "## Effect sizes\n\n" + to_markdown(effect_size_table(r));
  md += "\nCohen's d is the incompatible minus compatible mean divided by the pooled SD; positive values mean more "
        "reasoning tokens under the association-incompatible instruction. * marks the analysis with refusals kept.\n\n";

  md += "## Mixed-effects models\n\n";
  md += "Reasoning tokens ~ Condition + (1 | Prompt variation), fit by " + std::string(to_string(r.criterion)) + ".\n\n";
  md += to_markdown(model_summary_table(r));
  md += "\n\\*p < .05 \\*\\*p < .01 \\*\\*\\*p < .001 (Wald z test)\n\n";

  md += "## Descriptive statistics\n\n";
  Table desc{{"RM-IAT", "Condition", "n", "Mean", "SD", "SE"}, {}};
  for (const auto& row : display_rows(r)) {
    if (!row.view->error.empty()) continue;
    const auto& d = row.view->descriptives;
    desc.rows.push_back({row_label(row), "compatible", thousands(d.compatible.n), f2(d.compatible.mean),
                         f2(d.compatible.sd), f2(d.compatible.se)});
    desc.rows.push_back({row_label(row), "incompatible", thousands(d.incompatible.n), f2(d.incompatible.mean),
                         f2(d.incompatible.sd), f2(d.incompatible.se)});
  }
  md += to_markdown(desc) + "\n";
  md += "![Reasoning tokens by condition; error bars are one standard error](figure_conditions.svg)\n\n";

  if (r.refusals.total_refusals > 0) {
    md += "## Refusals\n\n";
    Table t{{"RM-IAT", "Condition", "Refusals", "Classified trials"}, {}};
    for (const auto& a : r.iats) {
      for (Condition c : {Condition::Compatible, Condition::Incompatible}) {
        auto it = r.refusals.cells.find({a.iat_id, c});
        if (it == r.refusals.cells.end() || a.refusals == 0) continue;
        t.rows.push_back({a.display_name, std::string(to_string(c)), thousands(it->second.refused),
                          thousands(it->second.total)});
      }
    }
    md += to_markdown(t);
    md += fmt::format("\n{} refusals in total; {} ({:.2f}%) in the incompatible condition. Refusals are outputs that "
                      "match neither attribute label; see refusals.csv.\n\n",
                      thousands(r.refusals.total_refusals), thousands(r.refusals.incompatible_refusals),
                      100.0 * r.refusals.incompatible_share.value_or(0.0));
  }

  if (r.overhead) {
    md += "## Reasoning-token overhead\n\n";
    Table t{{"RM-IAT", "Overhead (%)"}, {}};
    for (const auto& [id, pct] : r.overhead->per_iat) {
      auto it = std::find_if(r.iats.begin(), r.iats.end(), [&](const IatAnalysis& a) { return a.iat_id == id; });
      t.rows.push_back({it == r.iats.end() ? id : it->display_name, f2(pct)});
    }
    md += to_markdown(t);
    md += fmt::format("\nUnweighted mean over RM-IATs: {}%. Per-IAT overhead is 100 x (incompatible mean - "
                      "compatible mean) / compatible mean.\n\n",
                      f2(r.overhead->aggregate));
  }

  std::string diagnostics;
  for (const auto& a : r.iats) {
    for (const auto& [name, view] : {std::pair{"excluded", &a.excluded}, std::pair{"inclusive", &a.inclusive}}) {
      if (*view && !(*view)->error.empty()) {
        diagnostics += fmt::format("- {} ({}): {}\n", a.display_name, name, (*view)->error);
      }
    }
    if (a.failures > 0) diagnostics += fmt::format("- {}: {} failed trials treated as missing\n", a.display_name, a.failures);
  }
  if (!diagnostics.empty()) md += "## Diagnostics\n\n" + diagnostics + "\n";

  md += "## Measurement note\n\n"
        "Reported reasoning-token counts come in multiples of 64, so every value carries up to 64 tokens of "
        "rounding. The models treat the counts as continuous and apply no correction for this quantization.\n";
  return md;
}

void write_reports(const AnalysisResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic((out_dir / "report.md").string(), markdown_report(result));
  write_file_atomic((out_dir / "effect_sizes.csv").string(), to_csv(effect_size_csv_table(result)));
  write_file_atomic((out_dir / "model_summaries.csv").string(), to_csv(model_summary_csv_table(result)));
  write_file_atomic((out_dir / "descriptives.csv").string(), to_csv(descriptives_csv_table(result)));
  const auto series = chart_series(result);
  write_file_atomic((out_dir / "figure_conditions.svg").string(), condition_bar_chart(series));
}

}  // namespace rmiat
