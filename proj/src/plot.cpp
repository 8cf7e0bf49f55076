#include "ctxshap/plot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxshap/errors.hpp"
#include "ctxshap/util.hpp"
#include "json.hpp"

namespace ctxshap {

namespace {

// Indices ordered by value descending, ties by index ascending.
std::vector<size_t> order_desc(const std::vector<double>& values) {
  std::vector<size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return values[a] > values[b]; });
  return idx;
}

std::string signed_value(double v, int decimals) {
  return (v < 0 ? "-" : "+") + format_trimmed(std::abs(v), decimals);
}

// Small append-only SVG writer with fixed attribute order.
class SvgWriter {
 public:
  SvgWriter(int width, int height, const Theme& theme) : theme_(theme) {
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
            "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
            std::to_string(width) + " " + std::to_string(height) + "\">\n";
    rect(0, 0, double(width), double(height), "#ffffff", "background");
  }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& cls) {
    out_ += "  <rect class=\"" + cls + "\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" +
            num(w) + "\" height=\"" + num(h) + "\" fill=\"" + fill + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, bool dashed) {
    out_ += "  <line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
            num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"1\"" +
            (dashed ? " stroke-dasharray=\"4 3\"" : "") + "/>\n";
  }

  void text(double x, double y, const std::string& anchor, int size, const std::string& content,
            const std::string& fill = "#333333") {
    out_ += "  <text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
            "\" font-family=\"" + xml_escape(theme_.font_family) + "\" font-size=\"" +
            std::to_string(size) + "\" fill=\"" + fill + "\">" + xml_escape(content) +
            "</text>\n";
  }

  std::string finish() && { return std::move(out_) + "</svg>\n"; }

 private:
  static std::string num(double v) { return format_fixed(v, 2); }
  Theme theme_;
  std::string out_;
};

constexpr double kRowHeight = 28.0;
constexpr double kBarHeight = 18.0;
constexpr double kLabelGutter = 190.0;
constexpr double kValueGutter = 80.0;
constexpr double kTopMargin = 42.0;
constexpr double kBottomMargin = 52.0;

}  // namespace

Theme parse_theme(const std::string& document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("theme document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("theme: expected a top-level object");
  Theme theme;
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    const nlohmann::json& value = item.value();
    if (key == "positive_color" || key == "negative_color" || key == "font_family") {
      if (!value.is_string()) throw SchemaError("theme." + key + ": expected a string");
      if (key == "positive_color") theme.positive_color = value.get<std::string>();
      if (key == "negative_color") theme.negative_color = value.get<std::string>();
      if (key == "font_family") theme.font_family = value.get<std::string>();
    } else if (key == "width_px" || key == "height_px") {
      if (!value.is_number_integer() || value.get<int>() < 0)
        throw SchemaError("theme." + key + ": expected a non-negative integer");
      (key == "width_px" ? theme.width_px : theme.height_px) = value.get<int>();
    } else {
      throw SchemaError("theme: unexpected field \"" + key + "\"");
    }
  }
  return theme;
}

BarPlotSpec build_bar(const GlobalAttribution& global, const std::vector<std::string>& labels,
                      size_t max_bars) {
  if (labels.size() != global.mean_abs_phi.size())
    throw WidthError("label count " + std::to_string(labels.size()) +
                     " does not match attribution width " +
                     std::to_string(global.mean_abs_phi.size()));
  if (max_bars < 1) throw ValueError("max_bars must be at least 1");

  BarPlotSpec spec;
  spec.max_bars = max_bars;
  const std::vector<size_t> order = order_desc(global.mean_abs_phi);
  for (size_t rank = 0; rank < order.size(); ++rank) {
    size_t i = order[rank];
    if (rank < max_bars) {
      spec.entries.push_back({labels[i], global.mean_abs_phi[i]});
    } else {
      spec.other_sum += global.mean_abs_phi[i];
      ++spec.other_count;
    }
  }
  return spec;
}

WaterfallSpec build_waterfall(const Attribution& attr, const std::vector<std::string>& labels,
                              const std::vector<double>& raw_values, size_t max_steps) {
  const size_t n = attr.phi.size();
  if (labels.size() != n || raw_values.size() != n)
    throw WidthError("labels/raw_values width does not match attribution width " +
                     std::to_string(n));

  WaterfallSpec spec;
  spec.base_value = attr.base_value;
  spec.prediction = attr.prediction;
  std::vector<double> magnitude(n);
  for (size_t i = 0; i < n; ++i) magnitude[i] = std::abs(attr.phi[i]);
  const std::vector<size_t> order = order_desc(magnitude);
  for (size_t rank = 0; rank < order.size(); ++rank) {
    size_t i = order[rank];
    if (rank < max_steps) {
      spec.steps.push_back({labels[i], raw_values[i], attr.phi[i]});
    } else {
      spec.hidden_sum += attr.phi[i];
      ++spec.hidden_count;
    }
  }
  return spec;
}

std::string render_svg(const BarPlotSpec& spec, const Theme& theme) {
  const size_t n_rows = spec.entries.size() + (spec.other_count > 0 ? 1 : 0);
  const int width = theme.width_px;
  const double content_height = kTopMargin + double(n_rows) * kRowHeight + kBottomMargin;
  const int height = theme.height_px > 0 ? theme.height_px : int(content_height);

  double max_value = spec.other_sum;
  for (const BarEntry& entry : spec.entries) max_value = std::max(max_value, entry.value);
  if (max_value <= 0.0) max_value = 1.0;

  const double x0 = kLabelGutter;
  const double x1 = double(width) - kValueGutter;
  auto scale = [&](double v) { return x0 + (x1 - x0) * (v / max_value); };

  SvgWriter svg(width, height, theme);
  svg.text(x0, 24.0, "start", 13, "Mean |SHAP value| (average impact on model output)");

  double y = kTopMargin;
  auto draw_row = [&](const std::string& label, double value, const std::string& fill,
                      const std::string& cls) {
    const double bar_y = y + (kRowHeight - kBarHeight) / 2.0;
    svg.text(x0 - 10.0, y + kRowHeight / 2.0 + 4.0, "end", 12, label);
    svg.rect(x0, bar_y, scale(value) - x0, kBarHeight, fill, cls);
    svg.text(scale(value) + 6.0, y + kRowHeight / 2.0 + 4.0, "start", 12,
             signed_value(value, 3));
    y += kRowHeight;
  };
  for (const BarEntry& entry : spec.entries)
    draw_row(entry.label, entry.value, theme.positive_color, "bar");
  if (spec.other_count > 0)
    draw_row("Sum of " + std::to_string(spec.other_count) + " other features", spec.other_sum,
             "#999999", "bar-other");

  // Axis with ticks at 0, mid, max.
  const double axis_y = y + 8.0;
  svg.line(x0, kTopMargin - 4.0, x0, axis_y, "#999999", false);
  svg.line(x0, axis_y, x1, axis_y, "#999999", false);
  for (double tick : {0.0, max_value / 2.0, max_value}) {
    svg.line(scale(tick), axis_y, scale(tick), axis_y + 4.0, "#999999", false);
    svg.text(scale(tick), axis_y + 18.0, "middle", 11, format_trimmed(tick, 2), "#666666");
  }
  svg.text((x0 + x1) / 2.0, axis_y + 34.0, "middle", 12, "mean(|SHAP value|)", "#666666");
  return std::move(svg).finish();
}

std::string render_svg(const WaterfallSpec& spec, const Theme& theme) {
  const size_t n_rows = spec.steps.size() + (spec.hidden_count > 0 ? 1 : 0);
  const int width = theme.width_px;
  const double content_height = kTopMargin + double(n_rows) * kRowHeight + kBottomMargin;
  const int height = theme.height_px > 0 ? theme.height_px : int(content_height);

  // Running totals, base first, hidden row last.
  std::vector<double> totals = {spec.base_value};
  for (const WaterfallStep& step : spec.steps) totals.push_back(totals.back() + step.contribution);
  if (spec.hidden_count > 0) totals.push_back(totals.back() + spec.hidden_sum);

  double lo = *std::min_element(totals.begin(), totals.end());
  double hi = *std::max_element(totals.begin(), totals.end());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = (hi - lo) * 0.08;
  lo -= pad;
  hi += pad;

  const double x0 = kLabelGutter;
  const double x1 = double(width) - kValueGutter;
  auto scale = [&](double v) { return x0 + (x1 - x0) * ((v - lo) / (hi - lo)); };

  SvgWriter svg(width, height, theme);
  const double plot_top = kTopMargin - 6.0;
  const double plot_bottom = kTopMargin + double(n_rows) * kRowHeight + 6.0;

  // Guides for the two endpoints the guard prompt defines.
  svg.line(scale(spec.base_value), plot_top, scale(spec.base_value), plot_bottom + 6.0,
           "#bbbbbb", true);
  svg.line(scale(spec.prediction), plot_top - 6.0, scale(spec.prediction), plot_bottom,
           "#bbbbbb", true);
  svg.text(scale(spec.prediction), plot_top - 12.0, "middle", 12,
           "f(x) = " + format_trimmed(spec.prediction, 2));

  double y = kTopMargin;
  double running = spec.base_value;
  auto draw_step = [&](const std::string& label, double contribution) {
    const double from = running;
    const double to = running + contribution;
    running = to;
    const bool positive = contribution >= 0.0;
    const double bar_y = y + (kRowHeight - kBarHeight) / 2.0;
    const double left = scale(std::min(from, to));
    const double bar_w = scale(std::max(from, to)) - left;
    svg.text(x0 - 10.0, y + kRowHeight / 2.0 + 4.0, "end", 12, label);
    svg.rect(left, bar_y, bar_w, kBarHeight,
             positive ? theme.positive_color : theme.negative_color,
             positive ? "step-pos" : "step-neg");
    if (positive)
      svg.text(left + bar_w + 6.0, y + kRowHeight / 2.0 + 4.0, "start", 12,
               signed_value(contribution, 3), theme.positive_color);
    else
      svg.text(left - 6.0, y + kRowHeight / 2.0 + 4.0, "end", 12,
               signed_value(contribution, 3), theme.negative_color);
    y += kRowHeight;
  };

  for (const WaterfallStep& step : spec.steps)
    draw_step(step.label + " (" + format_trimmed(step.raw_value, 3) + ")", step.contribution);
  if (spec.hidden_count > 0)
    draw_step("Sum of " + std::to_string(spec.hidden_count) + " other features",
              spec.hidden_sum);

  svg.text(scale(spec.base_value), plot_bottom + 22.0, "middle", 12,
           "E[f(X)] = " + format_trimmed(spec.base_value, 3));

  // Bottom axis with ticks at the padded extremes.
  const double axis_y = plot_bottom + 2.0;
  svg.line(x0, axis_y, x1, axis_y, "#999999", false);
  for (double tick : {lo + pad, hi - pad}) {
    svg.line(scale(tick), axis_y, scale(tick), axis_y + 4.0, "#999999", false);
    svg.text(scale(tick), axis_y + 34.0, "middle", 11, format_trimmed(tick, 2), "#666666");
  }
  return std::move(svg).finish();
}

}  // namespace ctxshap
