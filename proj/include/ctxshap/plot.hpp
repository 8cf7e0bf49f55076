#pragma once

#include <string>
#include <vector>

#include "ctxshap/shap.hpp"

namespace ctxshap {

// Rendering palette and geometry. Height 0 sizes the canvas to content.
struct Theme {
  std::string positive_color = "#ff0d57";
  std::string negative_color = "#1e88e5";
  std::string font_family = "sans-serif";
  int width_px = 720;
  int height_px = 0;
};

// Strict parse of {"positive_color", "negative_color", "font_family",
// "width_px", "height_px"}; every key optional, unknown keys rejected.
Theme parse_theme(const std::string& document);

struct BarEntry {
  std::string label;
  double value = 0.0;
};

// Global importance plot: top features by mean |phi|, descending, with the
// remainder folded into other_sum.
struct BarPlotSpec {
  std::vector<BarEntry> entries;
  size_t max_bars = 9;
  double other_sum = 0.0;
  size_t other_count = 0;
};

struct WaterfallStep {
  std::string label;
  double raw_value = 0.0;
  double contribution = 0.0;
};

// Local explanation plot: base_value plus signed steps (largest |phi|
// first) ending at prediction; truncated steps collapse into hidden_sum.
struct WaterfallSpec {
  double base_value = 0.0;
  double prediction = 0.0;
  std::vector<WaterfallStep> steps;
  double hidden_sum = 0.0;
  size_t hidden_count = 0;
};

// Top max_bars features by mean |phi|; ties break on feature index
// ascending. Throws WidthError when labels do not match.
BarPlotSpec build_bar(const GlobalAttribution& global, const std::vector<std::string>& labels,
                      size_t max_bars = 9);

// Steps by |contribution| descending (ties on feature index), truncated at
// max_steps with the remainder in hidden_sum. Endpoint identity
// base + steps + hidden == prediction follows from Shapley efficiency.
WaterfallSpec build_waterfall(const Attribution& attr, const std::vector<std::string>& labels,
                              const std::vector<double>& raw_values, size_t max_steps = 9);

// Deterministic SVG 1.1 text: identical spec and theme give identical
// bytes. Positive contributions render in positive_color, negative in
// negative_color.
std::string render_svg(const BarPlotSpec& spec, const Theme& theme = {});
std::string render_svg(const WaterfallSpec& spec, const Theme& theme = {});

}  // namespace ctxshap
