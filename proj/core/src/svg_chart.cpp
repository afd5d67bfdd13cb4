// Horizontal bar chart of one attribution, in the spirit of a SHAP bar plot:
// features sorted by |phi|, red bars push the prediction up, blue bars down.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "imlc/explainer.hpp"

namespace imlc::explain {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_attribution_svg(const shapley::Attribution& a, const std::string& title) {
  constexpr int kWidth = 640, kLabelW = 200, kValueW = 90, kRowH = 28, kTop = 48, kBottom = 40;
  const int plot_w = kWidth - kLabelW - kValueW - 20;
  const auto order = shapley::rank_by_magnitude(a);
  const int height = kTop + kRowH * static_cast<int>(order.size()) + kBottom;

  double max_abs = 0.0;
  for (const auto& f : a.features) max_abs = std::max(max_abs, std::abs(f.phi));
  if (max_abs == 0.0) max_abs = 1.0;
  const double zero_x = kLabelW + plot_w / 2.0;
  const double scale = (plot_w / 2.0) / max_abs;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, height);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, height);
  svg += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", 10, escape(title));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& f = a.features[order[i]];
    const double y = kTop + kRowH * static_cast<double>(i);
    const double len = std::abs(f.phi) * scale;
    const double x = f.phi >= 0.0 ? zero_x : zero_x - len;
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{} = {:.2f}</text>\n", kLabelW - 8,
                       y + kRowH * 0.6, escape(f.name), f.value);
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{}\" fill=\"{}\"/>\n", x, y + 4,
                       len, kRowH - 8, f.phi >= 0.0 ? "#d62728" : "#1f77b4");
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\">{:+.2f}</text>\n", kWidth - kValueW, y + kRowH * 0.6, f.phi);
  }
  const double axis_bottom = kTop + kRowH * static_cast<double>(order.size());
  svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", zero_x,
                     kTop, axis_bottom);
  svg += fmt::format("<text x=\"10\" y=\"{:.1f}\">E[f(x)] = {:.2f}   f(x) = {:.2f}</text>\n", axis_bottom + 26,
                     a.base_value, a.prediction);
  svg += "</svg>\n";
  return svg;
}

}  // namespace imlc::explain
