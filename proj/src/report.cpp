#include "rift/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rift::report {

std::string percent(const std::optional<double>& fraction) {
  if (!fraction) return "-";
  return std::to_string(round_half_up(100.0 * *fraction));
}

namespace {

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string results_table(const std::vector<TableRow>& rows, const std::vector<std::string>& attribute_order) {
  auto order = attribute_order;
  if (order.empty())
    for (const auto& r : rows)
      for (const auto& name : r.aggregate.attribute_order)
        if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);

  std::size_t method_w = 6;
  for (const auto& r : rows) method_w = std::max(method_w, r.method.size());
  std::vector<std::size_t> widths;
  for (const auto& name : order) widths.push_back(std::max<std::size_t>(name.size(), 7));

  std::ostringstream os;
  os << std::string(method_w, ' ');
  for (std::size_t i = 0; i < order.size(); ++i) os << " | " << pad(order[i], widths[i]);
  os << " |  AC |  RD\n";
  os << std::string(method_w, ' ');
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto half = (widths[i] - 1) / 2;
    os << " | " << pad("C", half) << ' ' << pad("S", widths[i] - half - 1);
  }
  os << " |     |\n";
  os << std::string(method_w, '-');
  for (const auto w : widths) os << "-+-" << std::string(w, '-');
  os << "-+-----+----\n";
  for (const auto& r : rows) {
    os << r.method << std::string(method_w - r.method.size(), ' ');
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto it = r.aggregate.per_attribute.find(order[i]);
      evalkit::AttributeAggregate a;
      if (it != r.aggregate.per_attribute.end()) a = it->second;
      const auto half = (widths[i] - 1) / 2;
      os << " | " << pad(percent(a.shared), half) << ' ' << pad(percent(a.specific), widths[i] - half - 1);
    }
    const std::string rd = r.aggregate.rd ? std::to_string(round_half_up(*r.aggregate.rd)) : "-";
    os << " | " << pad(percent(r.aggregate.ac), 3) << " | " << pad(rd, 3) << '\n';
  }
  return os.str();
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant   | shared | specific | RAND sh | RAND sp |  AC |  RD | src dep | guide dep |   hiding | power A | power B\n";
  os << "----------+--------+----------+---------+---------+-----+-----+---------+-----------+----------+---------+--------\n";
  for (const auto& r : rows) {
    std::string name = r.name;
    name.resize(9, ' ');
    const std::string rd = r.rd ? std::to_string(round_half_up(*r.rd)) : "-";
    os << name << " | " << pad(percent(r.shared), 6) << " | " << pad(percent(r.specific), 8) << " | "
       << pad(percent(r.rand_shared), 7) << " | " << pad(percent(r.rand_specific), 7) << " | " << pad(percent(r.ac), 3)
       << " | " << pad(rd, 3) << " | " << pad(fixed(r.source_dependence, 3), 7) << " | "
       << pad(fixed(r.guide_dependence, 3), 9) << " | " << pad(fixed(r.hiding_score, 2), 8) << " | "
       << pad(fixed(r.power_a, 3), 7) << " | " << pad(fixed(r.power_b, 3), 7) << '\n';
  }
  return os.str();
}

std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series, bool log_y) {
  const double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-12)) : y; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1, y0 -= 1;
  const double pad_y = 0.05 * (y1 - y0);
  y0 -= pad_y;
  y1 += pad_y;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  auto pyr = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << fixed(xv, 3) << "</text>\n";
    os << "<text x=\"" << L - 5 << "\" y=\"" << pyr(yv) + 4 << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + fixed(yv, 1) : fixed(yv, 3)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << (T + H - B) / 2
     << ")\">" << xml_escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colours[k % 7];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 15 * (k + 1) << "\" fill=\"" << c << "\">" << xml_escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rift::report
