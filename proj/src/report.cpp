#include "san/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace san {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  check(f.good(), "report: cannot open '" + path + "' for writing");
  return f;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

}  // namespace

void write_per_image_csv(const EvalResult& result, const std::string& path) {
  auto f = open_out(path);
  f << "index,image,nme,nme_x100\n";
  for (size_t i = 0; i < result.nmes.size(); ++i) {
    f << i << "," << (i < result.image_paths.size() ? result.image_paths[i] : "") << ","
      << fmt("%.8f", result.nmes[i]) << "," << fmt("%.6f", result.nmes[i] * 100.0) << "\n";
  }
}

void write_matrix_csv(const StyleMatrix& m, const std::string& path) {
  auto f = open_out(path);
  f << "variant,test_style";
  for (const auto& s : m.styles) f << ",train_" << s;
  f << "\n";
  for (size_t v = 0; v < m.variants.size(); ++v)
    for (size_t t = 0; t < m.styles.size(); ++t) {
      f << m.variants[v] << "," << m.styles[t];
      for (size_t tr = 0; tr < m.styles.size(); ++tr) {
        const double val = m.nme[v][t][tr];
        f << "," << (std::isnan(val) ? "failed" : fmt("%.8f", val));
      }
      f << "\n";
    }
}

void write_improvement_csv(const StyleMatrix& m, const std::string& path) {
  auto f = open_out(path);
  f << "test_style,train_style,improvement\n";
  for (size_t t = 0; t < m.styles.size(); ++t)
    for (size_t tr = 0; tr < m.styles.size(); ++tr) {
      const double val = m.improvement.empty() ? NAN : m.improvement[t][tr];
      f << m.styles[t] << "," << m.styles[tr] << ","
        << (std::isnan(val) ? "failed" : fmt("%.6f", val)) << "\n";
    }
}

void write_ced_svg(const std::vector<std::pair<std::string, CedCurve>>& curves,
                   const std::string& path) {
  check(!curves.empty(), "write_ced_svg: no curves");
  const int W = 640, H = 480;
  const double ml = 60, mr = 20, mt = 20, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;
  double xmax = 0.0;
  for (const auto& [name, c] : curves) xmax = std::max(xmax, c.grid.back());
  check(xmax > 0.0, "write_ced_svg: degenerate grid");

  static const char* palette[] = {"#1f77b4", "#2ca02c", "#d62728", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  f << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  // axes
  f << "<line x1=\"" << ml << "\" y1=\"" << (mt + ph) << "\" x2=\"" << (ml + pw) << "\" y2=\""
    << (mt + ph) << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << (mt + ph)
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = ml + pw * i / 5.0;
    const double fy = mt + ph - ph * i / 5.0;
    f << "<text x=\"" << fmt("%.1f", fx) << "\" y=\"" << (mt + ph + 20)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << fmt("%.3f", xmax * i / 5.0)
      << "</text>\n";
    f << "<text x=\"" << (ml - 8) << "\" y=\"" << fmt("%.1f", fy + 4)
      << "\" font-size=\"12\" text-anchor=\"end\">" << fmt("%.1f", i / 5.0) << "</text>\n";
  }
  f << "<text x=\"" << (ml + pw / 2) << "\" y=\"" << (H - 12)
    << "\" font-size=\"13\" text-anchor=\"middle\">NME</text>\n";
  f << "<text x=\"16\" y=\"" << (mt + ph / 2)
    << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (mt + ph / 2) << ")\">fraction of images</text>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& [name, c] = curves[ci];
    const char* color = palette[ci % 6];
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < c.grid.size(); ++i) {
      const double x = ml + pw * (c.grid[i] / xmax);
      const double y = mt + ph - ph * c.fraction[i];
      f << fmt("%.2f", x) << "," << fmt("%.2f", y);
      if (i + 1 < c.grid.size()) f << " ";
    }
    f << "\"/>\n";
    const double ly = mt + 18 + 18 * static_cast<double>(ci);
    f << "<line x1=\"" << (ml + pw - 150) << "\" y1=\"" << ly << "\" x2=\"" << (ml + pw - 120)
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    f << "<text x=\"" << (ml + pw - 112) << "\" y=\"" << (ly + 4) << "\" font-size=\"12\">"
      << name << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace san
