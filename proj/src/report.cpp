#include "cope/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cope/errors.hpp"

namespace cope {

namespace {

nlohmann::json mask_rows(const RegionMask& m) {
  const GridGeometry& g = m.geometry();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < g.ny; ++r) {
    std::vector<int> row(g.nx);
    for (std::size_t c = 0; c < g.nx; ++c) row[c] = m[g.index(c, r)] ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

// Diverging blue-white-red ramp on t in [0, 1].
std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  double r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = 0.23 + 0.77 * u;
    g = 0.30 + 0.70 * u;
    b = 0.75 + 0.25 * u;
  } else {
    const double u = (t - 0.5) / 0.5;
    r = 1.0 - 0.30 * u;
    g = 1.0 - 0.98 * u;
    b = 1.0 - 0.85 * u;
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(r * 255)),
                static_cast<int>(std::lround(g * 255)), static_cast<int>(std::lround(b * 255)));
  return buf;
}

}  // namespace

nlohmann::json to_json(const CopeResult& result) {
  const GridGeometry& g = result.upper.geometry();
  nlohmann::json j;
  j["level"] = result.level_c;
  j["threshold"] = {{"a", result.a.a}, {"alpha", result.a.alpha}, {"order_index", result.a.order_index}};
  j["config"] = {{"seed", result.config.seed},
                 {"M", result.config.M},
                 {"alpha", result.config.alpha},
                 {"boundary", to_string(result.config.boundary)},
                 {"sigma_policy", result.config.sigma_policy},
                 {"floored_cells", result.config.floored_cells}};
  j["bootstrap"] = {{"region", to_string(result.sup_sample.region)},
                    {"region_size", result.sup_sample.region_size},
                    {"fell_back", result.sup_sample.fell_back},
                    {"residual_fingerprint", result.sup_sample.residual_fingerprint}};
  j["warnings"] = result.sup_sample.warnings;
  j["geometry"] = {{"nx", g.nx},
                   {"ny", g.ny},
                   {"origin_x", g.origin_x},
                   {"origin_y", g.origin_y},
                   {"spacing_x", g.spacing_x},
                   {"spacing_y", g.spacing_y}};
  j["counts"] = {{"upper", result.upper.count()},
                 {"point_estimate", result.point_estimate.count()},
                 {"lower", result.lower.count()},
                 {"band", result.band.count()}};
  j["masks"] = {{"upper", mask_rows(result.upper)},
                {"point_estimate", mask_rows(result.point_estimate)},
                {"lower", mask_rows(result.lower)},
                {"band", mask_rows(result.band)}};
  return j;
}

void write_summary_csv(std::ostream& out, const CopeResult& r) {
  out << "level,alpha,a,M,seed,boundary,upper_cells,point_cells,lower_cells,band_cells,floored_cells\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu,%llu,%s,%zu,%zu,%zu,%zu,%zu\n", r.level_c,
                r.a.alpha, r.a.a, r.config.M, static_cast<unsigned long long>(r.config.seed),
                to_string(r.config.boundary), r.upper.count(), r.point_estimate.count(),
                r.lower.count(), r.band.count(), r.config.floored_cells);
  out << buf;
}

std::string render_svg(const CopeResult& result, const ScalarField& background) {
  const GridGeometry& g = background.geometry();
  require_same_geometry(g, result.upper.geometry(), "render_svg");

  constexpr double margin = 60.0;
  const double px = 640.0 / static_cast<double>(std::max(g.nx, g.ny));
  const double w = px * static_cast<double>(g.nx);
  const double h = px * static_cast<double>(g.ny);
  const double x0 = g.origin_x - 0.5 * g.spacing_x;
  const double y0 = g.origin_y - 0.5 * g.spacing_y;
  const double xspan = g.spacing_x * static_cast<double>(g.nx);
  const double yspan = g.spacing_y * static_cast<double>(g.ny);
  auto sx = [&](double x) { return margin + (x - x0) / xspan * w; };
  auto sy = [&](double y) { return margin + h - (y - y0) / yspan * h; };

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = background[i];
    if (!background.inside(i) || !std::isfinite(v)) continue;
    lo = first ? v : std::min(lo, v);
    hi = first ? v : std::max(hi, v);
    first = false;
  }
  const double range = hi > lo ? hi - lo : 1.0;

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * margin << "\" height=\""
      << h + 2 * margin << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<g id=\"heatmap\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < g.ny; ++r) {
    for (std::size_t c = 0; c < g.nx; ++c) {
      const std::size_t i = g.index(c, r);
      const bool valid = background.inside(i) && std::isfinite(background[i]);
      const std::string fill = valid ? ramp((background[i] - lo) / range) : std::string("#bbbbbb");
      svg << "<rect x=\"" << sx(g.x(c) - 0.5 * g.spacing_x) << "\" y=\"" << sy(g.y(r) + 0.5 * g.spacing_y)
          << "\" width=\"" << px << "\" height=\"" << px << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  svg << "</g>\n";

  auto contour = [&](const RegionMask& m, const char* id, const char* color) {
    std::vector<double> ind(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ind[i] = m[i] ? 1.0 : 0.0;
    const ContourSet cs = extract_boundary(ScalarField(g, std::move(ind)), 0.5);
    if (cs.segments.empty()) return;
    svg << "<path id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" d=\"";
    for (const auto& s : cs.segments) {
      const auto& a = cs.points[s.from];
      const auto& b = cs.points[s.to];
      svg << 'M' << sx(a.x) << ',' << sy(a.y) << 'L' << sx(b.x) << ',' << sy(b.y);
    }
    svg << "\"/>\n";
  };
  contour(result.lower, "lower", "#2ca02c");
  contour(result.point_estimate, "point_estimate", "#800080");
  contour(result.upper, "upper", "#d62728");

  svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int ticks = 5;
  for (int k = 0; k <= ticks; ++k) {
    const double fx = x0 + xspan * k / ticks;
    const double fy = y0 + yspan * k / ticks;
    svg << "<line x1=\"" << sx(fx) << "\" y1=\"" << margin + h << "\" x2=\"" << sx(fx) << "\" y2=\""
        << margin + h + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx(fx) << "\" y=\"" << margin + h + 18 << "\" text-anchor=\"middle\">" << fx
        << "</text>\n";
    svg << "<line x1=\"" << margin - 5 << "\" y1=\"" << sy(fy) << "\" x2=\"" << margin << "\" y2=\"" << sy(fy)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << margin - 8 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">" << fy
        << "</text>\n";
  }
  svg << "<text x=\"" << margin << "\" y=\"" << margin - 10 << "\">c = " << result.level_c
      << ", a = " << result.a.a << ", 1 - alpha = " << 1.0 - result.a.alpha << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void render_svg_file(const std::string& path, const CopeResult& result, const ScalarField& background) {
  const std::string text = render_svg(result, background);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

}  // namespace cope
