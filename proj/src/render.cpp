#include "vitscape/render.hpp"

#include "vitscape/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace vitscape {

namespace {

struct FiniteRange {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
};

FiniteRange finite_range(const LandscapeGrid& grid) {
    FiniteRange r;
    for (double v : grid.losses) {
        if (std::isfinite(v)) {
            r.any = true;
            r.mn = std::min(r.mn, v);
            r.mx = std::max(r.mx, v);
        }
    }
    return r;
}

} // namespace

std::vector<double> contour_levels(const LandscapeGrid& grid, int n) {
    require(n >= 2, "contour levels must be >= 2");
    const FiniteRange r = finite_range(grid);
    if (!r.any) {
        fail_contract("contour_levels: grid has no finite losses");
    }
    std::vector<double> levels(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        levels[static_cast<std::size_t>(k)] =
            r.mn + (r.mx - r.mn) * (static_cast<double>(k + 1) / static_cast<double>(n + 1));
    }
    return levels;
}

std::vector<Segment> contour_segments(const LandscapeGrid& grid, double level) {
    std::vector<Segment> segs;
    const int na = static_cast<int>(grid.alphas.size());
    const int nb = static_cast<int>(grid.betas.size());

    // crossing point between two corners by linear interpolation
    auto cross = [&](double c0, double v0, double c1, double v1) {
        const double t = (level - v0) / (v1 - v0);
        return c0 + t * (c1 - c0);
    };

    for (int i = 0; i + 1 < na; ++i) {
        for (int j = 0; j + 1 < nb; ++j) {
            const double v00 = grid.loss_at(i, j);       // (a0, b0)
            const double v10 = grid.loss_at(i + 1, j);   // (a1, b0)
            const double v01 = grid.loss_at(i, j + 1);   // (a0, b1)
            const double v11 = grid.loss_at(i + 1, j + 1);
            if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11)) {
                continue;
            }
            const double a0 = grid.alphas[static_cast<std::size_t>(i)];
            const double a1 = grid.alphas[static_cast<std::size_t>(i + 1)];
            const double b0 = grid.betas[static_cast<std::size_t>(j)];
            const double b1 = grid.betas[static_cast<std::size_t>(j + 1)];

            int mask = 0;
            if (v00 > level) mask |= 1;
            if (v10 > level) mask |= 2;
            if (v11 > level) mask |= 4;
            if (v01 > level) mask |= 8;
            if (mask == 0 || mask == 15) {
                continue;
            }

            // edge crossing coordinates (alpha, beta)
            // bottom: (a0,b0)-(a1,b0); right: (a1,b0)-(a1,b1)
            // top:    (a1,b1)-(a0,b1); left:  (a0,b1)-(a0,b0)
            double bx = 0, by = 0, rx = 0, ry = 0, tx = 0, ty = 0, lx = 0, ly = 0;
            const bool need_b = ((mask & 1) != 0) != ((mask & 2) != 0);
            const bool need_r = ((mask & 2) != 0) != ((mask & 4) != 0);
            const bool need_t = ((mask & 4) != 0) != ((mask & 8) != 0);
            const bool need_l = ((mask & 8) != 0) != ((mask & 1) != 0);
            if (need_b) {
                bx = cross(a0, v00, a1, v10);
                by = b0;
            }
            if (need_r) {
                rx = a1;
                ry = cross(b0, v10, b1, v11);
            }
            if (need_t) {
                tx = cross(a1, v11, a0, v01);
                ty = b1;
            }
            if (need_l) {
                lx = a0;
                ly = cross(b1, v01, b0, v00);
            }

            auto emit = [&](double x1, double y1, double x2, double y2) {
                segs.push_back(Segment{x1, y1, x2, y2});
            };

            switch (mask) {
            case 1: case 14: emit(lx, ly, bx, by); break;
            case 2: case 13: emit(bx, by, rx, ry); break;
            case 3: case 12: emit(lx, ly, rx, ry); break;
            case 4: case 11: emit(rx, ry, tx, ty); break;
            case 6: case 9:  emit(bx, by, tx, ty); break;
            case 7: case 8:  emit(lx, ly, tx, ty); break;
            case 5: case 10: {
                // ambiguous saddle: resolve with the cell-center average
                const double center = 0.25 * (v00 + v10 + v01 + v11);
                const bool center_above = center > level;
                if ((mask == 5) == center_above) {
                    emit(lx, ly, tx, ty);
                    emit(bx, by, rx, ry);
                } else {
                    emit(lx, ly, bx, by);
                    emit(rx, ry, tx, ty);
                }
                break;
            }
            default: break;
            }
        }
    }
    return segs;
}

namespace {

// fixed-point formatting keeps the output byte-stable
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    // avoid "-0.000"
    if (std::string(buf) == "-0.000") {
        return "0.000";
    }
    return buf;
}

struct Rgb {
    double r, g, b;
};

// monotone dark-to-light ramp
constexpr Rgb kStops[] = {
    {13, 8, 135},
    {126, 3, 168},
    {203, 70, 121},
    {248, 149, 64},
    {240, 249, 33},
};

std::string color_at(double u) {
    u = std::min(1.0, std::max(0.0, u));
    const int n = static_cast<int>(sizeof(kStops) / sizeof(kStops[0])) - 1;
    const double pos = u * n;
    int k = static_cast<int>(pos);
    if (k >= n) {
        k = n - 1;
    }
    const double t = pos - k;
    const Rgb& a = kStops[k];
    const Rgb& b = kStops[k + 1];
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(a.r + t * (b.r - a.r) + 0.5),
                  static_cast<int>(a.g + t * (b.g - a.g) + 0.5),
                  static_cast<int>(a.b + t * (b.b - a.b) + 0.5));
    return buf;
}

constexpr const char* kInfColor = "#9a9a9a"; // reserved for non-finite cells

} // namespace

std::string render_svg(const LandscapeGrid& grid, const RenderSpec& spec) {
    require(spec.contour_levels >= 2, "contour levels must be >= 2");
    const FiniteRange fr = finite_range(grid);
    if (!fr.any) {
        fail_contract("render_svg: grid has no finite losses");
    }

    const int na = static_cast<int>(grid.alphas.size());
    const int nb = static_cast<int>(grid.betas.size());
    const double margin = 46.0, plot = 520.0;
    const double width = margin * 2 + plot, height = margin * 2 + plot + 18.0;

    const double amin = grid.alphas.front(), amax = grid.alphas.back();
    const double bmin = grid.betas.front(), bmax = grid.betas.back();
    auto px = [&](double a) { return margin + (a - amin) / (amax - amin) * plot; };
    auto py = [&](double b) { return margin + (bmax - b) / (bmax - bmin) * plot; };

    // value transform for the colormap
    const bool log_ok = spec.log_scale && fr.mn > 0.0 && fr.mx > fr.mn;
    auto shade = [&](double v) {
        if (fr.mx == fr.mn) {
            return 0.5;
        }
        if (log_ok) {
            return (std::log(v) - std::log(fr.mn)) / (std::log(fr.mx) - std::log(fr.mn));
        }
        return (v - fr.mn) / (fr.mx - fr.mn);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(width)
        << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height)
        << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
        << "\" fill=\"#ffffff\"/>\n";
    svg << "<defs><clipPath id=\"plot\"><rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin)
        << "\" width=\"" << fmt(plot) << "\" height=\"" << fmt(plot) << "\"/></clipPath></defs>\n";

    const bool draw_heat = spec.mode != RenderSpec::Mode::contour;
    const bool draw_contour = spec.mode != RenderSpec::Mode::heatmap;

    if (draw_heat) {
        // one filled cell per grid point, centered on the point
        const double cw = plot / (na - 1), ch = plot / (nb - 1);
        svg << "<g clip-path=\"url(#plot)\">\n";
        for (int i = 0; i < na; ++i) {
            for (int j = 0; j < nb; ++j) {
                const double v = grid.loss_at(i, j);
                const std::string color = std::isfinite(v) ? color_at(shade(v)) : kInfColor;
                const double x = px(grid.alphas[static_cast<std::size_t>(i)]) - cw * 0.5;
                const double y = py(grid.betas[static_cast<std::size_t>(j)]) - ch * 0.5;
                svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(cw)
                    << "\" height=\"" << fmt(ch) << "\" fill=\"" << color << "\"/>\n";
            }
        }
        svg << "</g>\n";
    }

    if (draw_contour) {
        std::vector<double> levels;
        if (log_ok) {
            // evenly spaced in log space
            const double lmn = std::log(fr.mn), lmx = std::log(fr.mx);
            for (int k = 0; k < spec.contour_levels; ++k) {
                const double t = static_cast<double>(k + 1) / static_cast<double>(spec.contour_levels + 1);
                levels.push_back(std::exp(lmn + t * (lmx - lmn)));
            }
        } else {
            levels = contour_levels(grid, spec.contour_levels);
        }
        const char* stroke = draw_heat ? "#ffffff" : "#2a4d8f";
        for (double level : levels) {
            for (const Segment& s : contour_segments(grid, level)) {
                svg << "<line x1=\"" << fmt(px(s.x1)) << "\" y1=\"" << fmt(py(s.y1)) << "\" x2=\""
                    << fmt(px(s.x2)) << "\" y2=\"" << fmt(py(s.y2)) << "\" stroke=\"" << stroke
                    << "\" stroke-width=\"1.1\"/>\n";
            }
        }
    }

    // frame and axis labels
    svg << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin) << "\" width=\"" << fmt(plot)
        << "\" height=\"" << fmt(plot) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(margin + plot / 2) << "\" y=\"" << fmt(margin * 2 + plot - 8)
        << "\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">&#945;</text>\n";
    svg << "<text x=\"" << fmt(margin - 28) << "\" y=\"" << fmt(margin + plot / 2)
        << "\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">&#946;</text>\n";
    for (double tick : {amin, 0.0, amax}) {
        svg << "<text x=\"" << fmt(px(tick)) << "\" y=\"" << fmt(margin + plot + 16)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt(tick)
            << "</text>\n";
    }
    for (double tick : {bmin, 0.0, bmax}) {
        svg << "<text x=\"" << fmt(margin - 6) << "\" y=\"" << fmt(py(tick) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(tick)
            << "</text>\n";
    }
    if (!grid.regime.empty()) {
        svg << "<text x=\"" << fmt(margin) << "\" y=\"" << fmt(margin - 10)
            << "\" font-family=\"sans-serif\" font-size=\"13\">" << grid.regime << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace vitscape
