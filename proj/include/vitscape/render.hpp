#pragma once

#include "vitscape/landscape.hpp"

#include <string>
#include <vector>

namespace vitscape {

struct RenderSpec {
    enum class Mode { contour, heatmap, both };
    Mode mode = Mode::both;
    int contour_levels = 8;
    bool log_scale = false;
    std::string output_path;
};

struct Segment {
    double x1, y1, x2, y2; // (alpha, beta) coordinates
};

// Evenly spaced interior iso-levels strictly between min and max finite
// loss. A constant grid gets levels equal to that constant, which produce
// no segments.
std::vector<double> contour_levels(const LandscapeGrid& grid, int n);

// Marching squares over the grid at one level; cells touching non-finite
// corners are skipped.
std::vector<Segment> contour_segments(const LandscapeGrid& grid, double level);

// Pure function of (grid, spec): identical inputs yield byte-identical SVG.
std::string render_svg(const LandscapeGrid& grid, const RenderSpec& spec);

} // namespace vitscape
