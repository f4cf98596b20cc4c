#pragma once

#include "vitscape/params.hpp"
#include "vitscape/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vitscape {

// Two Gaussian direction vectors over the full parameter set.
struct DirectionPair {
    ParameterSet delta;
    ParameterSet eta;
    std::uint64_t seed = 0;
    bool normalized = false;
};

// i.i.d. standard-normal entries for every parameter, deterministic per seed
DirectionPair sample_directions(const ParameterSet& params, std::uint64_t seed);

// Strided view of one filter group inside a flat tensor.
struct FilterGroup {
    long long start = 0;
    long long stride = 1;
    long long count = 0;
};

// Filter policy: rank-2 "*.weight" tensors split into one group per output
// column (each output neuron's incoming weights); everything else (biases,
// norm gains/biases, the mask token) is frozen and its direction zeroed.
// With perturb_aux, frozen tensors become single whole-tensor groups instead.
std::vector<FilterGroup> filter_groups(const std::string& name, const Tensor& t, bool perturb_aux = false);
std::string filter_policy_name(bool perturb_aux);

// Rescales each group of `direction` to the norm of the matching parameter
// group: d_g <- d_g * |theta_g| / |d_g|. Groups with |theta_g| == 0 and
// frozen tensors come back exactly zero.
ParameterSet filter_normalize(const ParameterSet& direction, const ParameterSet& params,
                              bool perturb_aux = false);
void normalize_pair(DirectionPair& dir, const ParameterSet& params, bool perturb_aux = false);

struct LandscapeGrid {
    std::vector<double> alphas; // sorted, symmetric about 0, includes 0
    std::vector<double> betas;
    std::vector<double> losses; // row-major [alphas x betas]
    double base_loss = 0.0;     // loss at (0, 0)
    std::string regime;
    std::uint64_t direction_seed = 0;

    int resolution() const { return static_cast<int>(alphas.size()); }
    double loss_at(int i, int j) const { return losses[static_cast<std::size_t>(i) * betas.size() + j]; }
    int center_index() const { return static_cast<int>(alphas.size()) / 2; }
};

using LossEval = std::function<double(const ParameterSet&)>;

// Evaluates loss_eval at theta + alpha*delta + beta*eta over a symmetric
// grid. The center point uses theta itself, untouched. Non-finite losses
// are recorded as +inf. Any worker count produces identical results because
// every point is independent and written to its fixed slot.
LandscapeGrid evaluate_grid(const ParameterSet& theta, const LossEval& loss_eval, const DirectionPair& dir,
                            int resolution, double half_range, int workers = 1);

struct CurvatureReport {
    double convexity_fraction = 0.0; // interior points with PSD discrete Hessian
    double flatness_radius = 0.0;    // largest linf-ball around center with f <= f0 + epsilon
    double loss_range = 0.0;         // max - min over finite entries
    double center_gap = 0.0;         // mean(finite) - base loss
    double epsilon = 0.0;            // threshold used for the flatness radius
};

double default_flatness_epsilon(double base_loss); // 0.1 * (base + 1e-8)
CurvatureReport curvature_report(const LandscapeGrid& grid, double epsilon);

// CSV: header "alpha,beta,loss", one row per point in row-major order,
// doubles printed with 17 significant digits, "inf" for the sentinel.
void write_grid_csv(const std::string& path, const LandscapeGrid& grid);
LandscapeGrid read_grid_csv(const std::string& path);

} // namespace vitscape
