#include "vitscape/landscape.hpp"

#include "vitscape/errors.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace vitscape {

DirectionPair sample_directions(const ParameterSet& params, std::uint64_t seed) {
    DirectionPair d;
    d.seed = seed;
    d.normalized = false;
    Rng delta_rng = Rng::stream(seed, "direction-delta");
    Rng eta_rng = Rng::stream(seed, "direction-eta");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor dt = Tensor::zeros(params.value(i).shape());
        Tensor et = Tensor::zeros(params.value(i).shape());
        for (long long k = 0; k < dt.numel(); ++k) {
            dt[k] = delta_rng.normal();
        }
        for (long long k = 0; k < et.numel(); ++k) {
            et[k] = eta_rng.normal();
        }
        d.delta.add(params.name(i), std::move(dt));
        d.eta.add(params.name(i), std::move(et));
    }
    return d;
}

std::vector<FilterGroup> filter_groups(const std::string& name, const Tensor& t, bool perturb_aux) {
    std::vector<FilterGroup> groups;
    const bool is_weight = t.rank() == 2 && name.size() > 7 && name.ends_with(".weight");
    if (is_weight) {
        // row-major [in x out]: column j holds output neuron j's incoming weights
        const int in = t.rows(), out = t.cols();
        groups.reserve(static_cast<std::size_t>(out));
        for (int j = 0; j < out; ++j) {
            groups.push_back(FilterGroup{j, out, in});
        }
    } else if (perturb_aux) {
        groups.push_back(FilterGroup{0, 1, t.numel()});
    }
    return groups;
}

std::string filter_policy_name(bool perturb_aux) {
    return perturb_aux ? "weight-columns+aux-whole-tensor" : "weight-columns,aux-frozen";
}

namespace {

double group_norm(const Tensor& t, const FilterGroup& g) {
    double acc = 0.0;
    for (long long i = 0; i < g.count; ++i) {
        const double v = t[g.start + i * g.stride];
        acc += v * v;
    }
    return std::sqrt(acc);
}

} // namespace

ParameterSet filter_normalize(const ParameterSet& direction, const ParameterSet& params, bool perturb_aux) {
    require_same_layout(direction, params, "filter_normalize");
    ParameterSet out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& theta = params.value(i);
        Tensor d = direction.value(i);
        const auto groups = filter_groups(params.name(i), theta, perturb_aux);
        if (groups.empty()) {
            d = Tensor::zeros(theta.shape()); // frozen
        } else {
            for (const FilterGroup& g : groups) {
                const double tn = group_norm(theta, g);
                const double dn = group_norm(d, g);
                if (tn == 0.0) {
                    for (long long k = 0; k < g.count; ++k) {
                        d[g.start + k * g.stride] = 0.0;
                    }
                    continue;
                }
                if (dn == 0.0) {
                    fail_contract("filter_normalize: zero-norm direction group in " + params.name(i) +
                                  " against nonzero parameters; resample the direction");
                }
                const double s = tn / dn;
                for (long long k = 0; k < g.count; ++k) {
                    d[g.start + k * g.stride] *= s;
                }
            }
        }
        out.add(params.name(i), std::move(d));
    }
    return out;
}

void normalize_pair(DirectionPair& dir, const ParameterSet& params, bool perturb_aux) {
    dir.delta = filter_normalize(dir.delta, params, perturb_aux);
    dir.eta = filter_normalize(dir.eta, params, perturb_aux);
    dir.normalized = true;
}

namespace {

// symmetric coordinates: index c +- k map to exactly negated values
std::vector<double> symmetric_axis(int resolution, double half_range) {
    const int c = resolution / 2;
    std::vector<double> axis(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
        axis[static_cast<std::size_t>(i)] =
            half_range * (static_cast<double>(i - c) / static_cast<double>(c));
    }
    return axis;
}

} // namespace

LandscapeGrid evaluate_grid(const ParameterSet& theta, const LossEval& loss_eval, const DirectionPair& dir,
                            int resolution, double half_range, int workers) {
    require(resolution >= 3 && resolution % 2 == 1, "resolution must be an odd integer >= 3");
    require(half_range > 0.0, "half_range must be positive");
    require(dir.normalized, "directions must be filter-normalized before grid evaluation");
    require_same_layout(dir.delta, theta, "evaluate_grid delta");
    require_same_layout(dir.eta, theta, "evaluate_grid eta");
    require(workers >= 1, "workers must be positive");

    LandscapeGrid grid;
    grid.alphas = symmetric_axis(resolution, half_range);
    grid.betas = grid.alphas;
    grid.direction_seed = dir.seed;
    grid.losses.assign(static_cast<std::size_t>(resolution) * resolution,
                       std::numeric_limits<double>::infinity());

    const int total = resolution * resolution;
    const int c = resolution / 2;

    auto eval_point = [&](int flat, ParameterSet& scratch) {
        const int i = flat / resolution;
        const int j = flat % resolution;
        double loss;
        if (i == c && j == c) {
            loss = loss_eval(theta); // center evaluates theta itself, bit-exact
        } else {
            const double a = grid.alphas[static_cast<std::size_t>(i)];
            const double b = grid.betas[static_cast<std::size_t>(j)];
            for (std::size_t p = 0; p < theta.size(); ++p) {
                const Tensor& tp = theta.value(p);
                const Tensor& dp = dir.delta.value(p);
                const Tensor& ep = dir.eta.value(p);
                Tensor& sp = scratch.value(p);
                for (long long k = 0; k < tp.numel(); ++k) {
                    sp[k] = tp[k] + a * dp[k] + b * ep[k];
                }
            }
            loss = loss_eval(scratch);
        }
        grid.losses[static_cast<std::size_t>(flat)] =
            std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
    };

    if (workers == 1) {
        ParameterSet scratch = theta;
        for (int flat = 0; flat < total; ++flat) {
            eval_point(flat, scratch);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                ParameterSet scratch = theta; // worker-local perturbed copy
                for (;;) {
                    const int flat = next.fetch_add(1);
                    if (flat >= total) {
                        return;
                    }
                    eval_point(flat, scratch);
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    grid.base_loss = grid.loss_at(c, c);
    return grid;
}

double default_flatness_epsilon(double base_loss) {
    return 0.1 * (base_loss + 1e-8);
}

CurvatureReport curvature_report(const LandscapeGrid& grid, double epsilon) {
    const int res = grid.resolution();
    require(res >= 5, "curvature_report needs resolution >= 5");
    require(static_cast<int>(grid.betas.size()) == res, "curvature_report needs a square grid");

    bool any_finite = false;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    long long n_finite = 0;
    for (double v : grid.losses) {
        if (std::isfinite(v)) {
            any_finite = true;
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            mean += v;
            n_finite += 1;
        }
    }
    if (!any_finite) {
        fail_contract("curvature_report: grid has no finite losses");
    }
    mean /= static_cast<double>(n_finite);

    CurvatureReport rep;
    rep.epsilon = epsilon;
    rep.loss_range = mx - mn;
    rep.center_gap = mean - grid.base_loss;

    // discrete Hessian PSD test on interior points; non-finite stencils count
    // as non-convex
    const double ha = grid.alphas[1] - grid.alphas[0];
    const double hb = grid.betas[1] - grid.betas[0];
    long long psd = 0, interior = 0;
    for (int i = 1; i < res - 1; ++i) {
        for (int j = 1; j < res - 1; ++j) {
            interior += 1;
            const double f0 = grid.loss_at(i, j);
            const double fxp = grid.loss_at(i + 1, j), fxm = grid.loss_at(i - 1, j);
            const double fyp = grid.loss_at(i, j + 1), fym = grid.loss_at(i, j - 1);
            const double fpp = grid.loss_at(i + 1, j + 1), fpm = grid.loss_at(i + 1, j - 1);
            const double fmp = grid.loss_at(i - 1, j + 1), fmm = grid.loss_at(i - 1, j - 1);
            if (!std::isfinite(f0) || !std::isfinite(fxp) || !std::isfinite(fxm) || !std::isfinite(fyp) ||
                !std::isfinite(fym) || !std::isfinite(fpp) || !std::isfinite(fpm) || !std::isfinite(fmp) ||
                !std::isfinite(fmm)) {
                continue;
            }
            const double faa = (fxp - 2.0 * f0 + fxm) / (ha * ha);
            const double fbb = (fyp - 2.0 * f0 + fym) / (hb * hb);
            const double fab = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
            if (faa >= 0.0 && fbb >= 0.0 && faa * fbb - fab * fab >= 0.0) {
                psd += 1;
            }
        }
    }
    rep.convexity_fraction = static_cast<double>(psd) / static_cast<double>(interior);

    // flatness radius: widest centered linf-ball where f <= f(0,0) + epsilon
    const int c = grid.center_index();
    const double limit = grid.base_loss + epsilon;
    double radius = 0.0;
    for (int ring = 1; ring <= c; ++ring) {
        bool ok = true;
        for (int i = c - ring; i <= c + ring && ok; ++i) {
            for (int j = c - ring; j <= c + ring && ok; ++j) {
                if (std::max(std::abs(i - c), std::abs(j - c)) != ring) {
                    continue;
                }
                ok = grid.loss_at(i, j) <= limit;
            }
        }
        if (!ok) {
            break;
        }
        radius = grid.alphas[static_cast<std::size_t>(c + ring)];
    }
    rep.flatness_radius = radius;
    return rep;
}

namespace {

std::string format_loss(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_grid_csv(const std::string& path, const LandscapeGrid& grid) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f << "alpha,beta,loss\n";
    for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
        for (std::size_t j = 0; j < grid.betas.size(); ++j) {
            f << format_loss(grid.alphas[i]) << ',' << format_loss(grid.betas[j]) << ','
              << format_loss(grid.losses[i * grid.betas.size() + j]) << '\n';
        }
    }
    if (!f) {
        throw FormatError("short write to " + path);
    }
}

LandscapeGrid read_grid_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw FormatError("cannot open " + path);
    }
    std::string line;
    if (!std::getline(f, line) || line != "alpha,beta,loss") {
        throw FormatError(path + ": expected header alpha,beta,loss");
    }
    std::vector<double> alphas, betas, losses;
    std::vector<std::pair<double, double>> coords;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string a, b, l;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, l)) {
            throw FormatError(path + ": malformed row: " + line);
        }
        coords.emplace_back(std::strtod(a.c_str(), nullptr), std::strtod(b.c_str(), nullptr));
        losses.push_back(std::strtod(l.c_str(), nullptr));
    }
    if (coords.empty()) {
        throw FormatError(path + ": no grid rows");
    }
    // infer the beta axis from the first block of constant alpha
    const double a0 = coords[0].first;
    for (const auto& [a, b] : coords) {
        if (a == a0) {
            betas.push_back(b);
        }
    }
    const std::size_t nb = betas.size();
    if (nb == 0 || coords.size() % nb != 0) {
        throw FormatError(path + ": grid is not rectangular");
    }
    for (std::size_t i = 0; i < coords.size(); i += nb) {
        alphas.push_back(coords[i].first);
    }
    LandscapeGrid grid;
    grid.alphas = std::move(alphas);
    grid.betas = std::move(betas);
    grid.losses = std::move(losses);
    if (grid.alphas.size() == grid.betas.size() && grid.alphas.size() % 2 == 1) {
        grid.base_loss = grid.loss_at(grid.center_index(), grid.center_index());
    }
    return grid;
}

} // namespace vitscape
