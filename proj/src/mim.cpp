#include "vitscape/mim.hpp"

#include "vitscape/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vitscape {

MaskSpec MaskSpec::from_masked(int n_patches, std::vector<int> masked) {
    MaskSpec m;
    m.n_patches = n_patches;
    m.masked = std::move(masked);
    std::sort(m.masked.begin(), m.masked.end());
    std::vector<char> is_masked(static_cast<std::size_t>(n_patches), 0);
    for (int i : m.masked) {
        if (i < 0 || i >= n_patches) {
            fail_contract("mask index " + std::to_string(i) + " out of [0, " + std::to_string(n_patches) + ")");
        }
        is_masked[static_cast<std::size_t>(i)] = 1;
    }
    for (int i = 0; i < n_patches; ++i) {
        if (!is_masked[static_cast<std::size_t>(i)]) {
            m.visible.push_back(i);
        }
    }
    m.validate();
    return m;
}

void MaskSpec::validate() const {
    if (static_cast<int>(masked.size() + visible.size()) != n_patches) {
        fail_contract("mask partition does not cover all patches");
    }
    std::vector<char> seen(static_cast<std::size_t>(n_patches), 0);
    for (int i : masked) {
        seen[static_cast<std::size_t>(i)]++;
    }
    for (int i : visible) {
        seen[static_cast<std::size_t>(i)]++;
    }
    for (char c : seen) {
        if (c != 1) {
            fail_contract("mask partition is not a disjoint cover");
        }
    }
}

MaskSpec sample_mask(int n_patches, double ratio, Rng& rng) {
    if (n_patches < 1) {
        fail_contract("sample_mask: need at least one patch");
    }
    if (ratio < 0.0 || ratio > 1.0) {
        fail_contract("sample_mask: ratio must lie in [0, 1]");
    }
    const int n_masked = static_cast<int>(std::llround(ratio * n_patches));

    // partial Fisher-Yates: first n_masked entries form a uniform subset
    std::vector<int> perm(static_cast<std::size_t>(n_patches));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < n_masked; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(n_patches - i)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    perm.resize(static_cast<std::size_t>(n_masked));
    return MaskSpec::from_masked(n_patches, std::move(perm));
}

namespace {

void check_loss_shapes(const Tensor& targets, const Tensor& preds, const MaskSpec& mask) {
    if (targets.rank() != 2 || !targets.same_shape(preds)) {
        throw DimensionError("loss: targets " + targets.shape_str() + " vs preds " + preds.shape_str());
    }
    if (targets.rows() != mask.n_patches) {
        throw DimensionError("loss: " + std::to_string(mask.n_patches) + " patches vs " + targets.shape_str());
    }
    if (mask.masked.empty()) {
        fail_contract("loss: empty masked set (division by zero)");
    }
}

// sum over masked rows of squared elementwise differences; identical
// iteration order in the plain and graph paths
double masked_sq_sum(const Tensor& a, const Tensor& b, const MaskSpec& mask) {
    double acc = 0.0;
    const int cols = a.cols();
    for (int r : mask.masked) {
        for (int j = 0; j < cols; ++j) {
            const double d = a(r, j) - b(r, j);
            acc += d * d;
        }
    }
    return acc;
}

} // namespace

double mae_loss(const Tensor& targets, const Tensor& preds, const MaskSpec& mask) {
    check_loss_shapes(targets, preds, mask);
    return masked_sq_sum(targets, preds, mask) * (1.0 / static_cast<double>(mask.masked.size()));
}

Var mae_loss_node(Graph& g, const Tensor& targets, Var preds, const MaskSpec& mask) {
    check_loss_shapes(targets, g.value(preds), mask);
    Var t = g.constant(targets);
    Var diff = g.sub(g.take_rows(t, mask.masked), g.take_rows(preds, mask.masked));
    Var sq = g.mul(diff, diff);
    return g.scale(g.sum(sq), 1.0 / static_cast<double>(mask.masked.size()));
}

double rc_mae_loss(const Tensor& targets, const Tensor& student_preds, const Tensor& teacher_preds,
                   const MaskSpec& mask, double consistency_weight) {
    check_loss_shapes(targets, student_preds, mask);
    check_loss_shapes(targets, teacher_preds, mask);
    const double rec = masked_sq_sum(targets, student_preds, mask);
    const double cons = masked_sq_sum(student_preds, teacher_preds, mask);
    return (rec + consistency_weight * cons) * (1.0 / static_cast<double>(mask.masked.size()));
}

Var rc_mae_loss_node(Graph& g, const Tensor& targets, Var student_preds, const Tensor& teacher_preds,
                     const MaskSpec& mask, double consistency_weight) {
    check_loss_shapes(targets, g.value(student_preds), mask);
    check_loss_shapes(targets, teacher_preds, mask);
    Var t = g.constant(targets);
    Var sm = g.take_rows(student_preds, mask.masked);
    Var rec_diff = g.sub(g.take_rows(t, mask.masked), sm);
    Var rec = g.sum(g.mul(rec_diff, rec_diff));
    Var tm = g.take_rows(g.constant(teacher_preds), mask.masked);
    Var cons_diff = g.sub(sm, tm);
    Var cons = g.sum(g.mul(cons_diff, cons_diff));
    Var total = g.add(rec, g.scale(cons, consistency_weight));
    return g.scale(total, 1.0 / static_cast<double>(mask.masked.size()));
}

EmaTeacher EmaTeacher::init(const ParameterSet& student, double decay) {
    if (decay < 0.0 || decay > 1.0) {
        fail_contract("ema decay must lie in [0, 1]");
    }
    EmaTeacher t;
    t.params = student; // exact copy at step 0
    t.decay = decay;
    t.step = 0;
    return t;
}

void ema_update(EmaTeacher& teacher, const ParameterSet& student) {
    require_same_layout(teacher.params, student, "ema_update");
    const double a = teacher.decay;
    if (a == 0.0) {
        teacher.params = student;
    } else if (a != 1.0) {
        for (std::size_t i = 0; i < student.size(); ++i) {
            Tensor& t = teacher.params.value(i);
            const Tensor& s = student.value(i);
            for (long long k = 0; k < t.numel(); ++k) {
                t[k] = a * t[k] + (1.0 - a) * s[k];
            }
        }
    }
    teacher.step += 1;
}

ParameterSet ema_closed_form(const std::vector<ParameterSet>& students, const ParameterSet& initial,
                             double decay) {
    if (students.empty()) {
        fail_contract("ema_closed_form: empty student sequence");
    }
    for (const ParameterSet& s : students) {
        require_same_layout(initial, s, "ema_closed_form");
    }
    if (decay == 0.0) {
        return students.back();
    }
    const std::size_t t = students.size() - 1;
    ParameterSet out = ParameterSet::zeros_like(initial);
    double pow_a = 1.0; // decay^i
    for (std::size_t i = 0; i <= t; ++i) {
        const ParameterSet& s = students[t - i];
        const double w = pow_a * (1.0 - decay);
        for (std::size_t p = 0; p < out.size(); ++p) {
            Tensor& o = out.value(p);
            const Tensor& sv = s.value(p);
            for (long long k = 0; k < o.numel(); ++k) {
                o[k] += w * sv[k];
            }
        }
        pow_a *= decay;
    }
    // pow_a == decay^(t+1): weight of the initial teacher
    for (std::size_t p = 0; p < out.size(); ++p) {
        Tensor& o = out.value(p);
        const Tensor& iv = initial.value(p);
        for (long long k = 0; k < o.numel(); ++k) {
            o[k] += pow_a * iv[k];
        }
    }
    return out;
}

} // namespace vitscape
