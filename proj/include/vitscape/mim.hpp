#pragma once

#include "vitscape/graph.hpp"
#include "vitscape/params.hpp"
#include "vitscape/rng.hpp"
#include "vitscape/tensor.hpp"

#include <vector>

namespace vitscape {

// Partition of patch indices into a masked set and a visible set. Both lists
// are kept sorted.
struct MaskSpec {
    int n_patches = 0;
    std::vector<int> masked;
    std::vector<int> visible;

    static MaskSpec from_masked(int n_patches, std::vector<int> masked);
    void validate() const;
};

// Uniform random subset of round(ratio * n) masked patches, deterministic
// per rng state. ratio == 1 leaves the visible set empty; the encoder
// rejects that later.
MaskSpec sample_mask(int n_patches, double ratio, Rng& rng);

// Mean over masked patches of the squared reconstruction error; visible
// patches never contribute.
double mae_loss(const Tensor& targets, const Tensor& preds, const MaskSpec& mask);
Var mae_loss_node(Graph& g, const Tensor& targets, Var preds, const MaskSpec& mask);

// Reconstruction plus teacher consistency, both averaged over masked
// patches. teacher_preds is a constant: gradients flow only through the
// student predictions.
double rc_mae_loss(const Tensor& targets, const Tensor& student_preds, const Tensor& teacher_preds,
                   const MaskSpec& mask, double consistency_weight = 1.0);
Var rc_mae_loss_node(Graph& g, const Tensor& targets, Var student_preds, const Tensor& teacher_preds,
                     const MaskSpec& mask, double consistency_weight = 1.0);

struct EmaTeacher {
    ParameterSet params;
    double decay = 0.996;
    long step = 0;

    static EmaTeacher init(const ParameterSet& student, double decay);
};

// teacher <- decay * teacher + (1 - decay) * student, elementwise
void ema_update(EmaTeacher& teacher, const ParameterSet& student);

// The same recursion evaluated as an explicit weighted sum over the student
// history plus the decayed initial teacher term.
ParameterSet ema_closed_form(const std::vector<ParameterSet>& students, const ParameterSet& initial,
                             double decay);

} // namespace vitscape
