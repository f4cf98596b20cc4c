#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vitscape/errors.hpp"
#include "vitscape/mim.hpp"
#include "vitscape/rng.hpp"

#include <cmath>
#include <cstring>

using namespace vitscape;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) {
        t[i] = rng.normal();
    }
    return t;
}

ParameterSet random_params(Rng& rng) {
    ParameterSet p;
    p.add("a", random_tensor({3, 4}, rng));
    p.add("b", random_tensor({5}, rng));
    return p;
}

} // namespace

TEST_CASE("sample_mask sizes and determinism") {
    {
        Rng rng(1);
        MaskSpec m = sample_mask(16, 0.0, rng);
        CHECK(m.masked.empty());
        CHECK(m.visible.size() == 16);
    }
    {
        Rng rng(1);
        MaskSpec m = sample_mask(16, 0.75, rng);
        CHECK(m.masked.size() == 12);
        CHECK(m.visible.size() == 4);
        m.validate();
    }
    {
        Rng a(9), b(9);
        MaskSpec ma = sample_mask(16, 0.5, a);
        MaskSpec mb = sample_mask(16, 0.5, b);
        CHECK(ma.masked == mb.masked);
    }
    {
        // ratio 1 leaves the visible set empty; allowed here
        Rng rng(2);
        MaskSpec m = sample_mask(16, 1.0, rng);
        CHECK(m.visible.empty());
        CHECK(m.masked.size() == 16);
    }
}

TEST_CASE("sample_mask per-index frequency over many draws") {
    Rng rng(77);
    const int trials = 100000;
    std::vector<int> hits(16, 0);
    for (int t = 0; t < trials; ++t) {
        MaskSpec m = sample_mask(16, 0.75, rng);
        for (int i : m.masked) {
            hits[static_cast<std::size_t>(i)] += 1;
        }
    }
    for (int i = 0; i < 16; ++i) {
        const double freq = static_cast<double>(hits[static_cast<std::size_t>(i)]) / trials;
        CHECK(std::abs(freq - 0.75) < 0.01);
    }
}

TEST_CASE("mae_loss examples") {
    // perfect prediction on the masked set, garbage on the visible set
    Tensor targets = Tensor::of({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor preds = Tensor::of({2, 4}, {1, 2, 3, 4, -9, -9, -9, -9});
    MaskSpec m0 = MaskSpec::from_masked(2, {0});
    CHECK(mae_loss(targets, preds, m0) == 0.0);

    // one masked patch, every element off by one
    Tensor off = Tensor::of({2, 4}, {2, 3, 4, 5, 5, 6, 7, 8});
    CHECK(mae_loss(targets, off, m0) == 4.0);

    MaskSpec empty = MaskSpec::from_masked(2, {});
    CHECK_THROWS_AS(mae_loss(targets, preds, empty), ContractError);
}

TEST_CASE("mae_loss equals the double-loop oracle") {
    Rng rng(5);
    Tensor targets = random_tensor({16, 8}, rng);
    Tensor preds = random_tensor({16, 8}, rng);
    Rng mask_rng(6);
    MaskSpec mask = sample_mask(16, 0.75, mask_rng);

    double oracle = 0.0;
    for (int i : mask.masked) {
        for (int d = 0; d < 8; ++d) {
            const double diff = targets(i, d) - preds(i, d);
            oracle += diff * diff;
        }
    }
    oracle /= static_cast<double>(mask.masked.size());
    CHECK(std::abs(mae_loss(targets, preds, mask) - oracle) < 1e-12);
}

TEST_CASE("mae_loss is bitwise invariant to visible-patch perturbations") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        Tensor targets = random_tensor({8, 4}, rng);
        Tensor preds = random_tensor({8, 4}, rng);
        Rng mask_rng(static_cast<std::uint64_t>(trial));
        MaskSpec mask = sample_mask(8, 0.5, mask_rng);
        const double base = mae_loss(targets, preds, mask);

        Tensor targets2 = targets;
        Tensor preds2 = preds;
        for (int i : mask.visible) {
            for (int d = 0; d < 4; ++d) {
                targets2(i, d) = 1e6 * rng.normal();
                preds2(i, d) = 1e6 * rng.normal();
            }
        }
        const double perturbed = mae_loss(targets2, preds2, mask);
        CHECK(std::memcmp(&base, &perturbed, sizeof(double)) == 0);
    }
}

TEST_CASE("rc_mae_loss examples and degeneracy") {
    Rng rng(8);
    Tensor targets = random_tensor({4, 4}, rng);
    Tensor student = random_tensor({4, 4}, rng);
    MaskSpec mask = MaskSpec::from_masked(4, {0, 2});

    // teacher == student: bitwise equal to the plain reconstruction loss
    const double rc = rc_mae_loss(targets, student, student, mask);
    const double mae = mae_loss(targets, student, mask);
    CHECK(std::memcmp(&rc, &mae, sizeof(double)) == 0);

    // student == targets, teacher off by one in all 4 elements of one patch
    Tensor teacher = targets;
    for (int d = 0; d < 4; ++d) {
        teacher(0, d) += 1.0;
    }
    MaskSpec one = MaskSpec::from_masked(4, {0});
    CHECK(rc_mae_loss(targets, targets, teacher, one) == 4.0);
}

TEST_CASE("rc_mae_loss equals two independent oracles") {
    Rng rng(9);
    Tensor targets = random_tensor({16, 8}, rng);
    Tensor student = random_tensor({16, 8}, rng);
    Tensor teacher = random_tensor({16, 8}, rng);
    Rng mask_rng(10);
    MaskSpec mask = sample_mask(16, 0.75, mask_rng);

    double rec = 0.0, cons = 0.0;
    for (int i : mask.masked) {
        for (int d = 0; d < 8; ++d) {
            rec += (targets(i, d) - student(i, d)) * (targets(i, d) - student(i, d));
            cons += (student(i, d) - teacher(i, d)) * (student(i, d) - teacher(i, d));
        }
    }
    const double oracle = (rec + cons) / static_cast<double>(mask.masked.size());
    CHECK(std::abs(rc_mae_loss(targets, student, teacher, mask) - oracle) < 1e-12);
}

TEST_CASE("rc_mae_loss dominates mae_loss, equality only at teacher == student") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor targets = random_tensor({8, 4}, rng);
        Tensor student = random_tensor({8, 4}, rng);
        Tensor teacher = random_tensor({8, 4}, rng);
        Rng mask_rng(static_cast<std::uint64_t>(trial) + 1000);
        MaskSpec mask = sample_mask(8, 0.5, mask_rng);
        const double rc = rc_mae_loss(targets, student, teacher, mask);
        const double mae = mae_loss(targets, student, mask);
        // teacher drawn independently: strictly greater with probability one
        CHECK(rc > mae);
    }
    // equality direction: teacher matching the student on the masked set is
    // enough, even when it disagrees on visible patches
    Tensor targets = random_tensor({8, 4}, rng);
    Tensor student = random_tensor({8, 4}, rng);
    Tensor teacher = student;
    Rng mask_rng(1);
    MaskSpec mask = sample_mask(8, 0.5, mask_rng);
    for (int i : mask.visible) {
        for (int d = 0; d < 4; ++d) {
            teacher(i, d) += 5.0;
        }
    }
    const double rc = rc_mae_loss(targets, student, teacher, mask);
    const double mae = mae_loss(targets, student, mask);
    CHECK(std::memcmp(&rc, &mae, sizeof(double)) == 0);
}

TEST_CASE("graph loss nodes agree bitwise with the plain losses") {
    Rng rng(12);
    Tensor targets = random_tensor({8, 4}, rng);
    Tensor student = random_tensor({8, 4}, rng);
    Tensor teacher = random_tensor({8, 4}, rng);
    Rng mask_rng(13);
    MaskSpec mask = sample_mask(8, 0.75, mask_rng);

    {
        Graph g;
        Var preds = g.input(student, true);
        const double node_val = g.scalar(mae_loss_node(g, targets, preds, mask));
        const double plain = mae_loss(targets, student, mask);
        CHECK(std::memcmp(&node_val, &plain, sizeof(double)) == 0);
    }
    {
        Graph g;
        Var preds = g.input(student, true);
        const double node_val = g.scalar(rc_mae_loss_node(g, targets, preds, teacher, mask, 1.0));
        const double plain = rc_mae_loss(targets, student, teacher, mask, 1.0);
        CHECK(std::memcmp(&node_val, &plain, sizeof(double)) == 0);
    }
}

TEST_CASE("loss node gradients match finite differences") {
    Rng rng(14);
    Tensor targets = random_tensor({6, 3}, rng);
    Tensor student = random_tensor({6, 3}, rng);
    Tensor teacher = random_tensor({6, 3}, rng);
    MaskSpec mask = MaskSpec::from_masked(6, {1, 4, 5});

    Graph g;
    Var preds = g.input(student, true);
    g.backward(rc_mae_loss_node(g, targets, preds, teacher, mask, 0.7));
    const Tensor analytic = g.grad(preds);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (long long k = 0; k < student.numel(); ++k) {
        Tensor plus = student, minus = student;
        plus[k] += h;
        minus[k] -= h;
        const double fd =
            (rc_mae_loss(targets, plus, teacher, mask, 0.7) - rc_mae_loss(targets, minus, teacher, mask, 0.7)) /
            (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[k]), 1e-6});
        max_rel = std::max(max_rel, std::abs(fd - analytic[k]) / denom);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("ema_update edge cases are exact") {
    Rng rng(15);
    ParameterSet student = random_params(rng);
    {
        EmaTeacher t = EmaTeacher::init(random_params(rng), 0.0);
        ema_update(t, student);
        CHECK(t.params.same_bits(student));
        CHECK(t.step == 1);
    }
    {
        ParameterSet initial = random_params(rng);
        EmaTeacher t = EmaTeacher::init(initial, 1.0);
        ema_update(t, student);
        CHECK(t.params.same_bits(initial));
    }
    {
        ParameterSet s;
        s.add("x", Tensor::of({1}, {0.0}));
        ParameterSet t0;
        t0.add("x", Tensor::of({1}, {1.0}));
        EmaTeacher t = EmaTeacher::init(t0, 0.9);
        ema_update(t, s);
        CHECK(t.params.at("x")[0] == doctest::Approx(0.9).epsilon(1e-15));
    }
}

TEST_CASE("ema_update rejects mismatched parameter sets, naming the missing") {
    Rng rng(16);
    EmaTeacher t = EmaTeacher::init(random_params(rng), 0.5);
    ParameterSet other;
    other.add("a", Tensor::zeros({3, 4}));
    other.add("zzz", Tensor::zeros({5}));
    try {
        ema_update(t, other);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("b") != std::string::npos);
        CHECK(msg.find("zzz") != std::string::npos);
    }
}

TEST_CASE("ema contraction toward the student") {
    Rng rng(17);
    ParameterSet student = random_params(rng);
    EmaTeacher t = EmaTeacher::init(random_params(rng), 0.87);
    ParameterSet before = t.params;
    ema_update(t, student);
    for (std::size_t p = 0; p < student.size(); ++p) {
        for (long long k = 0; k < student.value(p).numel(); ++k) {
            const double lhs = std::abs(t.params.value(p)[k] - student.value(p)[k]);
            const double rhs = 0.87 * std::abs(before.value(p)[k] - student.value(p)[k]);
            CHECK(std::abs(lhs - rhs) < 1e-12);
        }
    }
}

TEST_CASE("ema closed form examples") {
    Rng rng(18);
    {
        // single student: alpha*T0 + (1-alpha)*S0
        ParameterSet t0 = random_params(rng);
        ParameterSet s0 = random_params(rng);
        const double a = 0.6;
        ParameterSet closed = ema_closed_form({s0}, t0, a);
        for (std::size_t p = 0; p < t0.size(); ++p) {
            for (long long k = 0; k < t0.value(p).numel(); ++k) {
                const double want = a * t0.value(p)[k] + (1 - a) * s0.value(p)[k];
                CHECK(closed.value(p)[k] == doctest::Approx(want).epsilon(1e-14));
            }
        }
    }
    {
        // decay 0 collapses to the last student
        std::vector<ParameterSet> students{random_params(rng), random_params(rng), random_params(rng)};
        ParameterSet closed = ema_closed_form(students, random_params(rng), 0.0);
        CHECK(closed.same_bits(students.back()));
    }
}

TEST_CASE("chained updates match the closed form") {
    Rng rng(19);
    // ten random scalar students, 1e-12
    {
        ParameterSet initial;
        initial.add("x", Tensor::of({1}, {rng.normal()}));
        std::vector<ParameterSet> students;
        for (int i = 0; i < 10; ++i) {
            ParameterSet s;
            s.add("x", Tensor::of({1}, {rng.normal()}));
            students.push_back(std::move(s));
        }
        EmaTeacher t = EmaTeacher::init(initial, 0.9);
        for (const ParameterSet& s : students) {
            ema_update(t, s);
        }
        ParameterSet closed = ema_closed_form(students, initial, 0.9);
        CHECK(std::abs(t.params.at("x")[0] - closed.at("x")[0]) < 1e-12);
    }
    // one hundred steps over tensors, 1e-10
    {
        ParameterSet initial = random_params(rng);
        std::vector<ParameterSet> students;
        for (int i = 0; i < 100; ++i) {
            students.push_back(random_params(rng));
        }
        EmaTeacher t = EmaTeacher::init(initial, 0.996);
        for (const ParameterSet& s : students) {
            ema_update(t, s);
        }
        ParameterSet closed = ema_closed_form(students, initial, 0.996);
        for (std::size_t p = 0; p < initial.size(); ++p) {
            for (long long k = 0; k < initial.value(p).numel(); ++k) {
                CHECK(std::abs(t.params.value(p)[k] - closed.value(p)[k]) < 1e-10);
            }
        }
    }
}
