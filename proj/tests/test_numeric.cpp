#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vitscape/errors.hpp"
#include "vitscape/graph.hpp"
#include "vitscape/rng.hpp"
#include "vitscape/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace vitscape;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (long long i = 0; i < t.numel(); ++i) {
        t[i] = scale * rng.normal();
    }
    return t;
}

// Central-difference gradient check: loss = sum(build(inputs) * probe).
// build must be a pure function of the input tensors.
using BuildFn = std::function<Var(Graph&, const std::vector<Var>&)>;

double fd_loss(const BuildFn& build, const std::vector<Tensor>& inputs, const Tensor& probe) {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) {
        vars.push_back(g.input(t, false));
    }
    Var out = build(g, vars);
    return g.scalar(g.sum(g.mul(out, g.constant(probe))));
}

void check_gradients(const BuildFn& build, std::vector<Tensor> inputs, std::uint64_t probe_seed = 7) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) {
        vars.push_back(g.input(t, true));
    }
    Var out = build(g, vars);
    Rng prng(probe_seed);
    Tensor probe = random_tensor(g.value(out).shape(), prng);
    Var loss = g.sum(g.mul(out, g.constant(probe)));
    g.backward(loss);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        const Tensor analytic = g.grad(vars[which]);
        for (long long i = 0; i < inputs[which].numel(); ++i) {
            const double keep = inputs[which][i];
            inputs[which][i] = keep + h;
            const double fp = fd_loss(build, inputs, probe);
            inputs[which][i] = keep - h;
            const double fm = fd_loss(build, inputs, probe);
            inputs[which][i] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
            max_rel = std::max(max_rel, std::abs(analytic[i] - fd) / denom);
        }
    }
    CHECK(max_rel < 1e-4);
}

} // namespace

TEST_CASE("tensor basics") {
    Tensor t = Tensor::of({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t(1, 2) == 6.0);
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor::of({2, 2}, {1.0}), DimensionError);
    CHECK_THROWS_AS(Tensor::zeros({0, 3}), DimensionError);
    CHECK(t.shape_str() == "[2 x 3]");
}

TEST_CASE("rng streams are deterministic and purpose-split") {
    Rng a = Rng::stream(42, "mask");
    Rng b = Rng::stream(42, "mask");
    Rng c = Rng::stream(42, "init");
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("rng normal moments") {
    Rng rng(123);
    const int n = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        mean += x;
        m2 += x * x;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("matmul identity and zero") {
    Graph g;
    Var id2 = g.constant(Tensor::of({2, 2}, {1, 0, 0, 1}));
    Var m = g.constant(Tensor::of({2, 2}, {1, 2, 3, 4}));
    CHECK(g.value(g.matmul(id2, m)).same_bits(g.value(m)));

    Var zero = g.constant(Tensor::zeros({2, 2}));
    const Tensor& prod = g.value(g.matmul(id2, zero));
    for (long long i = 0; i < prod.numel(); ++i) {
        CHECK(prod[i] == 0.0);
    }
}

TEST_CASE("matmul against triple-loop oracle") {
    Rng rng(5);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Graph g;
    const Tensor& got = g.value(g.matmul(g.constant(a), g.constant(b)));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            double want = 0.0;
            for (int k = 0; k < 4; ++k) {
                want += a(i, k) * b(k, j);
            }
            CHECK(std::abs(got(i, j) - want) < 1e-12);
        }
    }
}

TEST_CASE("matmul shape error names both shapes") {
    Graph g;
    Var a = g.constant(Tensor::zeros({3, 4}));
    Var b = g.constant(Tensor::zeros({5, 2}));
    try {
        g.matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3 x 4]") != std::string::npos);
        CHECK(msg.find("[5 x 2]") != std::string::npos);
    }
}

TEST_CASE("softmax examples") {
    Graph g;
    const Tensor& u = g.value(g.softmax(g.constant(Tensor::of({3}, {0, 0, 0})), 0));
    for (int i = 0; i < 3; ++i) {
        CHECK(u[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    // shift invariance: [c, c+ln2] -> [1/3, 2/3] for any c
    for (double c : {-100.0, 0.0, 17.5}) {
        Graph g2;
        const Tensor& s = g2.value(g2.softmax(g2.constant(Tensor::of({2}, {c, c + std::log(2.0)})), 0));
        CHECK(s[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(s[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }

    // stability under max subtraction
    Graph g3;
    const Tensor& s = g3.value(g3.softmax(g3.constant(Tensor::of({2}, {1000.0, 1001.0})), 0));
    CHECK(std::isfinite(s[0]));
    CHECK(std::isfinite(s[1]));
    const double e = std::exp(1.0);
    CHECK(s[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and shift invariance on random input") {
    Rng rng(9);
    Tensor x = random_tensor({6, 5}, rng, 3.0);
    Graph g;
    const Tensor& y = g.value(g.softmax(g.constant(x), 1));
    for (int i = 0; i < 6; ++i) {
        double row = 0.0;
        for (int j = 0; j < 5; ++j) {
            row += y(i, j);
        }
        CHECK(std::abs(row - 1.0) < 1e-12);
    }

    Tensor shifted = x;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 5; ++j) {
            shifted(i, j) += 123.456;
        }
    }
    Graph g2;
    const Tensor& y2 = g2.value(g2.softmax(g2.constant(shifted), 1));
    for (long long i = 0; i < y.numel(); ++i) {
        CHECK(std::abs(y[i] - y2[i]) < 1e-12);
    }
}

TEST_CASE("layer norm rows: mean and variance before affine") {
    Rng rng(11);
    Tensor x = random_tensor({4, 32}, rng, 2.0);
    Graph g;
    const Tensor& y = g.value(g.layer_norm_rows(g.constant(x), 1e-10));
    for (int i = 0; i < 4; ++i) {
        double mean = 0.0;
        for (int j = 0; j < 32; ++j) {
            mean += y(i, j);
        }
        mean /= 32;
        double var = 0.0;
        for (int j = 0; j < 32; ++j) {
            var += (y(i, j) - mean) * (y(i, j) - mean);
        }
        var /= 32;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-8);
    }
}

TEST_CASE("backward: sum gives all-ones, half squared norm gives the input") {
    Rng rng(13);
    Tensor p = random_tensor({3, 4}, rng);
    {
        Graph g;
        Var vp = g.input(p, true);
        g.backward(g.sum(vp));
        const Tensor grad = g.grad(vp);
        for (long long i = 0; i < grad.numel(); ++i) {
            CHECK(grad[i] == 1.0);
        }
    }
    {
        Graph g;
        Var vp = g.input(p, true);
        Var loss = g.scale(g.sum(g.mul(vp, vp)), 0.5);
        g.backward(loss);
        const Tensor grad = g.grad(vp);
        for (long long i = 0; i < grad.numel(); ++i) {
            CHECK(grad[i] == doctest::Approx(p[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("backward requires a scalar root") {
    Graph g;
    Var v = g.input(Tensor::zeros({2, 2}), true);
    CHECK_THROWS_AS(g.backward(v), ContractError);
}

TEST_CASE("leaves off the tape get zero gradients") {
    Graph g;
    Var used = g.input(Tensor::of({2}, {1, 2}), true);
    Var unused = g.input(Tensor::of({3}, {1, 2, 3}), true);
    g.backward(g.sum(used));
    const Tensor gz = g.grad(unused);
    CHECK(gz.numel() == 3);
    for (long long i = 0; i < 3; ++i) {
        CHECK(gz[i] == 0.0);
    }
}

TEST_CASE("gradient checks for every differentiable op") {
    Rng rng(17);

    SUBCASE("add/sub/mul/scale") {
        check_gradients(
            [](Graph& g, const std::vector<Var>& v) {
                return g.scale(g.mul(g.add(v[0], v[1]), g.sub(v[0], v[1])), 1.7);
            },
            {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
    }
    SUBCASE("matmul") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); },
                        {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
    }
    SUBCASE("transpose") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.transpose(v[0]); },
                        {random_tensor({3, 5}, rng)});
    }
    SUBCASE("add_rowvec / mul_rowvec") {
        check_gradients(
            [](Graph& g, const std::vector<Var>& v) { return g.mul_rowvec(g.add_rowvec(v[0], v[1]), v[2]); },
            {random_tensor({4, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)});
    }
    SUBCASE("slice_cols / concat_cols") {
        check_gradients(
            [](Graph& g, const std::vector<Var>& v) {
                Var left = g.slice_cols(v[0], 0, 2);
                Var right = g.slice_cols(v[0], 2, 3);
                return g.concat_cols({right, left});
            },
            {random_tensor({3, 5}, rng)});
    }
    SUBCASE("take_rows / assemble_rows") {
        check_gradients(
            [](Graph& g, const std::vector<Var>& v) {
                Var taken = g.take_rows(v[0], {2, 0});
                return g.assemble_rows(4, {1, 3}, taken, v[1]);
            },
            {random_tensor({3, 4}, rng), random_tensor({1, 4}, rng)});
    }
    SUBCASE("mean_rows / reshape") {
        check_gradients(
            [](Graph& g, const std::vector<Var>& v) { return g.reshape(g.mean_rows(v[0]), {1, 4}); },
            {random_tensor({5, 4}, rng)});
    }
    SUBCASE("softmax axis 1") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.softmax(v[0], 1); },
                        {random_tensor({4, 6}, rng)});
    }
    SUBCASE("softmax axis 0") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.softmax(v[0], 0); },
                        {random_tensor({4, 6}, rng)});
    }
    SUBCASE("layer_norm_rows") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.layer_norm_rows(v[0], 1e-10); },
                        {random_tensor({4, 8}, rng)});
    }
    SUBCASE("gelu") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.gelu(v[0]); },
                        {random_tensor({4, 5}, rng, 2.0)});
    }
    SUBCASE("cross_entropy") {
        check_gradients([](Graph& g, const std::vector<Var>& v) { return g.cross_entropy(v[0], 2); },
                        {random_tensor({1, 6}, rng, 2.0)});
    }
}

TEST_CASE("gelu exact erf values") {
    Graph g;
    const Tensor& y = g.value(g.gelu(g.constant(Tensor::of({3}, {-1.0, 0.0, 1.0}))));
    CHECK(y[1] == 0.0);
    const double expect = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
    CHECK(y[2] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(y[0] == doctest::Approx(-(1.0 - expect)).epsilon(1e-12));
}
