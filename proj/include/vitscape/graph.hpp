#pragma once

#include "vitscape/params.hpp"
#include "vitscape/tensor.hpp"

#include <vector>

namespace vitscape {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended during the forward pass and visited
// in strict reverse order by backward(). A graph is built fresh for every
// forward pass and thrown away afterwards.
class Graph {
public:
    // leaf holding a copy of t; track=true marks it as differentiable
    Var input(Tensor t, bool track = false);
    Var constant(Tensor t) { return input(std::move(t), false); }

    const Tensor& value(Var v) const;
    double scalar(Var v) const; // value of a 1-element tensor

    // elementwise / structural ops (shapes checked, errors name both shapes)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add_rowvec(Var x, Var bias);  // [N x D] + [D]
    Var mul_rowvec(Var x, Var gain);  // [N x D] * [D]
    Var slice_cols(Var x, int start, int count);
    Var concat_cols(const std::vector<Var>& parts);
    Var take_rows(Var x, std::vector<int> rows);
    // output row r = rows[i] where positions[i] == r, fill elsewhere
    Var assemble_rows(int n_rows, std::vector<int> positions, Var rows, Var fill);
    Var mean_rows(Var x); // [N x D] -> [D]
    Var sum(Var x);       // -> [1]
    Var reshape(Var x, std::vector<int> shape); // same element count, new view

    Var softmax(Var x, int axis);
    Var layer_norm_rows(Var x, double eps); // per-row standardize, no affine
    Var gelu(Var x);                        // exact erf form
    Var cross_entropy(Var logits, int label);

    // reverse pass from a scalar root; gradients accumulate per node
    void backward(Var root);
    // gradient of the last backward() w.r.t. v; zeros if v never received one
    Tensor grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        input,
        add,
        sub,
        mul,
        scale,
        matmul,
        transpose,
        add_rowvec,
        mul_rowvec,
        slice_cols,
        concat_cols,
        take_rows,
        assemble_rows,
        mean_rows,
        sum,
        reshape,
        softmax,
        layer_norm_rows,
        gelu,
        cross_entropy,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        std::vector<int> inputs;  // concat only
        std::vector<int> indices; // take/assemble row indices
        int iarg = 0;
        double darg = 0.0;
        bool track = false;
        Tensor value;
        Tensor aux; // op-specific saved values (softmax probs, layernorm stats)
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_; // parallel to nodes_, empty until touched

    Node& node(Var v);
    const Node& node(Var v) const;
    Var push(Node n);
    bool tracked(int id) const { return nodes_[static_cast<std::size_t>(id)].track; }
    Tensor& grad_buf(int id);
    void add_grad(int id, const Tensor& g);
};

// Per-graph leaf vars for every tensor of a ParameterSet, in canonical order.
class BoundParams {
public:
    BoundParams(Graph& g, const ParameterSet& ps, bool track);
    // tracking restricted to the named parameters; everything else is frozen
    BoundParams(Graph& g, const ParameterSet& ps, const std::vector<std::string>& tracked_names);
    Var operator[](const std::string& name) const;
    Var var(std::size_t i) const { return vars_[i]; }
    const ParameterSet& source() const { return *source_; }

private:
    const ParameterSet* source_;
    std::vector<Var> vars_;
};

// Gradients for every bound parameter; parameters that never reached the
// tape's root get zero gradients.
ParameterSet collect_grads(const Graph& g, const BoundParams& bp);
// Gradients for a subset of bound parameters, in the given order.
ParameterSet collect_grads(const Graph& g, const BoundParams& bp, const std::vector<std::string>& names);

} // namespace vitscape
