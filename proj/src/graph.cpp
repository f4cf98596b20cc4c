#include "vitscape/graph.hpp"

#include "vitscape/errors.hpp"

#include <cmath>

namespace vitscape {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(who) + ": expected rank-2 tensor, got " + t.shape_str());
    }
}

} // namespace

Graph::Node& Graph::node(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        fail_contract("invalid graph var");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        fail_contract("invalid graph var");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value(Var v) const {
    return node(v).value;
}

double Graph::scalar(Var v) const {
    const Tensor& t = node(v).value;
    if (t.numel() != 1) {
        fail_contract("scalar() on tensor of shape " + t.shape_str());
    }
    return t[0];
}

Tensor& Graph::grad_buf(int id) {
    Tensor& g = grads_[static_cast<std::size_t>(id)];
    if (g.numel() == 0) {
        g = Tensor::zeros(nodes_[static_cast<std::size_t>(id)].value.shape());
    }
    return g;
}

void Graph::add_grad(int id, const Tensor& g) {
    Tensor& buf = grad_buf(id);
    const long long n = buf.numel();
    for (long long i = 0; i < n; ++i) {
        buf[i] += g[i];
    }
}

Var Graph::input(Tensor t, bool track) {
    Node n;
    n.op = Op::input;
    n.track = track;
    n.value = std::move(t);
    return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw DimensionError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::add;
    n.a = a.id;
    n.b = b.id;
    n.track = tracked(a.id) || tracked(b.id);
    n.value = ta;
    for (long long i = 0; i < n.value.numel(); ++i) {
        n.value[i] += tb[i];
    }
    return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw DimensionError("sub: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::sub;
    n.a = a.id;
    n.b = b.id;
    n.track = tracked(a.id) || tracked(b.id);
    n.value = ta;
    for (long long i = 0; i < n.value.numel(); ++i) {
        n.value[i] -= tb[i];
    }
    return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw DimensionError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::mul;
    n.a = a.id;
    n.b = b.id;
    n.track = tracked(a.id) || tracked(b.id);
    n.value = ta;
    for (long long i = 0; i < n.value.numel(); ++i) {
        n.value[i] *= tb[i];
    }
    return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a.id;
    n.darg = c;
    n.track = tracked(a.id);
    n.value = value(a);
    for (long long i = 0; i < n.value.numel(); ++i) {
        n.value[i] *= c;
    }
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    if (ta.cols() != tb.rows()) {
        throw DimensionError("matmul: inner dimensions disagree: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    const int m = ta.rows(), k = ta.cols(), p = tb.cols();
    Node n;
    n.op = Op::matmul;
    n.a = a.id;
    n.b = b.id;
    n.track = tracked(a.id) || tracked(b.id);
    n.value = Tensor::zeros({m, p});
    // i-k-j order keeps the inner loop contiguous
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double aik = ta(i, kk);
            const double* brow = tb.data() + static_cast<std::size_t>(kk) * p;
            double* crow = n.value.data() + static_cast<std::size_t>(i) * p;
            for (int j = 0; j < p; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return push(std::move(n));
}

Var Graph::transpose(Var a) {
    const Tensor& ta = value(a);
    require_rank2(ta, "transpose");
    const int m = ta.rows(), c = ta.cols();
    Node n;
    n.op = Op::transpose;
    n.a = a.id;
    n.track = tracked(a.id);
    n.value = Tensor::zeros({c, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < c; ++j) {
            n.value(j, i) = ta(i, j);
        }
    }
    return push(std::move(n));
}

Var Graph::add_rowvec(Var x, Var bias) {
    const Tensor& tx = value(x);
    const Tensor& tb = value(bias);
    require_rank2(tx, "add_rowvec");
    if (tb.rank() != 1 || tb.dim(0) != tx.cols()) {
        throw DimensionError("add_rowvec: " + tx.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::add_rowvec;
    n.a = x.id;
    n.b = bias.id;
    n.track = tracked(x.id) || tracked(bias.id);
    n.value = tx;
    const int rows = tx.rows(), cols = tx.cols();
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            n.value(i, j) += tb[j];
        }
    }
    return push(std::move(n));
}

Var Graph::mul_rowvec(Var x, Var gain) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    require_rank2(tx, "mul_rowvec");
    if (tg.rank() != 1 || tg.dim(0) != tx.cols()) {
        throw DimensionError("mul_rowvec: " + tx.shape_str() + " vs " + tg.shape_str());
    }
    Node n;
    n.op = Op::mul_rowvec;
    n.a = x.id;
    n.b = gain.id;
    n.track = tracked(x.id) || tracked(gain.id);
    n.value = tx;
    const int rows = tx.rows(), cols = tx.cols();
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            n.value(i, j) *= tg[j];
        }
    }
    return push(std::move(n));
}

Var Graph::slice_cols(Var x, int start, int count) {
    const Tensor& tx = value(x);
    require_rank2(tx, "slice_cols");
    if (start < 0 || count <= 0 || start + count > tx.cols()) {
        throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") out of " + tx.shape_str());
    }
    Node n;
    n.op = Op::slice_cols;
    n.a = x.id;
    n.iarg = start;
    n.track = tracked(x.id);
    n.value = Tensor::zeros({tx.rows(), count});
    for (int i = 0; i < tx.rows(); ++i) {
        for (int j = 0; j < count; ++j) {
            n.value(i, j) = tx(i, start + j);
        }
    }
    return push(std::move(n));
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        fail_contract("concat_cols: no inputs");
    }
    int rows = value(parts[0]).rows();
    int cols = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        require_rank2(t, "concat_cols");
        if (t.rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + value(parts[0]).shape_str() + " vs " + t.shape_str());
        }
        cols += t.cols();
    }
    Node n;
    n.op = Op::concat_cols;
    n.track = false;
    for (Var p : parts) {
        n.inputs.push_back(p.id);
        n.track = n.track || tracked(p.id);
    }
    n.value = Tensor::zeros({rows, cols});
    int off = 0;
    for (Var p : parts) {
        const Tensor& t = value(p);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < t.cols(); ++j) {
                n.value(i, off + j) = t(i, j);
            }
        }
        off += t.cols();
    }
    return push(std::move(n));
}

Var Graph::take_rows(Var x, std::vector<int> rows) {
    const Tensor& tx = value(x);
    require_rank2(tx, "take_rows");
    for (int r : rows) {
        if (r < 0 || r >= tx.rows()) {
            fail_contract("take_rows: row " + std::to_string(r) + " out of " + tx.shape_str());
        }
    }
    Node n;
    n.op = Op::take_rows;
    n.a = x.id;
    n.indices = std::move(rows);
    n.track = tracked(x.id);
    const int cols = tx.cols();
    n.value = Tensor::zeros({static_cast<int>(n.indices.size()), cols});
    for (std::size_t i = 0; i < n.indices.size(); ++i) {
        for (int j = 0; j < cols; ++j) {
            n.value(static_cast<int>(i), j) = tx(n.indices[i], j);
        }
    }
    return push(std::move(n));
}

Var Graph::assemble_rows(int n_rows, std::vector<int> positions, Var rows, Var fill) {
    const Tensor& tr = value(rows);
    const Tensor& tf = value(fill);
    require_rank2(tr, "assemble_rows");
    require_rank2(tf, "assemble_rows");
    if (static_cast<int>(positions.size()) != tr.rows()) {
        throw DimensionError("assemble_rows: " + std::to_string(positions.size()) +
                             " positions for " + tr.shape_str());
    }
    if (tf.rows() != 1 || tf.cols() != tr.cols()) {
        throw DimensionError("assemble_rows: fill " + tf.shape_str() + " vs rows " + tr.shape_str());
    }
    std::vector<char> placed(static_cast<std::size_t>(n_rows), 0);
    for (int p : positions) {
        if (p < 0 || p >= n_rows || placed[static_cast<std::size_t>(p)]) {
            fail_contract("assemble_rows: bad position " + std::to_string(p));
        }
        placed[static_cast<std::size_t>(p)] = 1;
    }
    Node n;
    n.op = Op::assemble_rows;
    n.a = rows.id;
    n.b = fill.id;
    n.indices = std::move(positions);
    n.track = tracked(rows.id) || tracked(fill.id);
    const int cols = tr.cols();
    n.value = Tensor::zeros({n_rows, cols});
    for (int r = 0; r < n_rows; ++r) {
        for (int j = 0; j < cols; ++j) {
            n.value(r, j) = tf(0, j);
        }
    }
    for (std::size_t i = 0; i < n.indices.size(); ++i) {
        for (int j = 0; j < cols; ++j) {
            n.value(n.indices[i], j) = tr(static_cast<int>(i), j);
        }
    }
    return push(std::move(n));
}

Var Graph::mean_rows(Var x) {
    const Tensor& tx = value(x);
    require_rank2(tx, "mean_rows");
    const int rows = tx.rows(), cols = tx.cols();
    Node n;
    n.op = Op::mean_rows;
    n.a = x.id;
    n.track = tracked(x.id);
    n.value = Tensor::zeros({cols});
    const double inv = 1.0 / rows;
    for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) {
            acc += tx(i, j);
        }
        n.value[j] = acc * inv;
    }
    return push(std::move(n));
}

Var Graph::sum(Var x) {
    const Tensor& tx = value(x);
    Node n;
    n.op = Op::sum;
    n.a = x.id;
    n.track = tracked(x.id);
    n.value = Tensor::zeros({1});
    double acc = 0.0;
    for (long long i = 0; i < tx.numel(); ++i) {
        acc += tx[i];
    }
    n.value[0] = acc;
    return push(std::move(n));
}

Var Graph::reshape(Var x, std::vector<int> shape) {
    const Tensor& tx = value(x);
    Tensor reshaped = Tensor::of(std::move(shape), tx.values());
    if (reshaped.numel() != tx.numel()) {
        throw DimensionError("reshape: " + tx.shape_str() + " to " + reshaped.shape_str());
    }
    Node n;
    n.op = Op::reshape;
    n.a = x.id;
    n.track = tracked(x.id);
    n.value = std::move(reshaped);
    return push(std::move(n));
}

Var Graph::softmax(Var x, int axis) {
    const Tensor& tx = value(x);
    if (axis < 0 || axis >= std::max(tx.rank(), 1)) {
        fail_contract("softmax: axis " + std::to_string(axis) + " out of range for " + tx.shape_str());
    }
    Node n;
    n.op = Op::softmax;
    n.a = x.id;
    n.iarg = axis;
    n.track = tracked(x.id);
    n.value = tx;

    auto normalize_lane = [](double* v, long long count, long long stride) {
        double mx = v[0];
        for (long long i = 1; i < count; ++i) {
            mx = std::max(mx, v[i * stride]);
        }
        double total = 0.0;
        for (long long i = 0; i < count; ++i) {
            const double e = std::exp(v[i * stride] - mx);
            v[i * stride] = e;
            total += e;
        }
        const double inv = 1.0 / total;
        for (long long i = 0; i < count; ++i) {
            v[i * stride] *= inv;
        }
    };

    if (tx.rank() == 1) {
        normalize_lane(n.value.data(), tx.numel(), 1);
    } else if (tx.rank() == 2) {
        const int rows = tx.rows(), cols = tx.cols();
        if (axis == 1) {
            for (int i = 0; i < rows; ++i) {
                normalize_lane(n.value.data() + static_cast<std::size_t>(i) * cols, cols, 1);
            }
        } else {
            for (int j = 0; j < cols; ++j) {
                normalize_lane(n.value.data() + j, rows, cols);
            }
        }
    } else {
        fail_contract("softmax: rank " + std::to_string(tx.rank()) + " unsupported");
    }
    return push(std::move(n));
}

Var Graph::layer_norm_rows(Var x, double eps) {
    const Tensor& tx = value(x);
    require_rank2(tx, "layer_norm_rows");
    const int rows = tx.rows(), cols = tx.cols();
    Node n;
    n.op = Op::layer_norm_rows;
    n.a = x.id;
    n.darg = eps;
    n.track = tracked(x.id);
    n.value = Tensor::zeros({rows, cols});
    n.aux = Tensor::zeros({rows}); // per-row 1/sqrt(var + eps)
    for (int i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) {
            mean += tx(i, j);
        }
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double d = tx(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        n.aux[i] = inv_std;
        for (int j = 0; j < cols; ++j) {
            n.value(i, j) = (tx(i, j) - mean) * inv_std;
        }
    }
    return push(std::move(n));
}

Var Graph::gelu(Var x) {
    const Tensor& tx = value(x);
    Node n;
    n.op = Op::gelu;
    n.a = x.id;
    n.track = tracked(x.id);
    n.value = tx;
    for (long long i = 0; i < n.value.numel(); ++i) {
        const double v = tx[i];
        n.value[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    return push(std::move(n));
}

Var Graph::cross_entropy(Var logits, int label) {
    const Tensor& tl = value(logits);
    long long k = tl.numel();
    if (tl.rank() == 2 && tl.rows() != 1) {
        throw DimensionError("cross_entropy: expected one row of logits, got " + tl.shape_str());
    }
    if (label < 0 || label >= k) {
        fail_contract("cross_entropy: label " + std::to_string(label) + " out of [0, " + std::to_string(k) + ")");
    }
    Node n;
    n.op = Op::cross_entropy;
    n.a = logits.id;
    n.iarg = label;
    n.track = tracked(logits.id);
    n.value = Tensor::zeros({1});
    n.aux = Tensor::zeros(tl.shape()); // softmax probabilities
    double mx = tl[0];
    for (long long i = 1; i < k; ++i) {
        mx = std::max(mx, tl[i]);
    }
    double total = 0.0;
    for (long long i = 0; i < k; ++i) {
        const double e = std::exp(tl[i] - mx);
        n.aux[i] = e;
        total += e;
    }
    const double inv = 1.0 / total;
    for (long long i = 0; i < k; ++i) {
        n.aux[i] *= inv;
    }
    n.value[0] = std::log(total) + mx - tl[label];
    return push(std::move(n));
}

void Graph::backward(Var root) {
    const Node& r = node(root);
    if (r.value.numel() != 1) {
        fail_contract("backward: root must be scalar, got " + r.value.shape_str());
    }
    for (Tensor& g : grads_) {
        g = Tensor();
    }
    grad_buf(root.id)[0] = 1.0;

    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        const Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (!n.track || g.numel() == 0) {
            continue;
        }
        switch (n.op) {
        case Op::input:
            break;
        case Op::add: {
            if (tracked(n.a)) add_grad(n.a, g);
            if (tracked(n.b)) add_grad(n.b, g);
            break;
        }
        case Op::sub: {
            if (tracked(n.a)) add_grad(n.a, g);
            if (tracked(n.b)) {
                Tensor& gb = grad_buf(n.b);
                for (long long i = 0; i < g.numel(); ++i) {
                    gb[i] -= g[i];
                }
            }
            break;
        }
        case Op::mul: {
            const Tensor& ta = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& tb = nodes_[static_cast<std::size_t>(n.b)].value;
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (long long i = 0; i < g.numel(); ++i) {
                    ga[i] += g[i] * tb[i];
                }
            }
            if (tracked(n.b)) {
                Tensor& gb = grad_buf(n.b);
                for (long long i = 0; i < g.numel(); ++i) {
                    gb[i] += g[i] * ta[i];
                }
            }
            break;
        }
        case Op::scale: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (long long i = 0; i < g.numel(); ++i) {
                    ga[i] += g[i] * n.darg;
                }
            }
            break;
        }
        case Op::matmul: {
            const Tensor& ta = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& tb = nodes_[static_cast<std::size_t>(n.b)].value;
            const int m = ta.rows(), k = ta.cols(), p = tb.cols();
            if (tracked(n.a)) { // dA += G * B^T
                Tensor& ga = grad_buf(n.a);
                for (int i = 0; i < m; ++i) {
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g.data() + static_cast<std::size_t>(i) * p;
                        const double* brow = tb.data() + static_cast<std::size_t>(kk) * p;
                        for (int j = 0; j < p; ++j) {
                            acc += grow[j] * brow[j];
                        }
                        ga(i, kk) += acc;
                    }
                }
            }
            if (tracked(n.b)) { // dB += A^T * G
                Tensor& gb = grad_buf(n.b);
                for (int i = 0; i < m; ++i) {
                    const double* arow = ta.data() + static_cast<std::size_t>(i) * k;
                    const double* grow = g.data() + static_cast<std::size_t>(i) * p;
                    for (int kk = 0; kk < k; ++kk) {
                        const double aik = arow[kk];
                        double* gbrow = gb.data() + static_cast<std::size_t>(kk) * p;
                        for (int j = 0; j < p; ++j) {
                            gbrow[j] += aik * grow[j];
                        }
                    }
                }
            }
            break;
        }
        case Op::transpose: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const int m = ga.rows(), c = ga.cols();
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < c; ++j) {
                        ga(i, j) += g(j, i);
                    }
                }
            }
            break;
        }
        case Op::add_rowvec: {
            if (tracked(n.a)) add_grad(n.a, g);
            if (tracked(n.b)) {
                Tensor& gb = grad_buf(n.b);
                const int rows = g.rows(), cols = g.cols();
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        gb[j] += g(i, j);
                    }
                }
            }
            break;
        }
        case Op::mul_rowvec: {
            const Tensor& tx = nodes_[static_cast<std::size_t>(n.a)].value;
            const Tensor& tg = nodes_[static_cast<std::size_t>(n.b)].value;
            const int rows = g.rows(), cols = g.cols();
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        ga(i, j) += g(i, j) * tg[j];
                    }
                }
            }
            if (tracked(n.b)) {
                Tensor& gb = grad_buf(n.b);
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        gb[j] += g(i, j) * tx(i, j);
                    }
                }
            }
            break;
        }
        case Op::slice_cols: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const int rows = g.rows(), cols = g.cols();
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        ga(i, n.iarg + j) += g(i, j);
                    }
                }
            }
            break;
        }
        case Op::concat_cols: {
            int off = 0;
            for (int src : n.inputs) {
                const Tensor& ts = nodes_[static_cast<std::size_t>(src)].value;
                if (tracked(src)) {
                    Tensor& gs = grad_buf(src);
                    for (int i = 0; i < ts.rows(); ++i) {
                        for (int j = 0; j < ts.cols(); ++j) {
                            gs(i, j) += g(i, off + j);
                        }
                    }
                }
                off += ts.cols();
            }
            break;
        }
        case Op::take_rows: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const int cols = g.cols();
                for (std::size_t i = 0; i < n.indices.size(); ++i) {
                    for (int j = 0; j < cols; ++j) {
                        ga(n.indices[i], j) += g(static_cast<int>(i), j);
                    }
                }
            }
            break;
        }
        case Op::assemble_rows: {
            const int cols = g.cols();
            std::vector<char> from_rows(static_cast<std::size_t>(g.rows()), 0);
            for (int p : n.indices) {
                from_rows[static_cast<std::size_t>(p)] = 1;
            }
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (std::size_t i = 0; i < n.indices.size(); ++i) {
                    for (int j = 0; j < cols; ++j) {
                        ga(static_cast<int>(i), j) += g(n.indices[i], j);
                    }
                }
            }
            if (tracked(n.b)) {
                Tensor& gb = grad_buf(n.b);
                for (int r = 0; r < g.rows(); ++r) {
                    if (from_rows[static_cast<std::size_t>(r)]) {
                        continue;
                    }
                    for (int j = 0; j < cols; ++j) {
                        gb(0, j) += g(r, j);
                    }
                }
            }
            break;
        }
        case Op::mean_rows: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const int rows = ga.rows(), cols = ga.cols();
                const double inv = 1.0 / rows;
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        ga(i, j) += g[j] * inv;
                    }
                }
            }
            break;
        }
        case Op::sum: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (long long i = 0; i < ga.numel(); ++i) {
                    ga[i] += g[0];
                }
            }
            break;
        }
        case Op::reshape: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                for (long long i = 0; i < ga.numel(); ++i) {
                    ga[i] += g[i];
                }
            }
            break;
        }
        case Op::softmax: {
            // dx = y * (g - sum(g * y)) along the softmax lanes
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const Tensor& y = n.value;
                auto lane_bwd = [&](long long base, long long count, long long stride) {
                    double dot = 0.0;
                    for (long long i = 0; i < count; ++i) {
                        dot += g[base + i * stride] * y[base + i * stride];
                    }
                    for (long long i = 0; i < count; ++i) {
                        const long long idx = base + i * stride;
                        ga[idx] += y[idx] * (g[idx] - dot);
                    }
                };
                if (y.rank() == 1) {
                    lane_bwd(0, y.numel(), 1);
                } else if (n.iarg == 1) {
                    for (int i = 0; i < y.rows(); ++i) {
                        lane_bwd(static_cast<long long>(i) * y.cols(), y.cols(), 1);
                    }
                } else {
                    for (int j = 0; j < y.cols(); ++j) {
                        lane_bwd(j, y.rows(), y.cols());
                    }
                }
            }
            break;
        }
        case Op::layer_norm_rows: {
            // dx = inv_std * (g - mean(g) - y * mean(g * y)) per row
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const Tensor& y = n.value;
                const int rows = y.rows(), cols = y.cols();
                for (int i = 0; i < rows; ++i) {
                    double gm = 0.0, gym = 0.0;
                    for (int j = 0; j < cols; ++j) {
                        gm += g(i, j);
                        gym += g(i, j) * y(i, j);
                    }
                    gm /= cols;
                    gym /= cols;
                    const double inv_std = n.aux[i];
                    for (int j = 0; j < cols; ++j) {
                        ga(i, j) += inv_std * (g(i, j) - gm - y(i, j) * gym);
                    }
                }
            }
            break;
        }
        case Op::gelu: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const Tensor& tx = nodes_[static_cast<std::size_t>(n.a)].value;
                for (long long i = 0; i < tx.numel(); ++i) {
                    const double v = tx[i];
                    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                    ga[i] += g[i] * (cdf + v * pdf);
                }
            }
            break;
        }
        case Op::cross_entropy: {
            if (tracked(n.a)) {
                Tensor& ga = grad_buf(n.a);
                const Tensor& probs = n.aux;
                for (long long i = 0; i < probs.numel(); ++i) {
                    const double onehot = (i == n.iarg) ? 1.0 : 0.0;
                    ga[i] += g[0] * (probs[i] - onehot);
                }
            }
            break;
        }
        }
    }
}

Tensor Graph::grad(Var v) const {
    const Tensor& g = grads_[static_cast<std::size_t>(v.id)];
    if (g.numel() == 0) {
        return Tensor::zeros(node(v).value.shape());
    }
    return g;
}

BoundParams::BoundParams(Graph& g, const ParameterSet& ps, bool track) : source_(&ps) {
    vars_.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        vars_.push_back(g.input(ps.value(i), track));
    }
}

BoundParams::BoundParams(Graph& g, const ParameterSet& ps, const std::vector<std::string>& tracked_names)
    : source_(&ps) {
    vars_.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        bool track = false;
        for (const std::string& n : tracked_names) {
            track = track || n == ps.name(i);
        }
        vars_.push_back(g.input(ps.value(i), track));
    }
}

Var BoundParams::operator[](const std::string& name) const {
    const std::size_t i = source_->index_of(name);
    if (i >= source_->size()) {
        fail_contract("unbound parameter: " + name);
    }
    return vars_[i];
}

ParameterSet collect_grads(const Graph& g, const BoundParams& bp) {
    ParameterSet grads;
    const ParameterSet& src = bp.source();
    for (std::size_t i = 0; i < src.size(); ++i) {
        grads.add(src.name(i), g.grad(bp.var(i)));
    }
    return grads;
}

ParameterSet collect_grads(const Graph& g, const BoundParams& bp, const std::vector<std::string>& names) {
    ParameterSet grads;
    const ParameterSet& src = bp.source();
    for (const std::string& n : names) {
        const std::size_t i = src.index_of(n);
        if (i >= src.size()) {
            fail_contract("collect_grads: unknown parameter " + n);
        }
        grads.add(n, g.grad(bp.var(i)));
    }
    return grads;
}

} // namespace vitscape
