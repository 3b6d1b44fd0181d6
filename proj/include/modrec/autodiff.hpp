#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <vector>

#include "modrec/errors.hpp"
#include "modrec/rng.hpp"
#include "modrec/tensor.hpp"

namespace modrec {

enum class Pad { Valid, Same };

struct ConvGeom {
    std::size_t in_c = 0, h = 0, w = 0;
    std::size_t out_c = 0, fh = 0, fw = 0;
    std::size_t pad_h0 = 0, pad_w0 = 0;
    std::size_t out_h = 0, out_w = 0;

    static ConvGeom resolve(const Shape& x, const Shape& weights, Pad pad_h, Pad pad_w) {
        if (x.size() != 3) throw ShapeError("conv2d: input must be [CxHxW], got " + shape_str(x));
        if (weights.size() != 4) {
            throw ShapeError("conv2d: weights must be [outCxinCxfHxfW], got " + shape_str(weights));
        }
        ConvGeom g;
        g.in_c = x[0];
        g.h = x[1];
        g.w = x[2];
        g.out_c = weights[0];
        g.fh = weights[2];
        g.fw = weights[3];
        if (weights[1] != g.in_c) {
            throw ShapeError("conv2d: weight inC " + std::to_string(weights[1]) +
                             " does not match input channels " + std::to_string(g.in_c));
        }
        if (pad_h == Pad::Valid) {
            if (g.fh > g.h) {
                throw ShapeError("conv2d: filter height " + std::to_string(g.fh) +
                                 " exceeds input height " + std::to_string(g.h));
            }
            g.out_h = g.h - g.fh + 1;
        } else {
            g.pad_h0 = (g.fh - 1) / 2;
            g.out_h = g.h;
        }
        if (pad_w == Pad::Valid) {
            if (g.fw > g.w) {
                throw ShapeError("conv2d: filter width " + std::to_string(g.fw) +
                                 " exceeds input width " + std::to_string(g.w));
            }
            g.out_w = g.w - g.fw + 1;
        } else {
            g.pad_w0 = (g.fw - 1) / 2;
            g.out_w = g.w;
        }
        return g;
    }

    std::size_t patch() const { return in_c * fh * fw; }
    std::size_t cols() const { return out_h * out_w; }
};

namespace detail {

// Unrolls conv patches into a [inC*fH*fW x outH*outW] matrix (zero padding
// outside the input).
template <typename S>
void im2col(const Tensor<S>& x, const ConvGeom& g, Tensor<S>& col) {
    const std::size_t hw = g.h * g.w;
    S* out = col.data();
    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
        const S* plane = x.data() + ic * hw;
        for (std::size_t kh = 0; kh < g.fh; ++kh) {
            for (std::size_t kw = 0; kw < g.fw; ++kw) {
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) -
                                              static_cast<std::ptrdiff_t>(g.pad_h0);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
                        for (std::size_t ow = 0; ow < g.out_w; ++ow) *out++ = S{0};
                        continue;
                    }
                    const S* row = plane + static_cast<std::size_t>(ih) * g.w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) -
                                                  static_cast<std::ptrdiff_t>(g.pad_w0);
                        *out++ = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w))
                                     ? S{0}
                                     : row[static_cast<std::size_t>(iw)];
                    }
                }
            }
        }
    }
}

// Scatter-adds a column matrix back onto the input layout; adjoint of im2col.
template <typename S>
void col2im_add(const Tensor<S>& col, const ConvGeom& g, Tensor<S>& gx) {
    const std::size_t hw = g.h * g.w;
    const S* in = col.data();
    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
        S* plane = gx.data() + ic * hw;
        for (std::size_t kh = 0; kh < g.fh; ++kh) {
            for (std::size_t kw = 0; kw < g.fw; ++kw) {
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) -
                                              static_cast<std::ptrdiff_t>(g.pad_h0);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
                        in += g.out_w;
                        continue;
                    }
                    S* row = plane + static_cast<std::size_t>(ih) * g.w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + kw) -
                                                  static_cast<std::ptrdiff_t>(g.pad_w0);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.w)) {
                            row[static_cast<std::size_t>(iw)] += *in;
                        }
                        ++in;
                    }
                }
            }
        }
    }
}

// out[outC x outH x outW] = weights * col + bias. col is filled as a side
// effect so backward can reuse it.
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& x, const Tensor<S>& weights, const Tensor<S>& bias,
                         const ConvGeom& g, Tensor<S>& col) {
    if (bias.size() != g.out_c) {
        throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                         " does not match filter count " + std::to_string(g.out_c));
    }
    col = Tensor<S>({g.patch(), g.cols()});
    im2col(x, g, col);
    Tensor<S> out({g.out_c, g.out_h, g.out_w});
    as_matrix(out, g.out_c, g.cols()).noalias() =
        as_matrix(weights, g.out_c, g.patch()) * as_matrix(col, g.patch(), g.cols());
    S* o = out.data();
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        const S b = bias[oc];
        for (std::size_t i = 0; i < g.cols(); ++i) *o++ += b;
    }
    return out;
}

}  // namespace detail

// Reverse-mode tape over tensor operations. Nodes are appended in forward
// order; backward() walks them in reverse and accumulates gradients for
// every node that feeds the loss. One tape records exactly one forward
// pass; dropout masks are stored on their node and replayed, never
// resampled.
template <typename S>
class Tape {
  public:
    using NodeId = int;

    void reset() {
        nodes_.clear();
        grads_.clear();
        ran_backward_ = false;
    }

    std::size_t node_count() const { return nodes_.size(); }

    NodeId leaf(Tensor<S> value) { return push(Op::Leaf, std::move(value)); }

    // Borrowing leaf for large parameter tensors: the caller keeps the
    // tensor alive and unchanged for the lifetime of the tape.
    NodeId leaf_ref(const Tensor<S>& external) {
        NodeId id = push(Op::Leaf, Tensor<S>());
        nodes_[static_cast<std::size_t>(id)].ext = &external;
        return id;
    }

    NodeId add(NodeId a, NodeId b) {
        check_same_shape(value(a), value(b), "add");
        Tensor<S> out = modrec::add(value(a), value(b));
        NodeId id = push(Op::Add, std::move(out));
        nodes_[id].a = a;
        nodes_[id].b = b;
        return id;
    }

    NodeId mul(NodeId a, NodeId b) {
        check_same_shape(value(a), value(b), "mul");
        Tensor<S> out = modrec::mul(value(a), value(b));
        NodeId id = push(Op::Mul, std::move(out));
        nodes_[id].a = a;
        nodes_[id].b = b;
        return id;
    }

    NodeId scale(NodeId a, S k) {
        NodeId id = push(Op::Scale, modrec::scale(value(a), k));
        nodes_[id].a = a;
        nodes_[id].k = k;
        return id;
    }

    NodeId matmul(NodeId a, NodeId b) {
        NodeId id = push(Op::MatMul, modrec::matmul(value(a), value(b)));
        nodes_[id].a = a;
        nodes_[id].b = b;
        return id;
    }

    // y = A x, A [m x n], x [n].
    NodeId matvec(NodeId a, NodeId x) {
        const Tensor<S>& av = value(a);
        const Tensor<S>& xv = value(x);
        if (av.rank() != 2 || xv.rank() != 1 || av.extent(1) != xv.extent(0)) {
            throw ShapeError("matvec: " + shape_str(av.shape()) + " * " + shape_str(xv.shape()));
        }
        const std::size_t m = av.extent(0), n = av.extent(1);
        Tensor<S> out({m});
        as_matrix(out, m, 1).noalias() = as_matrix(av, m, n) * as_matrix(xv, n, 1);
        NodeId id = push(Op::MatVec, std::move(out));
        nodes_[id].a = a;
        nodes_[id].b = x;
        return id;
    }

    // y = x^T A, x [n], A [n x m]; the dense-layer core.
    NodeId vecmat(NodeId x, NodeId a) {
        const Tensor<S>& xv = value(x);
        const Tensor<S>& av = value(a);
        if (xv.rank() != 1 || av.rank() != 2 || xv.extent(0) != av.extent(0)) {
            throw ShapeError("vecmat: " + shape_str(xv.shape()) + " * " + shape_str(av.shape()));
        }
        const std::size_t n = av.extent(0), m = av.extent(1);
        Tensor<S> out({m});
        as_matrix(out, 1, m).noalias() = as_matrix(xv, 1, n) * as_matrix(av, n, m);
        NodeId id = push(Op::VecMat, std::move(out));
        nodes_[id].a = x;
        nodes_[id].b = a;
        return id;
    }

    NodeId conv2d(NodeId x, NodeId weights, NodeId bias, Pad pad_h, Pad pad_w) {
        ConvGeom g = ConvGeom::resolve(value(x).shape(), value(weights).shape(), pad_h, pad_w);
        Tensor<S> col;
        Tensor<S> out = detail::conv2d_forward(value(x), value(weights), value(bias), g, col);
        NodeId id = push(Op::Conv2d, std::move(out));
        nodes_[id].a = x;
        nodes_[id].b = weights;
        nodes_[id].c = bias;
        nodes_[id].aux = std::move(col);
        nodes_[id].geom = g;
        return id;
    }

    NodeId relu(NodeId x) {
        Tensor<S> out = value(x);
        for (auto& v : out.values()) v = v > S{0} ? v : S{0};
        NodeId id = push(Op::Relu, std::move(out));
        nodes_[id].a = x;
        return id;
    }

    NodeId sigmoid(NodeId x) {
        Tensor<S> out = value(x);
        for (auto& v : out.values()) v = S{1} / (S{1} + std::exp(-v));
        NodeId id = push(Op::Sigmoid, std::move(out));
        nodes_[id].a = x;
        return id;
    }

    NodeId tanh(NodeId x) {
        Tensor<S> out = value(x);
        for (auto& v : out.values()) v = std::tanh(v);
        NodeId id = push(Op::Tanh, std::move(out));
        nodes_[id].a = x;
        return id;
    }

    // Max-subtracted softmax over a rank-1 tensor.
    NodeId softmax(NodeId x) {
        const Tensor<S>& xv = value(x);
        if (xv.rank() != 1) throw ShapeError("softmax: expects a vector, got " + shape_str(xv.shape()));
        Tensor<S> out = xv;
        S mx = out[0];
        for (S v : out.values()) mx = std::max(mx, v);
        S total{0};
        for (auto& v : out.values()) {
            v = std::exp(v - mx);
            total += v;
        }
        for (auto& v : out.values()) v /= total;
        NodeId id = push(Op::Softmax, std::move(out));
        nodes_[id].a = x;
        return id;
    }

    // -ln(max(probs[label], 1e-12)); the clamp keeps the loss finite when a
    // probability underflows. In the clamped region the exact derivative is
    // zero, and backward() honors that.
    NodeId cross_entropy(NodeId probs, int label) {
        const Tensor<S>& p = value(probs);
        if (p.rank() != 1) {
            throw ShapeError("cross_entropy: expects a vector, got " + shape_str(p.shape()));
        }
        if (label < 0 || static_cast<std::size_t>(label) >= p.extent(0)) {
            throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                             std::to_string(p.extent(0)) + " classes");
        }
        const double clamped = std::max(static_cast<double>(p[static_cast<std::size_t>(label)]),
                                        kProbClamp);
        NodeId id = push(Op::CrossEntropy, Tensor<S>::scalar(static_cast<S>(-std::log(clamped))));
        nodes_[id].a = probs;
        nodes_[id].label = label;
        return id;
    }

    // Inverted dropout, train mode: zero with probability rate, scale
    // survivors by 1/(1-rate). The mask lives on the node.
    NodeId dropout(NodeId x, double rate, Rng& rng) {
        if (!(rate >= 0.0 && rate < 1.0)) {
            throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0,1)");
        }
        const Tensor<S>& xv = value(x);
        Tensor<S> mask(xv.shape());
        const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
        for (auto& m : mask.values()) m = rng.uniform() < rate ? S{0} : keep_scale;
        Tensor<S> out = modrec::mul(xv, mask);
        NodeId id = push(Op::Dropout, std::move(out));
        nodes_[id].a = x;
        nodes_[id].aux = std::move(mask);
        return id;
    }

    NodeId concat_ch(std::vector<NodeId> parts) {
        std::vector<Tensor<S>> vals;
        vals.reserve(parts.size());
        for (NodeId p : parts) vals.push_back(value(p));
        Tensor<S> out = modrec::concat_channels(std::span<const Tensor<S>>(vals));
        NodeId id = push(Op::ConcatCh, std::move(out));
        nodes_[id].many = std::move(parts);
        return id;
    }

    // [C x H x W] -> [W x C*H] time-major sequence; feature f = c*H + h.
    NodeId to_sequence(NodeId x) {
        const Tensor<S>& xv = value(x);
        if (xv.rank() != 3) {
            throw ShapeError("to_sequence: expects [CxHxW], got " + shape_str(xv.shape()));
        }
        const std::size_t c = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
        Tensor<S> out({w, c * h});
        for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ih = 0; ih < h; ++ih)
                for (std::size_t iw = 0; iw < w; ++iw) out.at(iw, ic * h + ih) = xv.at(ic, ih, iw);
        NodeId id = push(Op::ToSequence, std::move(out));
        nodes_[id].a = x;
        return id;
    }

    // Row t of a [T x F] matrix.
    NodeId row(NodeId x, std::size_t t) {
        const Tensor<S>& xv = value(x);
        if (xv.rank() != 2 || t >= xv.extent(0)) {
            throw ShapeError("row: index " + std::to_string(t) + " in " + shape_str(xv.shape()));
        }
        const std::size_t f = xv.extent(1);
        Tensor<S> out({f});
        std::copy(xv.data() + t * f, xv.data() + (t + 1) * f, out.data());
        NodeId id = push(Op::Row, std::move(out));
        nodes_[id].a = x;
        nodes_[id].off = t * f;
        return id;
    }

    // Contiguous slice [off, off+len) of a vector.
    NodeId segment(NodeId x, std::size_t off, std::size_t len) {
        const Tensor<S>& xv = value(x);
        if (xv.rank() != 1 || off + len > xv.extent(0)) {
            throw ShapeError("segment: [" + std::to_string(off) + "," + std::to_string(off + len) +
                             ") of " + shape_str(xv.shape()));
        }
        Tensor<S> out({len});
        std::copy(xv.data() + off, xv.data() + off + len, out.data());
        NodeId id = push(Op::Segment, std::move(out));
        nodes_[id].a = x;
        nodes_[id].off = off;
        return id;
    }

    NodeId sum(NodeId x) {
        NodeId id = push(Op::Sum, Tensor<S>::scalar(modrec::sum(value(x))));
        nodes_[id].a = x;
        return id;
    }

    NodeId flatten(NodeId x) {
        NodeId id = push(Op::Flatten, value(x).reshaped({value(x).size()}));
        nodes_[id].a = x;
        return id;
    }

    const Tensor<S>& value(NodeId id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.ext ? *n.ext : n.value;
    }

    // Reverse sweep from a scalar loss node. Gradients of nodes that do not
    // feed the loss are left at zero.
    void backward(NodeId loss) {
        if (value(loss).size() != 1) {
            throw ContractError("backward: loss must be scalar, got " +
                                shape_str(value(loss).shape()));
        }
        grads_.assign(nodes_.size(), Tensor<S>());
        std::vector<char> needed(nodes_.size(), 0);
        mark_needed(loss, needed);
        grad_ref(loss) = Tensor<S>::scalar(S{1});
        for (NodeId id = loss; id >= 0; --id) {
            if (!needed[static_cast<std::size_t>(id)]) continue;
            if (grads_[static_cast<std::size_t>(id)].size() == 0) continue;
            propagate(id);
        }
        ran_backward_ = true;
    }

    const Tensor<S>& grad(NodeId id) {
        if (!ran_backward_) throw ContractError("grad: backward() has not run on this tape");
        Tensor<S>& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0) g = Tensor<S>::zeros(value(id).shape());
        return g;
    }

  private:
    enum class Op {
        Leaf,
        Add,
        Mul,
        Scale,
        MatMul,
        MatVec,
        VecMat,
        Conv2d,
        Relu,
        Sigmoid,
        Tanh,
        Softmax,
        CrossEntropy,
        Dropout,
        ConcatCh,
        ToSequence,
        Row,
        Segment,
        Sum,
        Flatten,
    };

    struct Node {
        Op op;
        Tensor<S> value;
        const Tensor<S>* ext = nullptr;  // borrowed leaf storage
        NodeId a = -1, b = -1, c = -1;
        std::vector<NodeId> many;
        Tensor<S> aux;
        int label = -1;
        std::size_t off = 0;
        S k{};
        ConvGeom geom;
    };

    static constexpr double kProbClamp = 1e-12;

    NodeId push(Op op, Tensor<S> value) {
        nodes_.push_back(Node{op, std::move(value)});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Tensor<S>& grad_ref(NodeId id) {
        Tensor<S>& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0) g = Tensor<S>::zeros(value(id).shape());
        return g;
    }

    void accumulate(NodeId id, const Tensor<S>& delta) {
        Tensor<S>& g = grad_ref(id);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
    }

    void mark_needed(NodeId loss, std::vector<char>& needed) const {
        std::vector<NodeId> stack{loss};
        while (!stack.empty()) {
            NodeId id = stack.back();
            stack.pop_back();
            auto& flag = needed[static_cast<std::size_t>(id)];
            if (flag) continue;
            flag = 1;
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            for (NodeId p : {n.a, n.b, n.c})
                if (p >= 0) stack.push_back(p);
            for (NodeId p : n.many) stack.push_back(p);
        }
    }

    void propagate(NodeId id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        const Tensor<S>& g = grads_[static_cast<std::size_t>(id)];
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case Op::Mul:
                accumulate(n.a, modrec::mul(g, value(n.b)));
                accumulate(n.b, modrec::mul(g, value(n.a)));
                break;
            case Op::Scale:
                accumulate(n.a, modrec::scale(g, n.k));
                break;
            case Op::MatMul: {
                const Tensor<S>& a = value(n.a);
                const Tensor<S>& b = value(n.b);
                const std::size_t m = a.extent(0), k = a.extent(1), c = b.extent(1);
                Tensor<S>& ga = grad_ref(n.a);
                Tensor<S>& gb = grad_ref(n.b);
                as_matrix(ga, m, k).noalias() +=
                    as_matrix(g, m, c) * as_matrix(b, k, c).transpose();
                as_matrix(gb, k, c).noalias() +=
                    as_matrix(a, m, k).transpose() * as_matrix(g, m, c);
                break;
            }
            case Op::MatVec: {
                const Tensor<S>& a = value(n.a);
                const Tensor<S>& x = value(n.b);
                const std::size_t m = a.extent(0), k = a.extent(1);
                Tensor<S>& ga = grad_ref(n.a);
                Tensor<S>& gx = grad_ref(n.b);
                as_matrix(ga, m, k).noalias() += as_matrix(g, m, 1) * as_matrix(x, 1, k);
                as_matrix(gx, k, 1).noalias() +=
                    as_matrix(a, m, k).transpose() * as_matrix(g, m, 1);
                break;
            }
            case Op::VecMat: {
                const Tensor<S>& x = value(n.a);
                const Tensor<S>& a = value(n.b);
                const std::size_t k = a.extent(0), m = a.extent(1);
                Tensor<S>& gx = grad_ref(n.a);
                Tensor<S>& ga = grad_ref(n.b);
                as_matrix(gx, k, 1).noalias() += as_matrix(a, k, m) * as_matrix(g, m, 1);
                as_matrix(ga, k, m).noalias() += as_matrix(x, k, 1) * as_matrix(g, 1, m);
                break;
            }
            case Op::Conv2d: {
                const ConvGeom& geo = n.geom;
                const Tensor<S>& weights = value(n.b);
                Tensor<S>& gw = grad_ref(n.b);
                Tensor<S>& gb = grad_ref(n.c);
                const auto gy = as_matrix(g, geo.out_c, geo.cols());
                as_matrix(gw, geo.out_c, geo.patch()).noalias() +=
                    gy * as_matrix(n.aux, geo.patch(), geo.cols()).transpose();
                for (std::size_t oc = 0; oc < geo.out_c; ++oc) gb[oc] += gy.row(static_cast<Eigen::Index>(oc)).sum();
                Tensor<S> gcol({geo.patch(), geo.cols()});
                as_matrix(gcol, geo.patch(), geo.cols()).noalias() =
                    as_matrix(weights, geo.out_c, geo.patch()).transpose() * gy;
                detail::col2im_add(gcol, geo, grad_ref(n.a));
                break;
            }
            case Op::Relu: {
                const Tensor<S>& x = value(n.a);
                Tensor<S>& gx = grad_ref(n.a);
                for (std::size_t i = 0; i < gx.size(); ++i)
                    if (x[i] > S{0}) gx[i] += g[i];
                break;
            }
            case Op::Sigmoid: {
                const Tensor<S>& y = n.value;
                Tensor<S>& gx = grad_ref(n.a);
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i] * (S{1} - y[i]);
                break;
            }
            case Op::Tanh: {
                const Tensor<S>& y = n.value;
                Tensor<S>& gx = grad_ref(n.a);
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (S{1} - y[i] * y[i]);
                break;
            }
            case Op::Softmax: {
                const Tensor<S>& y = n.value;
                Tensor<S>& gx = grad_ref(n.a);
                S dot{0};
                for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
                for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - dot);
                break;
            }
            case Op::CrossEntropy: {
                const Tensor<S>& p = value(n.a);
                const auto li = static_cast<std::size_t>(n.label);
                if (static_cast<double>(p[li]) >= kProbClamp) {
                    grad_ref(n.a)[li] += -g[0] / p[li];
                }
                break;
            }
            case Op::Dropout:
                accumulate(n.a, modrec::mul(g, n.aux));
                break;
            case Op::ConcatCh: {
                std::size_t offset = 0;
                for (NodeId part : n.many) {
                    Tensor<S>& gp = grad_ref(part);
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
                    offset += gp.size();
                }
                break;
            }
            case Op::ToSequence: {
                const Tensor<S>& x = value(n.a);
                Tensor<S>& gx = grad_ref(n.a);
                const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
                for (std::size_t ic = 0; ic < c; ++ic)
                    for (std::size_t ih = 0; ih < h; ++ih)
                        for (std::size_t iw = 0; iw < w; ++iw)
                            gx.at(ic, ih, iw) += g.at(iw, ic * h + ih);
                break;
            }
            case Op::Row:
            case Op::Segment: {
                Tensor<S>& gx = grad_ref(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) gx[n.off + i] += g[i];
                break;
            }
            case Op::Sum: {
                Tensor<S>& gx = grad_ref(n.a);
                for (auto& v : gx.values()) v += g[0];
                break;
            }
            case Op::Flatten: {
                Tensor<S>& gx = grad_ref(n.a);
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<Tensor<S>> grads_;
    bool ran_backward_ = false;
};

}  // namespace modrec
