#include "aidp/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>

namespace aidp::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

double stable_sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        double e = std::exp(z);
        p = e / (1.0 + e);
    }
    // Keep the output strictly inside (0,1) even at saturation.
    if (p >= 1.0) p = std::nextafter(1.0, 0.0);
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    return p;
}

// Scatter one sample's input window matrix [Cin*kh*kw, Ho*Wo] out of x.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w,
            std::size_t kh, std::size_t kw, int stride, int pad, std::size_t ho,
            std::size_t wo, double* out) {
    const std::size_t hw = h * w;
    const std::size_t howo = ho * wo;
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
                double* dst = out + row * howo;
                for (std::size_t oi = 0; oi < ho; ++oi) {
                    long ii = static_cast<long>(oi) * stride - pad + static_cast<long>(ki);
                    const bool ok_i = ii >= 0 && ii < static_cast<long>(h);
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        long jj = static_cast<long>(oj) * stride - pad + static_cast<long>(kj);
                        *dst++ = (ok_i && jj >= 0 && jj < static_cast<long>(w))
                                     ? x[ci * hw + ii * w + jj]
                                     : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, std::size_t cin, std::size_t h, std::size_t w,
                std::size_t kh, std::size_t kw, int stride, int pad, std::size_t ho,
                std::size_t wo, double* dx) {
    const std::size_t hw = h * w;
    const std::size_t howo = ho * wo;
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj, ++row) {
                const double* src = cols + row * howo;
                for (std::size_t oi = 0; oi < ho; ++oi) {
                    long ii = static_cast<long>(oi) * stride - pad + static_cast<long>(ki);
                    if (ii < 0 || ii >= static_cast<long>(h)) {
                        src += wo;
                        continue;
                    }
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        long jj = static_cast<long>(oj) * stride - pad + static_cast<long>(kj);
                        if (jj >= 0 && jj < static_cast<long>(w))
                            dx[ci * hw + ii * w + jj] += src[oj];
                    }
                    src += wo;
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 4) throw ShapeError("conv2d: input must be rank 4, got " + shape_str(xv.shape()));
    if (wv.rank() != 4) throw ShapeError("conv2d: weight must be rank 4, got " + shape_str(wv.shape()));
    if (stride < 1) throw DomainError("conv2d: stride must be >= 1");
    if (pad < 0) throw DomainError("conv2d: pad must be >= 0");
    const std::size_t n = xv.extent(0), cin = xv.extent(1), h = xv.extent(2), wdt = xv.extent(3);
    const std::size_t cout = wv.extent(0), kh = wv.extent(2), kw = wv.extent(3);
    if (wv.extent(1) != cin)
        throw ShapeError("conv2d: weight expects " + std::to_string(wv.extent(1)) +
                         " input channels, input has " + std::to_string(cin));
    if (bv.rank() != 1 || bv.extent(0) != cout)
        throw ShapeError("conv2d: bias must be [" + std::to_string(cout) + "]");
    if (h + 2 * pad < kh || wdt + 2 * pad < kw)
        throw ShapeError("conv2d: kernel larger than padded input");
    const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    const std::size_t wo = (wdt + 2 * pad - kw) / stride + 1;
    const std::size_t ckk = cin * kh * kw;
    const std::size_t howo = ho * wo;

    auto cols = std::make_shared<std::vector<double>>(n * ckk * howo);
    Tensor out = Tensor::uninit({n, cout, ho, wo});
    CMapMat wm(wv.data(), cout, ckk);
    Eigen::Map<const Eigen::VectorXd> bvec(bv.data(), cout);
    for (std::size_t i = 0; i < n; ++i) {
        double* kslab = cols->data() + i * ckk * howo;
        im2col(xv.data() + i * cin * h * wdt, cin, h, wdt, kh, kw, stride, pad, ho, wo, kslab);
        MapMat on(out.data() + i * cout * howo, cout, howo);
        on.noalias() = wm * CMapMat(kslab, ckk, howo);
        on.colwise() += bvec;
    }

    auto bwd = [xi = x.index(), wi = w.index(), bi = b.index(), cols, n, cin, h, wdt, kh,
                kw, stride, pad, ho, wo, ckk, howo, cout](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        auto& wn = tp.node(wi);
        auto& bn = tp.node(bi);
        CMapMat wm(wn.out.data(), cout, ckk);
        for (std::size_t i = 0; i < n; ++i) {
            CMapMat gn(node.grad.data() + i * cout * howo, cout, howo);
            const double* kslab = cols->data() + i * ckk * howo;
            if (wn.requires_grad) {
                MapMat dw(wn.grad.data(), cout, ckk);
                dw.noalias() += gn * CMapMat(kslab, ckk, howo).transpose();
            }
            if (bn.requires_grad) {
                Eigen::Map<Eigen::VectorXd> db(bn.grad.data(), cout);
                db.noalias() += gn.rowwise().sum();
            }
            if (xn.requires_grad) {
                RowMat dcols = wm.transpose() * gn;  // [ckk, howo]
                col2im_add(dcols.data(), cin, h, wdt, kh, kw, stride, pad, ho, wo,
                           xn.grad.data() + i * cin * h * wdt);
            }
        }
    };
    return t.make_node("conv2d", {x, w, b}, std::move(out), std::move(bwd));
}

Var affine(Var x, Var w, Var b) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 2)
        throw ShapeError("affine: expects rank-2 input and weight");
    const std::size_t n = xv.extent(0), in = xv.extent(1);
    const std::size_t out_w = wv.extent(1);
    if (wv.extent(0) != in)
        throw ShapeError("affine: weight rows " + std::to_string(wv.extent(0)) +
                         " != input features " + std::to_string(in));
    if (bv.rank() != 1 || bv.extent(0) != out_w)
        throw ShapeError("affine: bias must be [" + std::to_string(out_w) + "]");

    Tensor out = Tensor::uninit({n, out_w});
    {
        CMapMat xm(xv.data(), n, in);
        CMapMat wm(wv.data(), in, out_w);
        MapMat om(out.data(), n, out_w);
        om.noalias() = xm * wm;
        om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), out_w);
    }
    auto bwd = [xi = x.index(), wi = w.index(), bi = b.index(), n, in,
                out_w](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        auto& wn = tp.node(wi);
        auto& bn = tp.node(bi);
        CMapMat g(node.grad.data(), n, out_w);
        if (xn.requires_grad) {
            CMapMat wm(wn.out.data(), in, out_w);
            MapMat(xn.grad.data(), n, in).noalias() += g * wm.transpose();
        }
        if (wn.requires_grad) {
            CMapMat xm(xn.out.data(), n, in);
            MapMat(wn.grad.data(), in, out_w).noalias() += xm.transpose() * g;
        }
        if (bn.requires_grad)
            Eigen::Map<Eigen::RowVectorXd>(bn.grad.data(), out_w).noalias() +=
                g.colwise().sum();
    };
    return t.make_node("affine", {x, w, b}, std::move(out), std::move(bwd));
}

Var relu(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out = Tensor::uninit(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    auto bwd = [xi = x.index()](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if (xn.out[i] > 0.0) xn.grad[i] += node.grad[i];
    };
    return t.make_node("relu", {x}, std::move(out), std::move(bwd));
}

Var sigmoid(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out = Tensor::uninit(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = stable_sigmoid(xv[i]);
    auto bwd = [xi = x.index()](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double p = node.out[i];
            xn.grad[i] += node.grad[i] * p * (1.0 - p);
        }
    };
    return t.make_node("sigmoid", {x}, std::move(out), std::move(bwd));
}

Var clamp(Var x, double lo, double hi) {
    if (lo > hi) throw DomainError("clamp: lo > hi");
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out = Tensor::uninit(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i)
        out[i] = xv[i] < lo ? lo : (xv[i] > hi ? hi : xv[i]);
    auto bwd = [xi = x.index(), lo, hi](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if (xn.out[i] > lo && xn.out[i] < hi) xn.grad[i] += node.grad[i];
    };
    return t.make_node("clamp", {x}, std::move(out), std::move(bwd));
}

namespace {

Var binary_elementwise(const char* name, Var a, Var b, double (*f)(double, double),
                       void (*df)(Tape::Node&, Tape::Node&, Tape::Node&)) {
    Tape& t = *a.tape();
    require_same_shape(a.value(), b.value(), name);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = Tensor::uninit(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
    auto bwd = [ai = a.index(), bi = b.index(), df](Tape& tp, Tape::Node& node) {
        df(node, tp.node(ai), tp.node(bi));
    };
    return t.make_node(name, {a, b}, std::move(out), std::move(bwd));
}

}  // namespace

Var add(Var a, Var b) {
    return binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](Tape::Node& n, Tape::Node& an, Tape::Node& bn) {
            if (an.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) an.grad[i] += n.grad[i];
            if (bn.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) bn.grad[i] += n.grad[i];
        });
}

Var sub(Var a, Var b) {
    return binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](Tape::Node& n, Tape::Node& an, Tape::Node& bn) {
            if (an.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) an.grad[i] += n.grad[i];
            if (bn.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) bn.grad[i] -= n.grad[i];
        });
}

Var mul(Var a, Var b) {
    return binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](Tape::Node& n, Tape::Node& an, Tape::Node& bn) {
            if (an.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    an.grad[i] += n.grad[i] * bn.out[i];
            if (bn.requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    bn.grad[i] += n.grad[i] * an.out[i];
        });
}

Var scale(Var x, double k) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out = Tensor::uninit(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = k * xv[i];
    auto bwd = [xi = x.index(), k](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < node.grad.size(); ++i) xn.grad[i] += k * node.grad[i];
    };
    return t.make_node("scale", {x}, std::move(out), std::move(bwd));
}

Var global_average_pool(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    if (xv.rank() != 4)
        throw ShapeError("global_average_pool: input must be rank 4, got " +
                         shape_str(xv.shape()));
    const std::size_t n = xv.extent(0), c = xv.extent(1), hw = xv.extent(2) * xv.extent(3);
    if (hw == 0) throw ShapeError("global_average_pool: empty spatial extent");
    Tensor out = Tensor::uninit({n, c});
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* p = xv.data() + i * hw;
        double s = 0.0;
        for (std::size_t k = 0; k < hw; ++k) s += p[k];
        out[i] = s * inv;
    }
    auto bwd = [xi = x.index(), hw, inv](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < node.grad.size(); ++i) {
            double g = node.grad[i] * inv;
            double* dst = xn.grad.data() + i * hw;
            for (std::size_t k = 0; k < hw; ++k) dst[k] += g;
        }
    };
    return t.make_node("gap", {x}, std::move(out), std::move(bwd));
}

Var concat(Var a, Var b) {
    Tape& t = *a.tape();
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.extent(0) != bv.extent(0))
        throw ShapeError("concat: expects rank-2 operands with equal batch size");
    const std::size_t n = av.extent(0), f1 = av.extent(1), f2 = bv.extent(1);
    Tensor out = Tensor::uninit({n, f1 + f2});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(av.data() + i * f1, av.data() + (i + 1) * f1, out.data() + i * (f1 + f2));
        std::copy(bv.data() + i * f2, bv.data() + (i + 1) * f2,
                  out.data() + i * (f1 + f2) + f1);
    }
    auto bwd = [ai = a.index(), bi = b.index(), n, f1, f2](Tape& tp, Tape::Node& node) {
        auto& an = tp.node(ai);
        auto& bn = tp.node(bi);
        for (std::size_t i = 0; i < n; ++i) {
            const double* g = node.grad.data() + i * (f1 + f2);
            if (an.requires_grad)
                for (std::size_t k = 0; k < f1; ++k) an.grad[i * f1 + k] += g[k];
            if (bn.requires_grad)
                for (std::size_t k = 0; k < f2; ++k) bn.grad[i * f2 + k] += g[f1 + k];
        }
    };
    return t.make_node("concat", {a, b}, std::move(out), std::move(bwd));
}

Var per_example_sum(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    if (xv.rank() < 1) throw ShapeError("per_example_sum: input must have a batch axis");
    const std::size_t n = xv.extent(0);
    const std::size_t stride = n ? xv.size() / n : 0;
    Tensor out = Tensor::uninit({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = xv.data() + i * stride;
        double s = 0.0;
        for (std::size_t k = 0; k < stride; ++k) s += p[k];
        out[i] = s;
    }
    auto bwd = [xi = x.index(), n, stride](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) {
            double g = node.grad[i];
            double* dst = xn.grad.data() + i * stride;
            for (std::size_t k = 0; k < stride; ++k) dst[k] += g;
        }
    };
    return t.make_node("per_example_sum", {x}, std::move(out), std::move(bwd));
}

Var sum(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
    auto bwd = [xi = x.index()](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < xn.grad.size(); ++i) xn.grad[i] += node.grad[0];
    };
    return t.make_node("sum", {x}, Tensor::scalar(s), std::move(bwd));
}

Var mean(Var x) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    if (xv.size() == 0) throw ShapeError("mean: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
    const double inv = 1.0 / static_cast<double>(xv.size());
    auto bwd = [xi = x.index(), inv](Tape& tp, Tape::Node& node) {
        auto& xn = tp.node(xi);
        if (!xn.requires_grad) return;
        for (std::size_t i = 0; i < xn.grad.size(); ++i) xn.grad[i] += node.grad[0] * inv;
    };
    return t.make_node("mean", {x}, Tensor::scalar(s * inv), std::move(bwd));
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    Tape& t = *logits.tape();
    const Tensor& zv = logits.value();
    if (zv.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [N,K]");
    const std::size_t n = zv.extent(0), k = zv.extent(1);
    if (labels.size() != n)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw DomainError("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside [0," + std::to_string(k) + ")");
    auto probs = std::make_shared<std::vector<double>>(n * k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = zv.data() + i * k;
        double m = z[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j]);
        double se = 0.0;
        for (std::size_t j = 0; j < k; ++j) se += std::exp(z[j] - m);
        double lse = m + std::log(se);
        loss += lse - z[labels[i]];
        for (std::size_t j = 0; j < k; ++j)
            (*probs)[i * k + j] = std::exp(z[j] - lse);
    }
    loss /= static_cast<double>(n);
    auto bwd = [zi = logits.index(), labels, probs, n, k](Tape& tp, Tape::Node& node) {
        auto& zn = tp.node(zi);
        if (!zn.requires_grad) return;
        const double g = node.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                zn.grad[i * k + j] +=
                    g * ((*probs)[i * k + j] -
                         (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0));
    };
    return t.make_node("softmax_ce", {logits}, Tensor::scalar(loss), std::move(bwd));
}

Var bce_with_logits(Var logit, Var target) {
    Tape& t = *logit.tape();
    const Tensor& zv = logit.value();
    const Tensor& tv = target.value();
    require_same_shape(zv, tv, "bce_with_logits");
    const std::size_t n = zv.size();
    if (n == 0) throw ShapeError("bce_with_logits: empty batch");
    for (std::size_t i = 0; i < n; ++i)
        if (tv[i] < 0.0 || tv[i] > 1.0)
            throw DomainError("bce_with_logits: target outside [0,1]");
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = zv[i];
        // max(z,0) - z*t + log(1 + exp(-|z|)): never overflows, never NaN.
        loss += std::max(z, 0.0) - z * tv[i] + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= static_cast<double>(n);
    auto bwd = [zi = logit.index(), ti = target.index(), n](Tape& tp, Tape::Node& node) {
        auto& zn = tp.node(zi);
        auto& tn = tp.node(ti);
        const double g = node.grad[0] / static_cast<double>(n);
        if (zn.requires_grad)
            for (std::size_t i = 0; i < n; ++i)
                zn.grad[i] += g * (stable_sigmoid(zn.out[i]) - tn.out[i]);
        if (tn.requires_grad)
            for (std::size_t i = 0; i < n; ++i) tn.grad[i] += g * (-zn.out[i]);
    };
    return t.make_node("bce", {logit, target}, Tensor::scalar(loss), std::move(bwd));
}

}  // namespace aidp::ops
