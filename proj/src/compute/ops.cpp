#include "fuzzformer/compute/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fuzzformer/error.hpp"

namespace fuzzformer::compute {

namespace {

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t extent = 1;
    std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

void require_axis(const char* op, const Tensor& a, std::size_t axis) {
    if (axis >= a->rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         to_string(a->shape()));
    }
}

// Number of times `b` repeats to cover `a`; throws unless b's shape is a suffix of a's.
std::size_t broadcast_repeats(const char* op, const Tensor& a, const Tensor& b) {
    const auto& sa = a->shape();
    const auto& sb = b->shape();
    bool ok = sb.size() <= sa.size();
    for (std::size_t i = 0; ok && i < sb.size(); ++i) {
        ok = sb[sb.size() - 1 - i] == sa[sa.size() - 1 - i];
    }
    if (!ok) {
        throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(sb) + " onto " +
                         to_string(sa));
    }
    return a->size() / std::max<std::size_t>(b->size(), 1);
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMajor>;
using View = Eigen::Map<RowMajor>;

inline Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    View(c, idx(m), idx(n)).noalias() += ConstView(a, idx(m), idx(k)) * ConstView(b, idx(k), idx(n));
}

// dA[M,K] += dC[M,N] * B[K,N]^T
void gemm_nt(const double* dc, const double* b, double* da, std::size_t m, std::size_t k,
             std::size_t n) {
    View(da, idx(m), idx(k)).noalias() +=
        ConstView(dc, idx(m), idx(n)) * ConstView(b, idx(k), idx(n)).transpose();
}

// dB[K,N] += A[M,K]^T * dC[M,N]
void gemm_tn(const double* a, const double* dc, double* db, std::size_t m, std::size_t k,
             std::size_t n) {
    View(db, idx(k), idx(n)).noalias() +=
        ConstView(a, idx(m), idx(k)).transpose() * ConstView(dc, idx(m), idx(n));
}

template <typename Forward, typename Derivative>
Tensor unary(const char* op, const Tensor& a, Forward f, Derivative df) {
    std::vector<double> out(a->size());
    auto in = a->value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
    TensorNode* pa = a.get();
    return make_node(op, a->shape(), std::move(out), {a}, [pa, df](const TensorNode& self) {
        if (!pa->requires_grad()) return;
        auto x = pa->value();
        auto y = self.value();
        auto g = self.grad();
        auto ga = pa->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t reps = broadcast_repeats("add", a, b);
    const std::size_t nb = b->size();
    std::vector<double> out(a->value().begin(), a->value().end());
    auto bv = b->value();
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < nb; ++i) out[r * nb + i] += bv[i];
    TensorNode* pa = a.get();
    TensorNode* pb = b.get();
    return make_node("add", a->shape(), std::move(out), {a, b}, [pa, pb, reps, nb](const TensorNode& self) {
        auto g = self.grad();
        if (pa->requires_grad()) {
            auto ga = pa->mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (pb->requires_grad()) {
            auto gb = pb->mutable_grad();
            for (std::size_t r = 0; r < reps; ++r)
                for (std::size_t i = 0; i < nb; ++i) gb[i] += g[r * nb + i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const std::size_t reps = broadcast_repeats("sub", a, b);
    const std::size_t nb = b->size();
    std::vector<double> out(a->value().begin(), a->value().end());
    auto bv = b->value();
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < nb; ++i) out[r * nb + i] -= bv[i];
    TensorNode* pa = a.get();
    TensorNode* pb = b.get();
    return make_node("sub", a->shape(), std::move(out), {a, b}, [pa, pb, reps, nb](const TensorNode& self) {
        auto g = self.grad();
        if (pa->requires_grad()) {
            auto ga = pa->mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (pb->requires_grad()) {
            auto gb = pb->mutable_grad();
            for (std::size_t r = 0; r < reps; ++r)
                for (std::size_t i = 0; i < nb; ++i) gb[i] -= g[r * nb + i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const std::size_t reps = broadcast_repeats("mul", a, b);
    const std::size_t nb = b->size();
    std::vector<double> out(a->value().begin(), a->value().end());
    auto bv = b->value();
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < nb; ++i) out[r * nb + i] *= bv[i];
    TensorNode* pa = a.get();
    TensorNode* pb = b.get();
    return make_node("mul", a->shape(), std::move(out), {a, b}, [pa, pb, reps, nb](const TensorNode& self) {
        auto g = self.grad();
        auto av = pa->value();
        auto bv = pb->value();
        if (pa->requires_grad()) {
            auto ga = pa->mutable_grad();
            for (std::size_t r = 0; r < reps; ++r)
                for (std::size_t i = 0; i < nb; ++i) ga[r * nb + i] += g[r * nb + i] * bv[i];
        }
        if (pb->requires_grad()) {
            auto gb = pb->mutable_grad();
            for (std::size_t r = 0; r < reps; ++r)
                for (std::size_t i = 0; i < nb; ++i) gb[i] += g[r * nb + i] * av[r * nb + i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
    return unary("add_scalar", a, [offset](double x) { return x + offset; },
                 [](double, double) { return 1.0; });
}

Tensor negate(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->rank() < 2 || (b->rank() != 2 && b->rank() != 3)) {
        throw ShapeError("matmul: unsupported ranks " + to_string(a->shape()) + " x " +
                         to_string(b->shape()));
    }
    const bool batched = b->rank() == 3;
    const std::size_t k = a->shape().back();
    const std::size_t bk = b->dim(b->rank() - 2);
    const std::size_t n = b->shape().back();
    if (k != bk || (batched && (a->rank() != 3 || a->dim(0) != b->dim(0)))) {
        throw ShapeError("matmul: incompatible shapes " + to_string(a->shape()) + " x " +
                         to_string(b->shape()));
    }
    // Batched: `batches` independent [m,k]x[k,n] products. Shared weight: one
    // product with every leading axis of `a` folded into the row count.
    const std::size_t batches = batched ? a->dim(0) : 1;
    const std::size_t m = batched ? a->dim(1) : a->size() / k;
    Shape out_shape = a->shape();
    out_shape.back() = n;
    std::vector<double> out(batches * m * n, 0.0);
    const double* av = a->value().data();
    const double* bv = b->value().data();
    for (std::size_t t = 0; t < batches; ++t) {
        gemm_nn(av + t * m * k, bv + t * k * n, out.data() + t * m * n, m, k, n);
    }
    TensorNode* pa = a.get();
    TensorNode* pb = b.get();
    return make_node("matmul", std::move(out_shape), std::move(out), {a, b},
                     [pa, pb, batches, m, k, n](const TensorNode& self) {
                         const double* g = self.grad().data();
                         for (std::size_t t = 0; t < batches; ++t) {
                             if (pa->requires_grad()) {
                                 gemm_nt(g + t * m * n, pb->value().data() + t * k * n,
                                         pa->mutable_grad().data() + t * m * k, m, k, n);
                             }
                             if (pb->requires_grad()) {
                                 gemm_tn(pa->value().data() + t * m * k, g + t * m * n,
                                         pb->mutable_grad().data() + t * k * n, m, k, n);
                             }
                         }
                     });
}

Tensor transpose(const Tensor& a) {
    if (a->rank() < 2) throw ShapeError("transpose: rank < 2 for " + to_string(a->shape()));
    const std::size_t rows = a->dim(a->rank() - 2);
    const std::size_t cols = a->shape().back();
    const std::size_t batches = a->size() / (rows * cols);
    Shape out_shape = a->shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    std::vector<double> out(a->size());
    auto av = a->value();
    for (std::size_t t = 0; t < batches; ++t)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                out[t * rows * cols + j * rows + i] = av[t * rows * cols + i * cols + j];
    TensorNode* pa = a.get();
    return make_node("transpose", std::move(out_shape), std::move(out), {a},
                     [pa, batches, rows, cols](const TensorNode& self) {
                         auto g = self.grad();
                         auto ga = pa->mutable_grad();
                         for (std::size_t t = 0; t < batches; ++t)
                             for (std::size_t i = 0; i < rows; ++i)
                                 for (std::size_t j = 0; j < cols; ++j)
                                     ga[t * rows * cols + i * cols + j] +=
                                         g[t * rows * cols + j * rows + i];
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (element_count(shape) != a->size()) {
        throw ShapeError("reshape: " + to_string(a->shape()) + " -> " + to_string(shape));
    }
    TensorNode* pa = a.get();
    return make_node("reshape", std::move(shape), {a->value().begin(), a->value().end()}, {a},
                     [pa](const TensorNode& self) {
                         auto g = self.grad();
                         auto ga = pa->mutable_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

Tensor sigmoid(const Tensor& a) {
    return unary("sigmoid", a,
                 [](double x) {
                     if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                     const double e = std::exp(x);
                     return e / (1.0 + e);
                 },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary("log", a, [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Tensor softmax(const Tensor& a) {
    if (a->rank() == 0 || a->size() == 0) throw ShapeError("softmax: empty input");
    const std::size_t width = a->shape().back();
    const std::size_t rows = a->size() / width;
    std::vector<double> out(a->size());
    auto in = a->value();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = in.data() + r * width;
        double* y = out.data() + r * width;
        const double top = *std::max_element(x, x + width);
        double total = 0.0;
        for (std::size_t i = 0; i < width; ++i) total += (y[i] = std::exp(x[i] - top));
        for (std::size_t i = 0; i < width; ++i) y[i] /= total;
    }
    TensorNode* pa = a.get();
    return make_node("softmax", a->shape(), std::move(out), {a}, [pa, rows, width](const TensorNode& self) {
        auto y = self.value();
        auto g = self.grad();
        auto ga = pa->mutable_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t i = 0; i < width; ++i) dot += g[r * width + i] * y[r * width + i];
            for (std::size_t i = 0; i < width; ++i)
                ga[r * width + i] += y[r * width + i] * (g[r * width + i] - dot);
        }
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    require_axis("concat", parts.front(), axis);
    Shape out_shape = parts.front()->shape();
    out_shape[axis] = 0;
    const Shape expect = out_shape;
    for (const auto& p : parts) {
        Shape probe = p->shape();
        if (probe.size() == expect.size()) probe[axis] = 0;
        if (probe != expect) {
            throw ShapeError("concat: incompatible " + to_string(p->shape()) + " along axis " +
                             std::to_string(axis));
        }
        out_shape[axis] += p->dim(axis);
    }
    const AxisSplit whole = split_at(out_shape, axis);
    std::vector<double> out(element_count(out_shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::size_t chunk = p->dim(axis) * whole.inner;
        auto v = p->value();
        for (std::size_t o = 0; o < whole.outer; ++o) {
            std::copy_n(v.data() + o * chunk, chunk,
                        out.data() + o * whole.extent * whole.inner + offset * whole.inner);
        }
        offset += p->dim(axis);
    }
    std::vector<TensorNode*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    return make_node("concat", std::move(out_shape), std::move(out), parts,
                     [raw, offsets, whole, axis](const TensorNode& self) {
                         auto g = self.grad();
                         for (std::size_t idx = 0; idx < raw.size(); ++idx) {
                             TensorNode* p = raw[idx];
                             if (!p->requires_grad()) continue;
                             const std::size_t chunk = p->dim(axis) * whole.inner;
                             auto gp = p->mutable_grad();
                             for (std::size_t o = 0; o < whole.outer; ++o) {
                                 const double* src = g.data() + o * whole.extent * whole.inner +
                                                     offsets[idx] * whole.inner;
                                 for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += src[i];
                             }
                         }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
    require_axis("slice", a, axis);
    if (begin >= end || end > a->dim(axis)) {
        throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for axis " + std::to_string(axis) + " of " +
                         to_string(a->shape()));
    }
    const AxisSplit s = split_at(a->shape(), axis);
    Shape out_shape = a->shape();
    out_shape[axis] = end - begin;
    const std::size_t chunk = (end - begin) * s.inner;
    std::vector<double> out(s.outer * chunk);
    auto v = a->value();
    for (std::size_t o = 0; o < s.outer; ++o) {
        std::copy_n(v.data() + o * s.extent * s.inner + begin * s.inner, chunk,
                    out.data() + o * chunk);
    }
    TensorNode* pa = a.get();
    return make_node("slice", std::move(out_shape), std::move(out), {a},
                     [pa, s, begin, chunk](const TensorNode& self) {
                         auto g = self.grad();
                         auto ga = pa->mutable_grad();
                         for (std::size_t o = 0; o < s.outer; ++o) {
                             double* dst = ga.data() + o * s.extent * s.inner + begin * s.inner;
                             for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[o * chunk + i];
                         }
                     });
}

Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("stack: no inputs");
    std::vector<Tensor> expanded;
    expanded.reserve(parts.size());
    for (const auto& p : parts) {
        if (p->shape() != parts.front()->shape()) {
            throw ShapeError("stack: mismatched shapes " + to_string(p->shape()) + " and " +
                             to_string(parts.front()->shape()));
        }
        if (axis > p->rank()) throw ShapeError("stack: axis out of range");
        Shape s = p->shape();
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
        expanded.push_back(reshape(p, std::move(s)));
    }
    return concat(expanded, axis);
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a->value()) total += v;
    TensorNode* pa = a.get();
    return make_node("sum", {1}, {total}, {a}, [pa](const TensorNode& self) {
        const double g = self.grad()[0];
        for (double& ga : pa->mutable_grad()) ga += g;
    });
}

Tensor mean(const Tensor& a) {
    if (a->size() == 0) throw ShapeError("mean: empty input");
    double total = 0.0;
    for (double v : a->value()) total += v;
    const double n = static_cast<double>(a->size());
    TensorNode* pa = a.get();
    return make_node("mean", {1}, {total / n}, {a}, [pa, n](const TensorNode& self) {
        const double g = self.grad()[0] / n;
        for (double& ga : pa->mutable_grad()) ga += g;
    });
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
    require_axis("sum_axis", a, axis);
    const AxisSplit s = split_at(a->shape(), axis);
    Shape out_shape = a->shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape = {1};
    std::vector<double> out(s.outer * s.inner, 0.0);
    auto v = a->value();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.extent; ++e)
            for (std::size_t i = 0; i < s.inner; ++i)
                out[o * s.inner + i] += v[(o * s.extent + e) * s.inner + i];
    TensorNode* pa = a.get();
    return make_node("sum_axis", std::move(out_shape), std::move(out), {a}, [pa, s](const TensorNode& self) {
        auto g = self.grad();
        auto ga = pa->mutable_grad();
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t e = 0; e < s.extent; ++e)
                for (std::size_t i = 0; i < s.inner; ++i)
                    ga[(o * s.extent + e) * s.inner + i] += g[o * s.inner + i];
    });
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
    require_axis("mean_axis", a, axis);
    return scale(sum_axis(a, axis), 1.0 / static_cast<double>(a->dim(axis)));
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
    if (!training || rate <= 0.0) return a;
    std::vector<double> mask(a->size(), 0.0);
    if (rate < 1.0) {
        const double keep_scale = 1.0 / (1.0 - rate);
        for (double& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
    }
    auto m = constant(a->shape(), std::move(mask));
    return mul(a, m);
}

}  // namespace fuzzformer::compute
