#include "gatgan/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "gatgan/errors.hpp"

namespace gatgan {

// -------------------------------------------------------------------------
// shape helpers
// -------------------------------------------------------------------------

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

namespace {

std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

std::atomic<bool> g_debug_checks{
#ifdef NDEBUG
    false
#else
    true
#endif
};

void check_finite(const char* op, const std::vector<double>& v) {
    if (!g_debug_checks.load(std::memory_order_relaxed)) return;
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;

void ensure_grad(Impl& t) {
    if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
}

bool on_live_tape(const Impl& t) { return t.node >= 0 && !t.tape_alive.expired(); }

bool wants_grad(const Impl& t) { return t.requires_grad || on_live_tape(t); }

thread_local std::vector<Tape*> g_tape_stack;

// Records a backward rule for `out` if a tape is active and any input needs
// gradients. Inputs recorded on a different live tape are a contract error.
void maybe_record(const Tensor& out, std::initializer_list<Tensor> inputs,
                  const std::function<void()>& rule) {
    Tape* t = Tape::active();
    if (!t) return;
    bool needed = false;
    std::vector<ImplPtr> ins;
    ins.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        const Impl& impl = *in.impl();
        if (on_live_tape(impl) && impl.tape != t) {
            throw ContractError("tensor recorded on a different live tape used as input");
        }
        needed = needed || wants_grad(impl);
        ins.push_back(in.impl());
    }
    if (!needed) return;
    t->record(out, std::move(ins), rule);
}

}  // namespace

void set_debug_checks(bool enabled) { g_debug_checks.store(enabled); }
bool debug_checks() { return g_debug_checks.load(); }

// -------------------------------------------------------------------------
// Tensor
// -------------------------------------------------------------------------

Tensor::Tensor() : impl_(std::make_shared<Impl>()) { impl_->shape = {0}; }

Tensor::Tensor(Shape shape) : impl_(std::make_shared<Impl>()) {
    impl_->values.assign(shape_size(shape), 0.0);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Impl>()) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.impl_->values.begin(), t.impl_->values.end(), v);
    return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& x : t.impl_->values) x = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::normal(Shape shape, Rng& rng, double mean, double stddev) {
    Tensor t(std::move(shape));
    for (double& x : t.impl_->values) x = rng.normal(mean, stddev);
    return t;
}

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item() requires a size-1 tensor, got shape " + shape_str(shape()));
    }
    return impl_->values[0];
}

namespace {
std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> idx) {
    if (idx.size() != shape.size()) {
        throw DimensionError("index rank " + std::to_string(idx.size()) +
                             " does not match tensor shape " + shape_str(shape));
    }
    std::size_t off = 0, i = 0;
    for (std::size_t v : idx) {
        if (v >= shape[i]) throw DimensionError("index out of range in axis " + std::to_string(i));
        off = off * shape[i] + v;
        ++i;
    }
    return off;
}
}  // namespace

double Tensor::at(std::initializer_list<std::size_t> idx) const {
    return impl_->values[flat_index(impl_->shape, idx)];
}

void Tensor::set(std::initializer_list<std::size_t> idx, double v) {
    impl_->values[flat_index(impl_->shape, idx)] = v;
}

Tensor& Tensor::set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

Tensor Tensor::grad_tensor() const {
    if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
    return Tensor(impl_->shape, impl_->grad);
}

void Tensor::zero_grad() { impl_->grad.clear(); }

void Tensor::accumulate_grad(std::span<const double> g) {
    if (g.size() != size()) {
        throw DimensionError("gradient size " + std::to_string(g.size()) +
                             " does not match tensor size " + std::to_string(size()));
    }
    ensure_grad(*impl_);
    for (std::size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
}

bool Tensor::recorded() const { return on_live_tape(*impl_); }

Tensor Tensor::detached() const { return Tensor(impl_->shape, impl_->values); }

// -------------------------------------------------------------------------
// Tape
// -------------------------------------------------------------------------

Tape::Tape() : alive_(std::make_shared<int>(0)) { g_tape_stack.push_back(this); }

Tape::~Tape() {
    // Destruction order is LIFO by construction; remove self defensively.
    auto it = std::find(g_tape_stack.rbegin(), g_tape_stack.rend(), this);
    if (it != g_tape_stack.rend()) g_tape_stack.erase(std::next(it).base());
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(const Tensor& output, std::vector<ImplPtr> inputs,
                  std::function<void()> backward_rule) {
    if (consumed_) {
        throw ContractError("tape already consumed by backward; start a fresh forward pass");
    }
    Impl& out = *output.impl();
    out.tape = this;
    out.tape_alive = alive_;
    out.node = static_cast<std::ptrdiff_t>(records_.size());
    records_.push_back({std::move(backward_rule), output.impl(), std::move(inputs)});
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) {
        throw ContractError("backward called twice on the same tape without a fresh forward");
    }
    const Impl& li = *loss.impl();
    if (li.values.size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(li.shape));
    }
    if (li.tape != this || li.node < 0 || li.tape_alive.expired()) {
        throw ContractError("loss tensor is not recorded on this tape");
    }

    // Mark records reachable from the loss, walking producer edges backwards.
    std::vector<char> needed(records_.size(), 0);
    const std::size_t loss_node = static_cast<std::size_t>(li.node);
    needed[loss_node] = 1;
    for (std::size_t i = loss_node + 1; i-- > 0;) {
        if (!needed[i]) continue;
        for (const ImplPtr& in : records_[i].inputs) {
            if (in->node >= 0 && in->tape == this && !in->tape_alive.expired()) {
                needed[static_cast<std::size_t>(in->node)] = 1;
            }
        }
    }

    loss.impl()->grad.assign(1, 1.0);
    for (std::size_t i = loss_node + 1; i-- > 0;) {
        if (!needed[i]) continue;
        if (records_[i].output->grad.empty()) continue;  // never reached by a consumer
        records_[i].backward();
    }

    consumed_ = true;
    records_.clear();
    alive_.reset();  // expires every tensor's link to this tape
}

// -------------------------------------------------------------------------
// broadcasting machinery
// -------------------------------------------------------------------------

namespace {

struct BroadcastPlan {
    Shape out_shape;
    // Strides into a and b per output axis; 0 where the operand broadcasts.
    std::vector<std::size_t> sa, sb;
};

BroadcastPlan broadcast_plan(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    BroadcastPlan p;
    p.out_shape.resize(rank);
    Shape pa(rank, 1), pb(rank, 1);
    std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
    for (std::size_t i = 0; i < rank; ++i) {
        if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
            throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                 shape_str(b) + " do not broadcast");
        }
        p.out_shape[i] = std::max(pa[i], pb[i]);
    }
    auto sta = row_major_strides(pa);
    auto stb = row_major_strides(pb);
    p.sa.resize(rank);
    p.sb.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        p.sa[i] = pa[i] == 1 ? 0 : sta[i];
        p.sb[i] = pb[i] == 1 ? 0 : stb[i];
    }
    return p;
}

// Applies fn(offset_a, offset_b, offset_out) over every output element.
template <typename F>
void broadcast_for_each(const BroadcastPlan& p, F&& fn) {
    const std::size_t rank = p.out_shape.size();
    if (rank == 0) {
        fn(std::size_t{0}, std::size_t{0}, std::size_t{0});
        return;
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0, oo = 0;
    const std::size_t total = shape_size(p.out_shape);
    for (std::size_t n = 0; n < total; ++n) {
        fn(oa, ob, oo);
        ++oo;
        for (std::size_t ax = rank; ax-- > 0;) {
            oa += p.sa[ax];
            ob += p.sb[ax];
            if (++idx[ax] < p.out_shape[ax]) break;
            oa -= p.sa[ax] * p.out_shape[ax];
            ob -= p.sb[ax] * p.out_shape[ax];
            idx[ax] = 0;
        }
    }
}

enum class BinOp { add, sub, mul, div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    const auto& av = a.impl()->values;
    const auto& bv = b.impl()->values;
    Tensor out;

    if (a.shape() == b.shape()) {  // fast path
        std::vector<double> ov(av.size());
        switch (op) {
            case BinOp::add: for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i]; break;
            case BinOp::sub: for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i]; break;
            case BinOp::mul: for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i]; break;
            case BinOp::div: for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] / bv[i]; break;
        }
        out = Tensor(a.shape(), std::move(ov));
    } else {
        BroadcastPlan p = broadcast_plan(a.shape(), b.shape(), name);
        std::vector<double> ov(shape_size(p.out_shape));
        switch (op) {
            case BinOp::add:
                broadcast_for_each(p, [&](std::size_t ia, std::size_t ib, std::size_t io) { ov[io] = av[ia] + bv[ib]; });
                break;
            case BinOp::sub:
                broadcast_for_each(p, [&](std::size_t ia, std::size_t ib, std::size_t io) { ov[io] = av[ia] - bv[ib]; });
                break;
            case BinOp::mul:
                broadcast_for_each(p, [&](std::size_t ia, std::size_t ib, std::size_t io) { ov[io] = av[ia] * bv[ib]; });
                break;
            case BinOp::div:
                broadcast_for_each(p, [&](std::size_t ia, std::size_t ib, std::size_t io) { ov[io] = av[ia] / bv[ib]; });
                break;
        }
        out = Tensor(std::move(p.out_shape), std::move(ov));
    }
    check_finite(name, out.impl()->values);

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const bool wa = wants_grad(*ai), wb = wants_grad(*bi);
    maybe_record(out, {a, b}, [ai, bi, oi, op, wa, wb] {
        const auto& g = oi->grad;
        if (ai->shape == bi->shape) {
            if (wa) {
                ensure_grad(*ai);
                switch (op) {
                    case BinOp::add:
                    case BinOp::sub:
                        for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
                        break;
                    case BinOp::mul:
                        for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->values[i];
                        break;
                    case BinOp::div:
                        for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] / bi->values[i];
                        break;
                }
            }
            if (wb) {
                ensure_grad(*bi);
                switch (op) {
                    case BinOp::add:
                        for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
                        break;
                    case BinOp::sub:
                        for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
                        break;
                    case BinOp::mul:
                        for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->values[i];
                        break;
                    case BinOp::div:
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            bi->grad[i] -= g[i] * ai->values[i] / (bi->values[i] * bi->values[i]);
                        }
                        break;
                }
            }
            return;
        }
        BroadcastPlan p = broadcast_plan(ai->shape, bi->shape, "binary backward");
        if (wa) ensure_grad(*ai);
        if (wb) ensure_grad(*bi);
        broadcast_for_each(p, [&](std::size_t ia, std::size_t ib, std::size_t io) {
            const double go = g[io];
            switch (op) {
                case BinOp::add:
                    if (wa) ai->grad[ia] += go;
                    if (wb) bi->grad[ib] += go;
                    break;
                case BinOp::sub:
                    if (wa) ai->grad[ia] += go;
                    if (wb) bi->grad[ib] -= go;
                    break;
                case BinOp::mul:
                    if (wa) ai->grad[ia] += go * bi->values[ib];
                    if (wb) bi->grad[ib] += go * ai->values[ia];
                    break;
                case BinOp::div: {
                    const double bv = bi->values[ib];
                    if (wa) ai->grad[ia] += go / bv;
                    if (wb) bi->grad[ib] -= go * ai->values[ia] / (bv * bv);
                    break;
                }
            }
        });
    });
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::div, "div"); }

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> ov(a.values().begin(), a.values().end());
    for (double& x : ov) x += c;
    Tensor out(a.shape(), std::move(ov));
    check_finite("add_scalar", out.impl()->values);
    auto ai = a.impl(), oi = out.impl();
    maybe_record(out, {a}, [ai, oi] {
        ensure_grad(*ai);
        for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    });
    return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> ov(a.values().begin(), a.values().end());
    for (double& x : ov) x *= c;
    Tensor out(a.shape(), std::move(ov));
    check_finite("mul_scalar", out.impl()->values);
    auto ai = a.impl(), oi = out.impl();
    maybe_record(out, {a}, [ai, oi, c] {
        ensure_grad(*ai);
        for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * c;
    });
    return out;
}

// -------------------------------------------------------------------------
// matmul
// -------------------------------------------------------------------------

namespace {

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = a_row[p];
            const double* b_row = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b_row = B + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            c_row[j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = A + p * m;
        const double* b_row = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = a_row[i];
            double* c_row = C + i * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

struct MatmulDims {
    std::size_t batch, m, k, n;
    bool a_broadcast, b_broadcast;  // rank-2 operand shared across batches
    Shape out_shape;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw DimensionError("matmul requires rank >= 2, got " + shape_str(a) + " and " +
                             shape_str(b));
    }
    MatmulDims d{};
    d.m = a[a.size() - 2];
    d.k = a[a.size() - 1];
    const std::size_t bk = b[b.size() - 2];
    d.n = b[b.size() - 1];
    if (d.k != bk) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_str(a) + " x " +
                             shape_str(b));
    }
    Shape batch_a(a.begin(), a.end() - 2), batch_b(b.begin(), b.end() - 2);
    if (batch_a == batch_b) {
        d.out_shape = batch_a;
    } else if (batch_a.empty()) {
        d.a_broadcast = true;
        d.out_shape = batch_b;
    } else if (batch_b.empty()) {
        d.b_broadcast = true;
        d.out_shape = batch_a;
    } else {
        throw DimensionError("matmul batch dimensions disagree: " + shape_str(a) + " x " +
                             shape_str(b));
    }
    d.batch = shape_size(d.out_shape);
    d.out_shape.push_back(d.m);
    d.out_shape.push_back(d.n);
    return d;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    MatmulDims d = matmul_dims(a.shape(), b.shape());
    std::vector<double> ov(d.batch * d.m * d.n, 0.0);
    const double* ap = a.values().data();
    const double* bp = b.values().data();
    for (std::size_t s = 0; s < d.batch; ++s) {
        gemm_nn(d.m, d.n, d.k, ap + (d.a_broadcast ? 0 : s * d.m * d.k),
                bp + (d.b_broadcast ? 0 : s * d.k * d.n), ov.data() + s * d.m * d.n);
    }
    Tensor out(d.out_shape, std::move(ov));
    check_finite("matmul", out.impl()->values);

    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const bool wa = wants_grad(*ai), wb = wants_grad(*bi);
    maybe_record(out, {a, b}, [ai, bi, oi, d, wa, wb] {
        const double* g = oi->grad.data();
        if (wa) ensure_grad(*ai);
        if (wb) ensure_grad(*bi);
        for (std::size_t s = 0; s < d.batch; ++s) {
            const double* gs = g + s * d.m * d.n;
            const double* as = ai->values.data() + (d.a_broadcast ? 0 : s * d.m * d.k);
            const double* bs = bi->values.data() + (d.b_broadcast ? 0 : s * d.k * d.n);
            if (wa) {
                gemm_nt(d.m, d.k, d.n, gs, bs,
                        ai->grad.data() + (d.a_broadcast ? 0 : s * d.m * d.k));
            }
            if (wb) {
                gemm_tn(d.k, d.n, d.m, as, gs,
                        bi->grad.data() + (d.b_broadcast ? 0 : s * d.k * d.n));
            }
        }
    });
    return out;
}

// -------------------------------------------------------------------------
// structural ops
// -------------------------------------------------------------------------

Tensor transpose_last2(const Tensor& x) {
    if (x.rank() < 2) {
        throw DimensionError("transpose_last2 requires rank >= 2, got " + shape_str(x.shape()));
    }
    Shape os = x.shape();
    const std::size_t r = os.size();
    std::swap(os[r - 2], os[r - 1]);
    const std::size_t rows = x.shape()[r - 2], cols = x.shape()[r - 1];
    const std::size_t batch = x.size() / (rows * cols);
    std::vector<double> ov(x.size());
    const double* xp = x.values().data();
    for (std::size_t s = 0; s < batch; ++s) {
        const double* src = xp + s * rows * cols;
        double* dst = ov.data() + s * rows * cols;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
    }
    Tensor out(std::move(os), std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, batch, rows, cols] {
        ensure_grad(*xi);
        const double* g = oi->grad.data();
        for (std::size_t s = 0; s < batch; ++s) {
            const double* gs = g + s * rows * cols;
            double* dx = xi->grad.data() + s * rows * cols;
            for (std::size_t j = 0; j < cols; ++j)
                for (std::size_t i = 0; i < rows; ++i) dx[i * cols + j] += gs[j * rows + i];
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_size(new_shape) != x.size()) {
        throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                             " changes element count");
    }
    Tensor out(std::move(new_shape), std::vector<double>(x.values().begin(), x.values().end()));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi] {
        ensure_grad(*xi);
        for (std::size_t i = 0; i < oi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
    });
    return out;
}

Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw DimensionError("slice_axis: axis out of range for " + shape_str(s));
    if (start + len > s[axis] || len == 0) {
        throw DimensionError("slice_axis: range [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") invalid for axis size " +
                             std::to_string(s[axis]));
    }
    Shape os = s;
    os[axis] = len;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<double> ov(shape_size(os));
    const double* xp = x.values().data();
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = xp + (o * s[axis] + start) * inner;
        double* dst = ov.data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    Tensor out(std::move(os), std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    const std::size_t ax_len = s[axis];
    maybe_record(out, {x}, [xi, oi, outer, inner, ax_len, start, len] {
        ensure_grad(*xi);
        const double* g = oi->grad.data();
        for (std::size_t o = 0; o < outer; ++o) {
            double* dst = xi->grad.data() + (o * ax_len + start) * inner;
            const double* src = g + o * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    });
    return out;
}

Tensor repeat_axis(const Tensor& x, std::size_t axis, std::size_t times) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw DimensionError("repeat_axis: axis out of range for " + shape_str(s));
    if (s[axis] != 1) {
        throw DimensionError("repeat_axis expects length-1 axis, got " + shape_str(s) + " axis " +
                             std::to_string(axis));
    }
    if (times == 0) throw DimensionError("repeat_axis: times must be >= 1");
    Shape os = s;
    os[axis] = times;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<double> ov(shape_size(os));
    const double* xp = x.values().data();
    for (std::size_t o = 0; o < outer; ++o) {
        const double* src = xp + o * inner;
        for (std::size_t t = 0; t < times; ++t) {
            std::copy(src, src + inner, ov.data() + (o * times + t) * inner);
        }
    }
    Tensor out(std::move(os), std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, outer, inner, times] {
        ensure_grad(*xi);
        const double* g = oi->grad.data();
        for (std::size_t o = 0; o < outer; ++o) {
            double* dst = xi->grad.data() + o * inner;
            for (std::size_t t = 0; t < times; ++t) {
                const double* src = g + (o * times + t) * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
        }
    });
    return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != sb.size() || sa.empty() ||
        !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
        throw DimensionError("concat_last: shapes " + shape_str(sa) + " and " + shape_str(sb) +
                             " differ outside the last axis");
    }
    const std::size_t la = sa.back(), lb = sb.back();
    const std::size_t rows = a.size() / std::max<std::size_t>(la, 1);
    Shape os = sa;
    os.back() = la + lb;
    std::vector<double> ov(rows * (la + lb));
    const double* ap = a.values().data();
    const double* bp = b.values().data();
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(ap + r * la, ap + (r + 1) * la, ov.data() + r * (la + lb));
        std::copy(bp + r * lb, bp + (r + 1) * lb, ov.data() + r * (la + lb) + la);
    }
    Tensor out(std::move(os), std::move(ov));
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    const bool wa = wants_grad(*ai), wb = wants_grad(*bi);
    maybe_record(out, {a, b}, [ai, bi, oi, rows, la, lb, wa, wb] {
        const double* g = oi->grad.data();
        if (wa) ensure_grad(*ai);
        if (wb) ensure_grad(*bi);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g + r * (la + lb);
            if (wa) {
                for (std::size_t i = 0; i < la; ++i) ai->grad[r * la + i] += gr[i];
            }
            if (wb) {
                for (std::size_t i = 0; i < lb; ++i) bi->grad[r * lb + i] += gr[la + i];
            }
        }
    });
    return out;
}

// -------------------------------------------------------------------------
// conv1d / avg_pool1d
// -------------------------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& kernel, Padding padding) {
    if (x.rank() != 3) throw DimensionError("conv1d input must be [K,T,F_in], got " + shape_str(x.shape()));
    if (kernel.rank() != 3) {
        throw DimensionError("conv1d kernel must be [w,F_in,F_out], got " + shape_str(kernel.shape()));
    }
    const std::size_t K = x.shape()[0], T = x.shape()[1], Fi = x.shape()[2];
    const std::size_t w = kernel.shape()[0], kFi = kernel.shape()[1], Fo = kernel.shape()[2];
    if (Fi != kFi) {
        throw DimensionError("conv1d channel mismatch: input " + shape_str(x.shape()) +
                             " vs kernel " + shape_str(kernel.shape()));
    }
    std::size_t To, pad_left;
    if (padding == Padding::valid) {
        if (w > T) {
            throw DimensionError("conv1d: kernel width " + std::to_string(w) +
                                 " exceeds sequence length " + std::to_string(T) + " in valid mode");
        }
        To = T - w + 1;
        pad_left = 0;
    } else {
        To = T;
        pad_left = (w - 1 + 1) / 2;  // extra pad on the left for odd deficits
    }

    std::vector<double> ov(K * To * Fo, 0.0);
    const double* xp = x.values().data();
    const double* kp = kernel.values().data();
    for (std::size_t b = 0; b < K; ++b) {
        const double* xb = xp + b * T * Fi;
        double* ob = ov.data() + b * To * Fo;
        for (std::size_t t = 0; t < To; ++t) {
            double* orow = ob + t * Fo;
            for (std::size_t dw = 0; dw < w; ++dw) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + dw) -
                                           static_cast<std::ptrdiff_t>(pad_left);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                const double* xrow = xb + src * Fi;
                const double* krow = kp + dw * Fi * Fo;
                for (std::size_t ci = 0; ci < Fi; ++ci) {
                    const double xv = xrow[ci];
                    const double* kr = krow + ci * Fo;
                    for (std::size_t co = 0; co < Fo; ++co) orow[co] += xv * kr[co];
                }
            }
        }
    }
    Tensor out({K, To, Fo}, std::move(ov));
    check_finite("conv1d", out.impl()->values);

    auto xi = x.impl(), ki = kernel.impl(), oi = out.impl();
    const bool wx = wants_grad(*xi), wk = wants_grad(*ki);
    maybe_record(out, {x, kernel}, [xi, ki, oi, K, T, Fi, w, Fo, To, pad_left, wx, wk] {
        if (wx) ensure_grad(*xi);
        if (wk) ensure_grad(*ki);
        const double* g = oi->grad.data();
        for (std::size_t b = 0; b < K; ++b) {
            const double* gb = g + b * To * Fo;
            const double* xb = xi->values.data() + b * T * Fi;
            for (std::size_t t = 0; t < To; ++t) {
                const double* grow = gb + t * Fo;
                for (std::size_t dw = 0; dw < w; ++dw) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + dw) -
                                               static_cast<std::ptrdiff_t>(pad_left);
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                    for (std::size_t ci = 0; ci < Fi; ++ci) {
                        if (wx) {
                            double acc = 0.0;
                            const double* kr = ki->values.data() + (dw * Fi + ci) * Fo;
                            for (std::size_t co = 0; co < Fo; ++co) acc += grow[co] * kr[co];
                            xi->grad[b * T * Fi + src * Fi + ci] += acc;
                        }
                        if (wk) {
                            const double xv = xb[src * Fi + ci];
                            double* kg = ki->grad.data() + (dw * Fi + ci) * Fo;
                            for (std::size_t co = 0; co < Fo; ++co) kg[co] += xv * grow[co];
                        }
                    }
                }
            }
        }
    });
    return out;
}

Tensor avg_pool1d(const Tensor& x, std::size_t window, std::size_t stride, Padding padding) {
    if (x.rank() != 3) {
        throw DimensionError("avg_pool1d input must be [K,T,F], got " + shape_str(x.shape()));
    }
    if (window == 0 || stride == 0) throw ContractError("avg_pool1d: window and stride must be >= 1");
    const std::size_t K = x.shape()[0], T = x.shape()[1], F = x.shape()[2];
    std::size_t To, pad_left;
    if (padding == Padding::valid) {
        if (window > T) {
            throw DimensionError("avg_pool1d: window " + std::to_string(window) +
                                 " exceeds sequence length " + std::to_string(T) + " in valid mode");
        }
        To = (T - window) / stride + 1;
        pad_left = 0;
    } else {
        To = (T + stride - 1) / stride;
        const std::size_t span = (To - 1) * stride + window;
        const std::size_t pad = span > T ? span - T : 0;
        pad_left = (pad + 1) / 2;
    }

    std::vector<double> ov(K * To * F, 0.0);
    std::vector<double> inv_count(To, 0.0);
    for (std::size_t t = 0; t < To; ++t) {
        std::size_t cnt = 0;
        for (std::size_t dw = 0; dw < window; ++dw) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + dw) -
                                       static_cast<std::ptrdiff_t>(pad_left);
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(T)) ++cnt;
        }
        inv_count[t] = cnt ? 1.0 / static_cast<double>(cnt) : 0.0;
    }
    const double* xp = x.values().data();
    for (std::size_t b = 0; b < K; ++b) {
        for (std::size_t t = 0; t < To; ++t) {
            double* orow = ov.data() + (b * To + t) * F;
            for (std::size_t dw = 0; dw < window; ++dw) {
                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + dw) -
                                           static_cast<std::ptrdiff_t>(pad_left);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                const double* xrow = xp + (b * T + static_cast<std::size_t>(src)) * F;
                for (std::size_t f = 0; f < F; ++f) orow[f] += xrow[f];
            }
            for (std::size_t f = 0; f < F; ++f) orow[f] *= inv_count[t];
        }
    }
    Tensor out({K, To, F}, std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, K, T, F, To, window, stride, pad_left, inv_count] {
        ensure_grad(*xi);
        const double* g = oi->grad.data();
        for (std::size_t b = 0; b < K; ++b) {
            for (std::size_t t = 0; t < To; ++t) {
                const double* grow = g + (b * To + t) * F;
                for (std::size_t dw = 0; dw < window; ++dw) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + dw) -
                                               static_cast<std::ptrdiff_t>(pad_left);
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                    double* xg = xi->grad.data() + (b * T + static_cast<std::size_t>(src)) * F;
                    for (std::size_t f = 0; f < F; ++f) xg[f] += grow[f] * inv_count[t];
                }
            }
        }
    });
    return out;
}

// -------------------------------------------------------------------------
// activations / softmax
// -------------------------------------------------------------------------

Tensor activation(const Tensor& x, Activation kind, double slope) {
    if (kind == Activation::leaky_relu && (slope <= 0.0 || slope >= 1.0)) {
        throw ContractError("leaky_relu slope must lie in (0,1)");
    }
    std::vector<double> ov(x.size());
    const auto xs = x.values();
    switch (kind) {
        case Activation::leaky_relu:
            for (std::size_t i = 0; i < ov.size(); ++i) {
                ov[i] = xs[i] > 0.0 ? xs[i] : slope * xs[i];
            }
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < ov.size(); ++i) {
                const double v = xs[i];
                ov[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                 : std::exp(v) / (1.0 + std::exp(v));
            }
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xs[i]);
            break;
    }
    Tensor out(x.shape(), std::move(ov));
    check_finite("activation", out.impl()->values);
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, kind, slope] {
        ensure_grad(*xi);
        const auto& g = oi->grad;
        const auto& y = oi->values;
        switch (kind) {
            case Activation::leaky_relu:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    xi->grad[i] += g[i] * (xi->values[i] > 0.0 ? 1.0 : slope);
                }
                break;
            case Activation::sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i] * y[i] * (1.0 - y[i]);
                break;
            case Activation::tanh:
                for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
        }
    });
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) { return activation(x, Activation::leaky_relu, slope); }
Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }
Tensor tanh_act(const Tensor& x) { return activation(x, Activation::tanh); }

Tensor softmax_last(const Tensor& x) {
    if (x.rank() == 0 || x.shape().back() == 0) {
        throw DimensionError("softmax_last needs a non-empty last axis, got " + shape_str(x.shape()));
    }
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.size() / n;
    std::vector<double> ov(x.size());
    const double* xp = x.values().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xp + r * n;
        double* orow = ov.data() + r * n;
        double mx = xr[0];
        for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            orow[i] = std::exp(xr[i] - mx);
            denom += orow[i];
        }
        for (std::size_t i = 0; i < n; ++i) orow[i] /= denom;
    }
    Tensor out(x.shape(), std::move(ov));
    check_finite("softmax_last", out.impl()->values);
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, rows, n] {
        ensure_grad(*xi);
        const double* g = oi->grad.data();
        const double* y = oi->values.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g + r * n;
            const double* yr = y + r * n;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += gr[i] * yr[i];
            double* xg = xi->grad.data() + r * n;
            for (std::size_t i = 0; i < n; ++i) xg[i] += yr[i] * (gr[i] - dot);
        }
    });
    return out;
}

// -------------------------------------------------------------------------
// reductions
// -------------------------------------------------------------------------

Tensor reduce(const Tensor& x, Reduce kind, std::vector<std::size_t> axes, bool keepdims) {
    const Shape& s = x.shape();
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    for (std::size_t a : axes) {
        if (a >= s.size()) {
            throw DimensionError("reduce: axis " + std::to_string(a) + " out of range for " +
                                 shape_str(s));
        }
    }
    std::vector<char> reduced(s.size(), 0);
    for (std::size_t a : axes) reduced[a] = 1;

    Shape os;
    std::size_t count = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (reduced[i]) {
            count *= s[i];
            if (keepdims) os.push_back(1);
        } else {
            os.push_back(s[i]);
        }
    }
    // Map input flat index -> output flat index via strides that skip
    // reduced axes.
    auto in_strides = row_major_strides(s);
    Shape kept;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!reduced[i]) kept.push_back(s[i]);
    auto kept_strides = row_major_strides(kept);
    std::vector<std::size_t> out_stride(s.size(), 0);
    for (std::size_t i = 0, j = 0; i < s.size(); ++i) {
        if (!reduced[i]) out_stride[i] = kept_strides[j++];
    }

    const std::size_t out_size = shape_size(os);
    std::vector<double> ov(out_size, 0.0);
    const double* xp = x.values().data();
    const std::size_t total = x.size();
    {
        std::vector<std::size_t> idx(s.size(), 0);
        std::size_t oo = 0;
        for (std::size_t nlin = 0; nlin < total; ++nlin) {
            ov[oo] += xp[nlin];
            for (std::size_t ax = s.size(); ax-- > 0;) {
                oo += out_stride[ax];
                if (++idx[ax] < s[ax]) break;
                oo -= out_stride[ax] * s[ax];
                idx[ax] = 0;
            }
        }
    }
    const double scale = kind == Reduce::mean ? 1.0 / static_cast<double>(std::max<std::size_t>(count, 1)) : 1.0;
    if (kind == Reduce::mean) {
        for (double& v : ov) v *= scale;
    }
    Tensor out(std::move(os), std::move(ov));
    check_finite("reduce", out.impl()->values);
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi, out_stride, scale] {
        ensure_grad(*xi);
        const Shape& xs = xi->shape;
        const double* g = oi->grad.data();
        std::vector<std::size_t> idx(xs.size(), 0);
        std::size_t oo = 0;
        const std::size_t total = xi->values.size();
        for (std::size_t nlin = 0; nlin < total; ++nlin) {
            xi->grad[nlin] += g[oo] * scale;
            for (std::size_t ax = xs.size(); ax-- > 0;) {
                oo += out_stride[ax];
                if (++idx[ax] < xs[ax]) break;
                oo -= out_stride[ax] * xs[ax];
                idx[ax] = 0;
            }
        }
    });
    return out;
}

namespace {
std::vector<std::size_t> all_axes(const Tensor& x) {
    std::vector<std::size_t> a(x.rank());
    std::iota(a.begin(), a.end(), std::size_t{0});
    return a;
}
}  // namespace

Tensor sum(const Tensor& x) { return reduce(x, Reduce::sum, all_axes(x), false); }
Tensor mean(const Tensor& x) { return reduce(x, Reduce::mean, all_axes(x), false); }

// -------------------------------------------------------------------------
// log / sqrt
// -------------------------------------------------------------------------

Tensor log(const Tensor& x) {
    std::vector<double> ov(x.size());
    const auto xs = x.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
        if (xs[i] <= 0.0) throw NumericError("log of non-positive value");
        ov[i] = std::log(xs[i]);
    }
    Tensor out(x.shape(), std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi] {
        ensure_grad(*xi);
        for (std::size_t i = 0; i < oi->grad.size(); ++i) {
            xi->grad[i] += oi->grad[i] / xi->values[i];
        }
    });
    return out;
}

Tensor sqrt(const Tensor& x) {
    std::vector<double> ov(x.size());
    const auto xs = x.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
        if (xs[i] < 0.0) throw NumericError("sqrt of negative value");
        ov[i] = std::sqrt(xs[i]);
    }
    Tensor out(x.shape(), std::move(ov));
    auto xi = x.impl(), oi = out.impl();
    maybe_record(out, {x}, [xi, oi] {
        ensure_grad(*xi);
        for (std::size_t i = 0; i < oi->grad.size(); ++i) {
            xi->grad[i] += oi->grad[i] * 0.5 / std::max(oi->values[i], 1e-12);
        }
    });
    return out;
}

}  // namespace gatgan
