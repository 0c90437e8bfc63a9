#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gatgan/rng.hpp"

namespace gatgan {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

class Tape;

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until backward reaches this tensor
    bool requires_grad = false;
    // Producer record on the tape that recorded this tensor, if any. The
    // alive token expires when the tape is consumed or destroyed.
    Tape* tape = nullptr;
    std::weak_ptr<void> tape_alive;
    std::ptrdiff_t node = -1;
};

}  // namespace detail

// Dense row-major tensor of 64-bit reals with reverse-mode autodiff.
// Value-semantic handle: copies share storage; all ops allocate fresh
// outputs. Safe to read from multiple threads; mutation needs exclusive
// access.
class Tensor {
public:
    Tensor();                     // empty, shape {0}
    explicit Tensor(Shape shape); // zero-filled
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0);
    static Tensor normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0);

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->values.size(); }

    std::span<const double> values() const { return impl_->values; }
    // Direct write access to the storage. Mutating a tensor that already
    // participates in a live recording invalidates that recording.
    std::span<double> values_mut() { return impl_->values; }

    // Scalar content of a size-1 tensor.
    double item() const;

    // Row-major element access for tests and small assemblies.
    double at(std::initializer_list<std::size_t> idx) const;
    void set(std::initializer_list<std::size_t> idx, double v);

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool flag);

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const;
    Tensor grad_tensor() const;
    void zero_grad();
    void accumulate_grad(std::span<const double> g);

    // True when this tensor is an output recorded on a live tape.
    bool recorded() const;

    Tensor detached() const;  // value copy, no grad flag, no tape link

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Recording of one forward pass. Constructing a Tape makes it the active
// recorder for the current thread (innermost wins); ops whose inputs need
// gradients append backward rules in topological order. backward() runs the
// reverse sweep once and consumes the recording. Single-owner: a Tape must
// not be shared across threads.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Seeds d(loss)/d(loss) = 1 and propagates to every grad-requiring leaf.
    // loss must be a scalar recorded on this tape. A second call without a
    // fresh forward pass is a contract error.
    void backward(const Tensor& loss);

    bool consumed() const { return consumed_; }
    std::size_t node_count() const { return records_.size(); }

    static Tape* active();

    // Appends a backward rule; used by op implementations.
    void record(const Tensor& output, std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
                std::function<void()> backward_rule);

private:
    struct Record {
        std::function<void()> backward;
        std::shared_ptr<detail::TensorImpl> output;
        std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    };
    std::vector<Record> records_;
    std::shared_ptr<void> alive_;
    bool consumed_ = false;
};

// Runtime toggle for per-op finiteness scans (defaults to on in debug
// builds). Ops throw NumericError when a forward produces NaN/Inf.
void set_debug_checks(bool enabled);
bool debug_checks();

enum class Padding { same, valid };
enum class Activation { leaky_relu, sigmoid, tanh };
enum class Reduce { sum, mean };

// Elementwise binary ops with right-aligned broadcasting: shapes are aligned
// at the trailing axis, each axis pair must be equal or 1. No other implicit
// broadcasting exists anywhere in the op set.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

// Batched matrix product [..,m,k] x [..,k,n] -> [..,m,n]. Leading batch
// dims must match exactly, or one operand is rank-2 and is applied to every
// batch of the other.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len);
// Expands a length-1 axis to `times` copies.
Tensor repeat_axis(const Tensor& x, std::size_t axis, std::size_t times);
Tensor concat_last(const Tensor& a, const Tensor& b);

// Temporal cross-correlation. x: [K, T, F_in], kernel: [w, F_in, F_out].
// "same" keeps T (symmetric zero padding, extra pad on the left for odd
// deficits); "valid" yields T - w + 1.
Tensor conv1d(const Tensor& x, const Tensor& kernel, Padding padding);

// Temporal average pooling over [K, T, F]. Averages exclude padding
// positions, so edge windows divide by the in-bounds count.
Tensor avg_pool1d(const Tensor& x, std::size_t window, std::size_t stride, Padding padding);

Tensor activation(const Tensor& x, Activation kind, double slope = 0.2);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);

// Max-subtracted softmax along the last axis.
Tensor softmax_last(const Tensor& x);

Tensor reduce(const Tensor& x, Reduce kind, std::vector<std::size_t> axes, bool keepdims);
Tensor sum(const Tensor& x);   // all axes -> scalar
Tensor mean(const Tensor& x);  // all axes -> scalar

Tensor log(const Tensor& x);   // x must be positive
Tensor sqrt(const Tensor& x);  // backward floored at 1e-12 to stay finite

}  // namespace gatgan
