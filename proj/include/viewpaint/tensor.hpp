#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "viewpaint/rng.hpp"

namespace viewpaint {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major float32 tensor with optional participation in reverse-mode
// autodiff. Copies are shallow (shared storage). Data is treated as
// immutable once created; the only sanctioned mutation is through
// raw_data(), used by the optimizer and by model initialization, never on
// tensors recorded on an active tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, float value);
    static Tensor from_data(Shape shape, std::vector<float> data);
    static Tensor scalar(float value);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    std::size_t size() const;

    std::span<const float> data() const;
    std::span<float> raw_data();  // in-place access; see class comment

    /// Value of a single-element tensor.
    float item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);

    bool has_grad() const;
    std::span<const float> grad() const;
    void zero_grad();
    void drop_grad();
    void accumulate_grad(std::span<const float> g);

    Tensor clone() const;

    /// Identity of the underlying storage; equal for tensors sharing data.
    const void* storage_id() const { return n_.get(); }

private:
    struct Node;
    std::shared_ptr<Node> n_;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    friend class GradTape;
    friend Tensor make_result(Shape, std::vector<float>&&, bool);
};

// Records the backward closures of every differentiable op executed while it
// is alive. Creation order is execution order, so the reverse sweep is a
// valid topological order. One tape per thread at a time; ops executed with
// no live tape (inference) record nothing.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* current();

    void record(std::function<void()> backward_fn);
    std::size_t num_ops() const { return ops_.size(); }

    /// Seeds d(loss)/d(loss)=1 and runs the reverse sweep. Gradients
    /// accumulate additively into every requires_grad tensor reachable
    /// from the loss. A tape can be swept once; intermediate results keep
    /// their gradients afterwards, so a second sweep would double-count.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> ops_;
    bool used_ = false;
};

// ---- operations ----------------------------------------------------------
// Binary ops broadcast by expanding singleton extents after right-aligning
// shapes ([D] + [N,D], [N,1] * [N,D], ...).

Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m,k] * b[n,k]^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor gelu(const Tensor& a);

Tensor softmax(const Tensor& a, int axis);
Tensor layer_norm(const Tensor& a, int axis, float eps = 1e-5f);
Tensor mean(const Tensor& a, int axis);
Tensor sum(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, int ax0, int ax1);
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor concat(std::span<const Tensor> parts, int axis);

/// Broadcast `a` up to `shape` (gradient sum-reduces back).
Tensor expand(const Tensor& a, const Shape& shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// Standard-normal tensor drawn from `rng`.
Tensor randn(const Shape& shape, Rng& rng);

}  // namespace viewpaint
