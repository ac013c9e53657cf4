#include "viewpaint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "viewpaint/error.hpp"
#include "viewpaint/kernels.hpp"

namespace viewpaint {

using kern::active;

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int e : s) {
        if (e <= 0) throw DimensionError("non-positive extent in shape " + shape_str(s));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

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

struct Tensor::Node {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first accumulation
    bool requires_grad = false;
};

namespace {

thread_local GradTape* g_tape = nullptr;

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

int norm_axis(int axis, int rank, const char* op) {
    int a = axis < 0 ? axis + rank : axis;
    if (a < 0 || a >= rank)
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for rank " + std::to_string(rank));
    return a;
}

// Right-aligned broadcast of two shapes; each aligned pair of extents must
// match or one of them must be 1.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
    const int r = std::max(ra, rb);
    Shape out(static_cast<std::size_t>(r));
    for (int d = 0; d < r; ++d) {
        const int ea = d < r - ra ? 1 : a[static_cast<std::size_t>(d - (r - ra))];
        const int eb = d < r - rb ? 1 : b[static_cast<std::size_t>(d - (r - rb))];
        if (ea != eb && ea != 1 && eb != 1)
            throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                 shape_str(b) + " are not broadcast-compatible");
        out[static_cast<std::size_t>(d)] = std::max(ea, eb);
    }
    return out;
}

std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (int d = static_cast<int>(s.size()) - 2; d >= 0; --d)
        st[static_cast<std::size_t>(d)] =
            st[static_cast<std::size_t>(d) + 1] * static_cast<std::size_t>(s[static_cast<std::size_t>(d) + 1]);
    return st;
}

bool grad_enabled(bool any_requires) { return any_requires && g_tape != nullptr; }

void record_op(std::function<void()> fn) { g_tape->record(std::move(fn)); }

}  // namespace

Tensor make_result(Shape shape, std::vector<float>&& data, bool req) {
    auto n = std::make_shared<Tensor::Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = req;
    return Tensor(std::move(n));
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return make_result(std::move(shape), std::vector<float>(n, 0.0f), false);
}

Tensor Tensor::full(Shape shape, float value) {
    std::size_t n = shape_numel(shape);
    return make_result(std::move(shape), std::vector<float>(n, value), false);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("from_data: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " elements, got " +
                             std::to_string(data.size()));
    return make_result(std::move(shape), std::move(data), false);
}

Tensor Tensor::scalar(float value) { return from_data({1}, {value}); }

const Shape& Tensor::shape() const {
    if (!n_) throw ContractError("shape(): undefined tensor");
    return n_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::size_t Tensor::size() const {
    if (!n_) throw ContractError("size(): undefined tensor");
    return n_->data.size();
}

std::span<const float> Tensor::data() const {
    if (!n_) throw ContractError("data(): undefined tensor");
    return n_->data;
}

std::span<float> Tensor::raw_data() {
    if (!n_) throw ContractError("raw_data(): undefined tensor");
    return n_->data;
}

float Tensor::item() const {
    if (size() != 1)
        throw DimensionError("item(): tensor has " + std::to_string(size()) + " elements");
    return n_->data[0];
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
    if (!n_) throw ContractError("set_requires_grad(): undefined tensor");
    n_->requires_grad = v;
    return *this;
}

bool Tensor::has_grad() const { return n_ && !n_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    if (!n_ || n_->grad.empty()) return {};
    return n_->grad;
}

void Tensor::zero_grad() {
    if (n_ && !n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0f);
}

void Tensor::drop_grad() {
    if (n_) n_->grad.clear();
}

void Tensor::accumulate_grad(std::span<const float> g) {
    if (!n_) throw ContractError("accumulate_grad(): undefined tensor");
    if (g.empty()) return;
    if (g.size() != n_->data.size())
        throw DimensionError("accumulate_grad(): gradient size " + std::to_string(g.size()) +
                             " does not match tensor size " + std::to_string(n_->data.size()));
    if (n_->grad.empty()) n_->grad.assign(n_->data.size(), 0.0f);
    active().axpy(1.0f, g.data(), n_->grad.data(), g.size());
}

Tensor Tensor::clone() const {
    if (!n_) return Tensor();
    Tensor c = make_result(n_->shape, std::vector<float>(n_->data), false);
    c.n_->requires_grad = n_->requires_grad;
    return c;
}

namespace {

// grad(t) += s * g  (g has t's full size)
void add_grad(Tensor& t, float s, std::span<const float> g) {
    if (s == 1.0f) {
        t.accumulate_grad(g);
        return;
    }
    std::vector<float> tmp(g.size());
    active().scale(g.data(), s, tmp.data(), g.size());
    t.accumulate_grad(tmp);
}

}  // namespace

// ---- GradTape ------------------------------------------------------------

GradTape::GradTape() {
    if (g_tape) throw ContractError("GradTape: a tape is already active on this thread");
    g_tape = this;
}

GradTape::~GradTape() { g_tape = nullptr; }

GradTape* GradTape::current() { return g_tape; }

void GradTape::record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
}

void GradTape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward(): loss must be a defined scalar tensor");
    if (ops_.empty()) throw ContractError("backward(): tape recorded no operations");
    if (!loss.requires_grad())
        throw ContractError("backward(): loss does not require grad (not connected to the tape)");
    if (used_) throw ContractError("backward(): tape already swept");
    used_ = true;
    Tensor l = loss;
    const float one = 1.0f;
    l.accumulate_grad(std::span<const float>(&one, 1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---- expand --------------------------------------------------------------

Tensor expand(const Tensor& a, const Shape& shape) {
    check_defined(a, "expand");
    const Shape& in = a.shape();
    if (in == shape) return a;
    const int r_out = static_cast<int>(shape.size());
    const int r_in = static_cast<int>(in.size());
    if (r_in > r_out)
        throw DimensionError("expand: cannot expand " + shape_str(in) + " to lower-rank " +
                             shape_str(shape));
    // pad with leading singleton extents, then validate
    Shape pin(static_cast<std::size_t>(r_out), 1);
    for (int d = 0; d < r_in; ++d) pin[static_cast<std::size_t>(r_out - r_in + d)] = in[static_cast<std::size_t>(d)];
    for (int d = 0; d < r_out; ++d) {
        int ei = pin[static_cast<std::size_t>(d)], eo = shape[static_cast<std::size_t>(d)];
        if (ei != eo && ei != 1)
            throw DimensionError("expand: shape " + shape_str(in) + " does not broadcast to " +
                                 shape_str(shape));
    }
    auto in_strides = row_major_strides(pin);
    for (int d = 0; d < r_out; ++d)
        if (pin[static_cast<std::size_t>(d)] == 1 && shape[static_cast<std::size_t>(d)] != 1)
            in_strides[static_cast<std::size_t>(d)] = 0;
    auto out_strides = row_major_strides(shape);
    const std::size_t n = shape_numel(shape);
    std::vector<float> out(n);
    auto src = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i, off = 0;
        for (int d = 0; d < r_out; ++d) {
            std::size_t idx = rem / out_strides[static_cast<std::size_t>(d)];
            rem %= out_strides[static_cast<std::size_t>(d)];
            off += idx * in_strides[static_cast<std::size_t>(d)];
        }
        out[i] = src[off];
    }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(shape, std::move(out), req);
    if (req) {
        Tensor ac = a;
        Shape os = shape;
        record_op([ac, r, os, in_strides, out_strides, r_out]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> ga(ac.size(), 0.0f);
            for (std::size_t i = 0; i < g.size(); ++i) {
                std::size_t rem = i, off = 0;
                for (int d = 0; d < r_out; ++d) {
                    std::size_t idx = rem / out_strides[static_cast<std::size_t>(d)];
                    rem %= out_strides[static_cast<std::size_t>(d)];
                    off += idx * in_strides[static_cast<std::size_t>(d)];
                }
                ga[off] += g[i];
            }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

// ---- elementwise binary --------------------------------------------------

namespace {

struct BinOperands {
    Tensor a, b;
    Shape out_shape;
};

BinOperands prepare_binary(const Tensor& a, const Tensor& b, const char* op) {
    check_defined(a, op);
    check_defined(b, op);
    Shape os = broadcast_shape(a.shape(), b.shape(), op);
    Tensor aa = a.shape() == os ? a : expand(a, os);
    Tensor bb = b.shape() == os ? b : expand(b, os);
    return {std::move(aa), std::move(bb), std::move(os)};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    auto [aa, bb, os] = prepare_binary(a, b, "add");
    const std::size_t n = shape_numel(os);
    std::vector<float> out(n);
    active().add(aa.data().data(), bb.data().data(), out.data(), n);
    const bool req = grad_enabled(aa.requires_grad() || bb.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req)
        record_op([aa, bb, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            if (aa.requires_grad()) aa.accumulate_grad(g);
            if (bb.requires_grad()) bb.accumulate_grad(g);
        });
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    auto [aa, bb, os] = prepare_binary(a, b, "sub");
    const std::size_t n = shape_numel(os);
    std::vector<float> out(n);
    active().sub(aa.data().data(), bb.data().data(), out.data(), n);
    const bool req = grad_enabled(aa.requires_grad() || bb.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req)
        record_op([aa, bb, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            if (aa.requires_grad()) aa.accumulate_grad(g);
            if (bb.requires_grad()) add_grad(bb, -1.0f, g);
        });
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    auto [aa, bb, os] = prepare_binary(a, b, "mul");
    const std::size_t n = shape_numel(os);
    std::vector<float> out(n);
    active().mul(aa.data().data(), bb.data().data(), out.data(), n);
    const bool req = grad_enabled(aa.requires_grad() || bb.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req)
        record_op([aa, bb, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> tmp(g.size());
            if (aa.requires_grad()) {
                active().mul(g.data(), bb.data().data(), tmp.data(), g.size());
                aa.accumulate_grad(tmp);
            }
            if (bb.requires_grad()) {
                active().mul(g.data(), aa.data().data(), tmp.data(), g.size());
                bb.accumulate_grad(tmp);
            }
        });
    return r;
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_defined(b, "div");
    for (float v : b.data())
        if (std::fabs(v) < 1e-12f)
            throw NumericError("div: divisor magnitude below 1e-12");
    auto [aa, bb, os] = prepare_binary(a, b, "div");
    const std::size_t n = shape_numel(os);
    std::vector<float> out(n);
    active().div(aa.data().data(), bb.data().data(), out.data(), n);
    const bool req = grad_enabled(aa.requires_grad() || bb.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req)
        record_op([aa, bb, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> tmp(g.size());
            if (aa.requires_grad()) {
                active().div(g.data(), bb.data().data(), tmp.data(), g.size());
                aa.accumulate_grad(tmp);
            }
            if (bb.requires_grad()) {
                // d/db (a/b) = -a/b^2 = -out/b
                auto gd = g.data();
                auto ov = r.data();
                auto bv = bb.data();
                for (std::size_t i = 0; i < tmp.size(); ++i)
                    tmp[i] = -gd[i] * ov[i] / bv[i];
                bb.accumulate_grad(tmp);
            }
        });
    return r;
}

Tensor scale(const Tensor& a, double s) {
    check_defined(a, "scale");
    const std::size_t n = a.size();
    std::vector<float> out(n);
    const float sf = static_cast<float>(s);
    active().scale(a.data().data(), sf, out.data(), n);
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, sf]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            add_grad(ac, sf, g);
        });
    }
    return r;
}

// ---- matmul --------------------------------------------------------------

namespace {

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                             shape_str(t.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::size_t m = static_cast<std::size_t>(a.shape()[0]);
    const std::size_t k = static_cast<std::size_t>(a.shape()[1]);
    const std::size_t n = static_cast<std::size_t>(b.shape()[1]);
    if (static_cast<std::size_t>(b.shape()[0]) != k)
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::vector<float> out(m * n);
    active().gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    const bool req = grad_enabled(a.requires_grad() || b.requires_grad());
    Tensor r = make_result({static_cast<int>(m), static_cast<int>(n)}, std::move(out), req);
    if (req) {
        Tensor ac = a, bc = b;
        record_op([ac, bc, r, m, k, n]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            if (ac.requires_grad()) {
                // dA = G * B^T
                std::vector<float> da(m * k);
                active().gemm_nt(g.data(), bc.data().data(), da.data(), m, n, k, false);
                ac.accumulate_grad(da);
            }
            if (bc.requires_grad()) {
                // dB = A^T * G
                std::vector<float> db(k * n);
                active().gemm_tn(ac.data().data(), g.data(), db.data(), k, m, n, false);
                bc.accumulate_grad(db);
            }
        });
    }
    return r;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul_nt");
    check_defined(b, "matmul_nt");
    check_rank2(a, "matmul_nt");
    check_rank2(b, "matmul_nt");
    const std::size_t m = static_cast<std::size_t>(a.shape()[0]);
    const std::size_t k = static_cast<std::size_t>(a.shape()[1]);
    const std::size_t n = static_cast<std::size_t>(b.shape()[0]);
    if (static_cast<std::size_t>(b.shape()[1]) != k)
        throw DimensionError("matmul_nt: inner extents differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()) + "^T");
    std::vector<float> out(m * n);
    active().gemm_nt(a.data().data(), b.data().data(), out.data(), m, k, n, false);
    const bool req = grad_enabled(a.requires_grad() || b.requires_grad());
    Tensor r = make_result({static_cast<int>(m), static_cast<int>(n)}, std::move(out), req);
    if (req) {
        Tensor ac = a, bc = b;
        record_op([ac, bc, r, m, k, n]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            if (ac.requires_grad()) {
                // dA = G * B
                std::vector<float> da(m * k);
                active().gemm_nn(g.data(), bc.data().data(), da.data(), m, n, k, false);
                ac.accumulate_grad(da);
            }
            if (bc.requires_grad()) {
                // dB = G^T * A
                std::vector<float> db(n * k);
                active().gemm_tn(g.data(), ac.data().data(), db.data(), n, m, k, false);
                bc.accumulate_grad(db);
            }
        });
    }
    return r;
}

// ---- elementwise unary ---------------------------------------------------

Tensor sqrt(const Tensor& a) {
    check_defined(a, "sqrt");
    const std::size_t n = a.size();
    std::vector<float> out(n);
    auto src = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        if (src[i] < 0.0f) throw NumericError("sqrt: negative input");
        out[i] = std::sqrt(src[i]);
    }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            auto ov = r.data();
            std::vector<float> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * 0.5f / ov[i];
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor exp(const Tensor& a) {
    check_defined(a, "exp");
    const std::size_t n = a.size();
    std::vector<float> out(n);
    auto src = a.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(src[i]);
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> ga(g.size());
            active().mul(g.data(), r.data().data(), ga.data(), g.size());
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor log(const Tensor& a) {
    check_defined(a, "log");
    const std::size_t n = a.size();
    std::vector<float> out(n);
    auto src = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        if (src[i] <= 0.0f) throw NumericError("log: non-positive input");
        out[i] = std::log(src[i]);
    }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> ga(g.size());
            active().div(g.data(), ac.data().data(), ga.data(), g.size());
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

namespace {

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

}  // namespace

Tensor gelu(const Tensor& a) {
    check_defined(a, "gelu");
    const std::size_t n = a.size();
    std::vector<float> out(n);
    auto src = a.data();
    for (std::size_t i = 0; i < n; ++i) {
        const float x = src[i];
        const float t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        out[i] = 0.5f * x * (1.0f + t);
    }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            auto xv = ac.data();
            std::vector<float> ga(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                const float x = xv[i];
                const float u = kGeluC * (x + kGeluA * x * x * x);
                const float t = std::tanh(u);
                const float du = kGeluC * (1.0f + 3.0f * kGeluA * x * x);
                const float d = 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
                ga[i] = g[i] * d;
            }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

// ---- axis reductions / normalizations ------------------------------------

namespace {

struct AxisSplit {
    std::size_t outer, len, inner;
};

AxisSplit axis_split(const Shape& s, int axis) {
    AxisSplit sp{1, static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]), 1};
    for (int d = 0; d < axis; ++d) sp.outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(d)]);
    for (int d = axis + 1; d < static_cast<int>(s.size()); ++d)
        sp.inner *= static_cast<std::size_t>(s[static_cast<std::size_t>(d)]);
    return sp;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
    check_defined(a, "softmax");
    const int ax = norm_axis(axis, a.rank(), "softmax");
    const auto sp = axis_split(a.shape(), ax);
    std::vector<float> out(a.size());
    auto src = a.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.len * sp.inner + in;
            float mx = src[base];
            for (std::size_t j = 1; j < sp.len; ++j)
                mx = std::max(mx, src[base + j * sp.inner]);
            double denom = 0.0;
            for (std::size_t j = 0; j < sp.len; ++j) {
                const float e = std::exp(src[base + j * sp.inner] - mx);
                out[base + j * sp.inner] = e;
                denom += e;
            }
            const float inv = static_cast<float>(1.0 / denom);
            for (std::size_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] *= inv;
        }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, sp]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            auto y = r.data();
            std::vector<float> ga(g.size());
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const std::size_t base = o * sp.len * sp.inner + in;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < sp.len; ++j) {
                        const std::size_t idx = base + j * sp.inner;
                        dot += static_cast<double>(g[idx]) * y[idx];
                    }
                    const float dotf = static_cast<float>(dot);
                    for (std::size_t j = 0; j < sp.len; ++j) {
                        const std::size_t idx = base + j * sp.inner;
                        ga[idx] = y[idx] * (g[idx] - dotf);
                    }
                }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor layer_norm(const Tensor& a, int axis, float eps) {
    check_defined(a, "layer_norm");
    const int ax = norm_axis(axis, a.rank(), "layer_norm");
    const auto sp = axis_split(a.shape(), ax);
    std::vector<float> out(a.size());
    std::vector<float> invs(sp.outer * sp.inner);
    auto src = a.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.len * sp.inner + in;
            double mu = 0.0;
            for (std::size_t j = 0; j < sp.len; ++j) mu += src[base + j * sp.inner];
            mu /= static_cast<double>(sp.len);
            double var = 0.0;
            for (std::size_t j = 0; j < sp.len; ++j) {
                const double d = src[base + j * sp.inner] - mu;
                var += d * d;
            }
            var /= static_cast<double>(sp.len);
            const float inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
            invs[o * sp.inner + in] = inv;
            const float muf = static_cast<float>(mu);
            for (std::size_t j = 0; j < sp.len; ++j) {
                const std::size_t idx = base + j * sp.inner;
                out[idx] = (src[idx] - muf) * inv;
            }
        }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(a.shape(), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, sp, invs = std::move(invs)]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            auto y = r.data();
            std::vector<float> ga(g.size());
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const std::size_t base = o * sp.len * sp.inner + in;
                    const float inv = invs[o * sp.inner + in];
                    double mg = 0.0, mgy = 0.0;
                    for (std::size_t j = 0; j < sp.len; ++j) {
                        const std::size_t idx = base + j * sp.inner;
                        mg += g[idx];
                        mgy += static_cast<double>(g[idx]) * y[idx];
                    }
                    mg /= static_cast<double>(sp.len);
                    mgy /= static_cast<double>(sp.len);
                    const float mgf = static_cast<float>(mg), mgyf = static_cast<float>(mgy);
                    for (std::size_t j = 0; j < sp.len; ++j) {
                        const std::size_t idx = base + j * sp.inner;
                        ga[idx] = inv * (g[idx] - mgf - y[idx] * mgyf);
                    }
                }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor mean(const Tensor& a, int axis) {
    check_defined(a, "mean");
    const int ax = norm_axis(axis, a.rank(), "mean");
    const auto sp = axis_split(a.shape(), ax);
    Shape os;
    for (int d = 0; d < a.rank(); ++d)
        if (d != ax) os.push_back(a.shape()[static_cast<std::size_t>(d)]);
    if (os.empty()) os = {1};
    std::vector<float> out(sp.outer * sp.inner);
    auto src = a.data();
    const double invn = 1.0 / static_cast<double>(sp.len);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.len * sp.inner + in;
            double acc = 0.0;
            for (std::size_t j = 0; j < sp.len; ++j) acc += src[base + j * sp.inner];
            out[o * sp.inner + in] = static_cast<float>(acc * invn);
        }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, sp]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            const float invn = 1.0f / static_cast<float>(sp.len);
            std::vector<float> ga(ac.size());
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const float gv = g[o * sp.inner + in] * invn;
                    const std::size_t base = o * sp.len * sp.inner + in;
                    for (std::size_t j = 0; j < sp.len; ++j) ga[base + j * sp.inner] = gv;
                }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor sum(const Tensor& a) {
    check_defined(a, "sum");
    const double s = active().sum(a.data().data(), a.size());
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result({1}, {static_cast<float>(s)}, req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> ga(ac.size(), g[0]);
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_defined(a, "mse");
    check_defined(b, "mse");
    if (a.shape() != b.shape())
        throw DimensionError("mse: shapes differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t n = a.size();
    const double s = active().sqdiff_sum(a.data().data(), b.data().data(), n);
    const bool req = grad_enabled(a.requires_grad() || b.requires_grad());
    Tensor r = make_result({1}, {static_cast<float>(s / static_cast<double>(n))}, req);
    if (req) {
        Tensor ac = a, bc = b;
        record_op([ac, bc, r, n]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            const float c = 2.0f * g[0] / static_cast<float>(n);
            auto av = ac.data();
            auto bv = bc.data();
            std::vector<float> d(n);
            for (std::size_t i = 0; i < n; ++i) d[i] = c * (av[i] - bv[i]);
            if (ac.requires_grad()) ac.accumulate_grad(d);
            if (bc.requires_grad()) {
                for (std::size_t i = 0; i < n; ++i) d[i] = -d[i];
                bc.accumulate_grad(d);
            }
        });
    }
    return r;
}

// ---- shape ops -----------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    check_defined(a, "reshape");
    if (shape_numel(shape) != a.size())
        throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                             " changes element count");
    std::vector<float> out(a.data().begin(), a.data().end());
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(std::move(shape), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            ac.accumulate_grad(g);  // same linear order
        });
    }
    return r;
}

namespace {

std::vector<float> transpose_copy(const Shape& s, std::span<const float> src, int ax0, int ax1,
                                  Shape& out_shape) {
    out_shape = s;
    std::swap(out_shape[static_cast<std::size_t>(ax0)], out_shape[static_cast<std::size_t>(ax1)]);
    const auto in_strides = row_major_strides(s);
    auto perm_strides = in_strides;
    std::swap(perm_strides[static_cast<std::size_t>(ax0)], perm_strides[static_cast<std::size_t>(ax1)]);
    const auto out_strides = row_major_strides(out_shape);
    const std::size_t n = src.size();
    const int r = static_cast<int>(s.size());
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rem = i, off = 0;
        for (int d = 0; d < r; ++d) {
            const std::size_t idx = rem / out_strides[static_cast<std::size_t>(d)];
            rem %= out_strides[static_cast<std::size_t>(d)];
            off += idx * perm_strides[static_cast<std::size_t>(d)];
        }
        out[i] = src[off];
    }
    return out;
}

}  // namespace

Tensor transpose(const Tensor& a, int ax0, int ax1) {
    check_defined(a, "transpose");
    const int r0 = norm_axis(ax0, a.rank(), "transpose");
    const int r1 = norm_axis(ax1, a.rank(), "transpose");
    Shape os;
    std::vector<float> out = transpose_copy(a.shape(), a.data(), r0, r1, os);
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, r0, r1]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            Shape back;
            std::vector<float> ga = transpose_copy(r.shape(), g, r0, r1, back);
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
    check_defined(a, "slice");
    const int ax = norm_axis(axis, a.rank(), "slice");
    const int extent = a.shape()[static_cast<std::size_t>(ax)];
    if (start < 0 || len <= 0 || start + len > extent)
        throw DimensionError("slice: range [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") out of bounds for extent " +
                             std::to_string(extent));
    const auto sp = axis_split(a.shape(), ax);
    Shape os = a.shape();
    os[static_cast<std::size_t>(ax)] = len;
    std::vector<float> out(sp.outer * static_cast<std::size_t>(len) * sp.inner);
    auto src = a.data();
    const std::size_t row = sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
        const float* sp_in = src.data() + (o * sp.len + static_cast<std::size_t>(start)) * row;
        float* sp_out = out.data() + o * static_cast<std::size_t>(len) * row;
        std::memcpy(sp_out, sp_in, static_cast<std::size_t>(len) * row * sizeof(float));
    }
    const bool req = grad_enabled(a.requires_grad());
    Tensor r = make_result(std::move(os), std::move(out), req);
    if (req) {
        Tensor ac = a;
        record_op([ac, r, sp, start, len]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::vector<float> ga(ac.size(), 0.0f);
            const std::size_t row = sp.inner;
            for (std::size_t o = 0; o < sp.outer; ++o) {
                const float* gsrc = g.data() + o * static_cast<std::size_t>(len) * row;
                float* gdst = ga.data() + (o * sp.len + static_cast<std::size_t>(start)) * row;
                std::memcpy(gdst, gsrc, static_cast<std::size_t>(len) * row * sizeof(float));
            }
            ac.accumulate_grad(ga);
        });
    }
    return r;
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    for (const Tensor& p : parts) check_defined(p, "concat");
    const int rank = parts[0].rank();
    const int ax = norm_axis(axis, rank, "concat");
    Shape os = parts[0].shape();
    int total = os[static_cast<std::size_t>(ax)];
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const Shape& s = parts[p].shape();
        if (static_cast<int>(s.size()) != rank)
            throw DimensionError("concat: rank mismatch between inputs");
        for (int d = 0; d < rank; ++d)
            if (d != ax && s[static_cast<std::size_t>(d)] != os[static_cast<std::size_t>(d)])
                throw DimensionError("concat: shape " + shape_str(s) +
                                     " incompatible with " + shape_str(parts[0].shape()) +
                                     " along axis " + std::to_string(ax));
        total += s[static_cast<std::size_t>(ax)];
    }
    os[static_cast<std::size_t>(ax)] = total;
    const auto sp_out = axis_split(os, ax);
    std::vector<float> out(shape_numel(os));
    bool any_req = false;
    std::size_t off_len = 0;
    for (const Tensor& p : parts) {
        any_req = any_req || p.requires_grad();
        const std::size_t plen = static_cast<std::size_t>(p.shape()[static_cast<std::size_t>(ax)]);
        auto src = p.data();
        for (std::size_t o = 0; o < sp_out.outer; ++o) {
            const float* s = src.data() + o * plen * sp_out.inner;
            float* d = out.data() + (o * sp_out.len + off_len) * sp_out.inner;
            std::memcpy(d, s, plen * sp_out.inner * sizeof(float));
        }
        off_len += plen;
    }
    const bool req = grad_enabled(any_req);
    Tensor r = make_result(os, std::move(out), req);
    if (req) {
        std::vector<Tensor> held(parts.begin(), parts.end());
        record_op([held = std::move(held), r, sp_out, ax]() mutable {
            auto g = r.grad();
            if (g.empty()) return;
            std::size_t off_len = 0;
            for (Tensor& p : held) {
                const std::size_t plen =
                    static_cast<std::size_t>(p.shape()[static_cast<std::size_t>(ax)]);
                if (p.requires_grad()) {
                    std::vector<float> gp(p.size());
                    for (std::size_t o = 0; o < sp_out.outer; ++o) {
                        const float* s = g.data() + (o * sp_out.len + off_len) * sp_out.inner;
                        float* d = gp.data() + o * plen * sp_out.inner;
                        std::memcpy(d, s, plen * sp_out.inner * sizeof(float));
                    }
                    p.accumulate_grad(gp);
                }
                off_len += plen;
            }
        });
    }
    return r;
}

Tensor randn(const Shape& shape, Rng& rng) {
    const std::size_t n = shape_numel(shape);
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(rng.normal());
    return make_result(shape, std::move(data), false);
}

}  // namespace viewpaint
