#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "cfdebias/error.hpp"

namespace cfdebias {

enum class Activation : std::uint32_t { Tanh = 0, Sigmoid = 1, Linear = 2 };

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    // split keeps exp() from overflowing for large |x|
    if (x >= Scalar(0))
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

inline void require_shape(bool ok, const char* what)
{
    if (!ok)
        fail(ErrorCode::ShapeMismatch, what);
}

} // namespace detail

/// One-hidden-layer perceptron: y = act(W2 tanh(W1 x + b1) + b2).
///
/// Inputs are batched column-wise, so `x` is n_in x B and `y` is n_out x B.
template <typename Scalar>
struct Mlp {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    Activation out_activation = Activation::Linear;

    Eigen::Index inputs() const { return w1.cols(); }
    Eigen::Index hidden() const { return w1.rows(); }
    Eigen::Index outputs() const { return w2.rows(); }
    Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    static Mlp zeros(Eigen::Index n_in, Eigen::Index n_hidden, Eigen::Index n_out, Activation act)
    {
        return Mlp{Matrix::Zero(n_hidden, n_in), Vector::Zero(n_hidden), Matrix::Zero(n_out, n_hidden),
                   Vector::Zero(n_out), act};
    }

    /// Xavier-uniform weights, zero biases.
    template <class Rng>
    static Mlp xavier(Eigen::Index n_in, Eigen::Index n_hidden, Eigen::Index n_out, Activation act, Rng& rng)
    {
        Mlp m = zeros(n_in, n_hidden, n_out, act);
        auto fill = [&rng](Matrix& w) {
            const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i)
                    w(i, j) = static_cast<Scalar>(dist(rng));
        };
        fill(m.w1);
        fill(m.w2);
        return m;
    }

    bool shapes_consistent() const
    {
        return b1.size() == w1.rows() && w2.cols() == w1.rows() && b2.size() == w2.rows();
    }

    /// Parameters in the order w1, b1, w2, b2 (column-major blocks).
    Vector flatten() const
    {
        Vector out(parameter_count());
        Eigen::Index at = 0;
        auto put = [&](const auto& block) {
            out.segment(at, block.size()) = block.reshaped();
            at += block.size();
        };
        put(w1);
        put(b1);
        put(w2);
        put(b2);
        return out;
    }

    void assign(const Eigen::Ref<const Vector>& flat)
    {
        detail::require_shape(flat.size() == parameter_count(), "flat parameter length mismatch");
        Eigen::Index at = 0;
        auto take = [&](auto& block) {
            block.reshaped() = flat.segment(at, block.size());
            at += block.size();
        };
        take(w1);
        take(b1);
        take(w2);
        take(b2);
    }
};

/// Gradient of a scalar loss with respect to every Mlp parameter block.
template <typename Scalar>
struct MlpGradient {
    using Matrix = typename Mlp<Scalar>::Matrix;
    using Vector = typename Mlp<Scalar>::Vector;

    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;

    static MlpGradient zeros_like(const Mlp<Scalar>& p)
    {
        return {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
                Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
    }

    MlpGradient& operator+=(const MlpGradient& o)
    {
        w1 += o.w1;
        b1 += o.b1;
        w2 += o.w2;
        b2 += o.b2;
        return *this;
    }

    MlpGradient& operator*=(Scalar s)
    {
        w1 *= s;
        b1 *= s;
        w2 *= s;
        b2 *= s;
        return *this;
    }

    Vector flatten() const
    {
        Vector out(w1.size() + b1.size() + w2.size() + b2.size());
        out << w1.reshaped(), b1, w2.reshaped(), b2;
        return out;
    }

    bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }
};

template <typename Scalar>
struct MlpCache {
    typename Mlp<Scalar>::Matrix input;
    typename Mlp<Scalar>::Matrix hidden; // tanh activations
    typename Mlp<Scalar>::Matrix output; // post output activation
};

template <typename Scalar>
struct MlpForward {
    typename Mlp<Scalar>::Matrix output;
    MlpCache<Scalar> cache;
};

template <typename Scalar>
struct MlpBackward {
    MlpGradient<Scalar> grads;
    typename Mlp<Scalar>::Matrix dx;
};

template <typename Scalar>
MlpForward<Scalar> mlp_forward(const Mlp<Scalar>& p, const typename Mlp<Scalar>::Matrix& x)
{
    detail::require_shape(p.shapes_consistent(), "inconsistent MLP parameter shapes");
    detail::require_shape(x.rows() == p.inputs(), "MLP input has wrong length");
    MlpForward<Scalar> f;
    f.cache.input = x;
    f.cache.hidden = ((p.w1 * x).colwise() + p.b1).array().tanh().matrix();
    typename Mlp<Scalar>::Matrix pre = (p.w2 * f.cache.hidden).colwise() + p.b2;
    switch (p.out_activation) {
    case Activation::Tanh:
        f.cache.output = pre.array().tanh().matrix();
        break;
    case Activation::Sigmoid:
        f.cache.output = pre.unaryExpr([](Scalar v) { return detail::sigmoid(v); });
        break;
    case Activation::Linear:
        f.cache.output = std::move(pre);
        break;
    }
    f.output = f.cache.output;
    return f;
}

template <typename Scalar>
typename Mlp<Scalar>::Matrix mlp_apply(const Mlp<Scalar>& p, const typename Mlp<Scalar>::Matrix& x)
{
    return mlp_forward(p, x).output;
}

/// Exact gradients of sum(dy .* y) with respect to the parameters and input;
/// gradients are summed over the batch columns.
template <typename Scalar>
MlpBackward<Scalar> mlp_backward(const Mlp<Scalar>& p, const MlpCache<Scalar>& cache,
                                 const typename Mlp<Scalar>::Matrix& dy)
{
    using Matrix = typename Mlp<Scalar>::Matrix;
    detail::require_shape(dy.rows() == p.outputs() && dy.cols() == cache.output.cols(),
                          "upstream gradient shape does not match forward output");
    detail::require_shape(cache.input.rows() == p.inputs() && cache.hidden.rows() == p.hidden(),
                          "activation cache does not match parameters");

    Matrix dpre;
    switch (p.out_activation) {
    case Activation::Tanh:
        dpre = (dy.array() * (Scalar(1) - cache.output.array().square())).matrix();
        break;
    case Activation::Sigmoid:
        dpre = (dy.array() * cache.output.array() * (Scalar(1) - cache.output.array())).matrix();
        break;
    case Activation::Linear:
        dpre = dy;
        break;
    }

    MlpBackward<Scalar> b;
    b.grads.w2 = dpre * cache.hidden.transpose();
    b.grads.b2 = dpre.rowwise().sum();
    const Matrix dhidden =
        ((p.w2.transpose() * dpre).array() * (Scalar(1) - cache.hidden.array().square())).matrix();
    b.grads.w1 = dhidden * cache.input.transpose();
    b.grads.b1 = dhidden.rowwise().sum();
    b.dx = p.w1.transpose() * dhidden;
    return b;
}

/// Gradient reversal: identity forward.
template <typename Derived>
const Eigen::MatrixBase<Derived>& grl_forward(const Eigen::MatrixBase<Derived>& x)
{
    return x;
}

/// Gradient reversal: backward multiplies the upstream gradient by -lambda.
template <typename Derived>
typename Derived::PlainObject grl_backward(const Eigen::MatrixBase<Derived>& upstream,
                                           typename Derived::Scalar lambda)
{
    return -lambda * upstream;
}

// --- Adam -----------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Vector m;
    Vector v;
    std::int64_t t = 0;
    Scalar lr = Scalar(1e-5);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    static AdamState init(Eigen::Index n, const AdamConfig& cfg = {})
    {
        return {Vector::Zero(n), Vector::Zero(n), 0, static_cast<Scalar>(cfg.lr), static_cast<Scalar>(cfg.beta1),
                static_cast<Scalar>(cfg.beta2), static_cast<Scalar>(cfg.eps)};
    }
};

/// Bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& s, Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> params,
               const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& grads)
{
    detail::require_shape(params.size() == grads.size() && s.m.size() == params.size() &&
                              s.v.size() == params.size(),
                          "Adam state, parameters and gradients differ in length");
    if (!grads.allFinite())
        fail(ErrorCode::NonFiniteGradient, "Adam received a non-finite gradient");
    s.t += 1;
    s.m = s.beta1 * s.m + (Scalar(1) - s.beta1) * grads;
    s.v = s.beta2 * s.v + (Scalar(1) - s.beta2) * grads.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(s.beta1, static_cast<Scalar>(s.t));
    const Scalar c2 = Scalar(1) - std::pow(s.beta2, static_cast<Scalar>(s.t));
    params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

/// Adam bound to one network; keeps the flattened moment vectors.
template <typename Scalar>
class MlpOptimizer {
public:
    MlpOptimizer() = default;
    MlpOptimizer(const Mlp<Scalar>& net, const AdamConfig& cfg)
        : state_(AdamState<Scalar>::init(net.parameter_count(), cfg))
    {
    }

    void step(Mlp<Scalar>& net, const MlpGradient<Scalar>& grad)
    {
        typename Mlp<Scalar>::Vector flat = net.flatten();
        adam_step<Scalar>(state_, flat, grad.flatten());
        net.assign(flat);
    }

    const AdamState<Scalar>& state() const { return state_; }

private:
    AdamState<Scalar> state_;
};

// --- gradient checking ------------------------------------------------------------

struct FiniteDiffReport {
    double max_relative_error = 0.0;
    Eigen::Index worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares `analytic` with central differences of `loss` at `params`.
/// Per entry: |a - n| / max(1e-12, |a| + |n|); reports the maximum.
FiniteDiffReport finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                                   const Eigen::VectorXd& params, const Eigen::VectorXd& analytic, double h);

using MlpParams = Mlp<double>;
using Gradient = MlpGradient<double>;

} // namespace cfdebias
