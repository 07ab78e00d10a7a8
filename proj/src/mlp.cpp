#include "csisim/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace csisim {

Mlp::Mlp(int in_dim, int hidden, int out_dim, Rng& rng) {
    auto init = [&rng](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        const double scale = std::sqrt(1.0 / cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
        return m;
    };
    w_ = {init(hidden, in_dim), init(hidden, hidden), init(out_dim, hidden)};
    b_ = {Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden),
          Eigen::VectorXd::Zero(out_dim)};
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd h = (w_[0] * x + b_[0]).array().tanh();
    h = (w_[1] * h + b_[1]).array().tanh();
    return w_[2] * h + b_[2];
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Cache& cache) const {
    cache.x = x;
    cache.a1 = w_[0] * x + b_[0];
    cache.h1 = cache.a1.array().tanh();
    cache.a2 = w_[1] * cache.h1 + b_[1];
    cache.h2 = cache.a2.array().tanh();
    cache.out = w_[2] * cache.h2 + b_[2];
    return cache.out;
}

void Mlp::Gradients::setZero(const Mlp& net) {
    w.clear();
    b.clear();
    for (const auto& wm : net.w_) w.push_back(Eigen::MatrixXd::Zero(wm.rows(), wm.cols()));
    for (const auto& bv : net.b_) b.push_back(Eigen::VectorXd::Zero(bv.size()));
}

void Mlp::Gradients::axpy(double scale, const Gradients& other) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * other.w[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * other.b[i];
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                              Gradients& grads) const {
    grads.w[2] += grad_out * cache.h2.transpose();
    grads.b[2] += grad_out;
    Eigen::VectorXd g = w_[2].transpose() * grad_out;
    g.array() *= 1.0 - cache.h2.array().square();

    grads.w[1] += g * cache.h1.transpose();
    grads.b[1] += g;
    g = w_[1].transpose() * g;
    g.array() *= 1.0 - cache.h1.array().square();

    grads.w[0] += g * cache.x.transpose();
    grads.b[0] += g;
    return w_[0].transpose() * g;
}

int Mlp::parameter_count() const {
    int n = 0;
    for (const auto& wm : w_) n += static_cast<int>(wm.size());
    for (const auto& bv : b_) n += static_cast<int>(bv.size());
    return n;
}

double Mlp::get_parameter(int index) const {
    for (const auto& wm : w_) {
        if (index < wm.size()) return wm(index / wm.cols(), index % wm.cols());
        index -= static_cast<int>(wm.size());
    }
    for (const auto& bv : b_) {
        if (index < bv.size()) return bv(index);
        index -= static_cast<int>(bv.size());
    }
    throw std::out_of_range("mlp: parameter index");
}

void Mlp::set_parameter(int index, double value) {
    for (auto& wm : w_) {
        if (index < wm.size()) {
            wm(index / wm.cols(), index % wm.cols()) = value;
            return;
        }
        index -= static_cast<int>(wm.size());
    }
    for (auto& bv : b_) {
        if (index < bv.size()) {
            bv(index) = value;
            return;
        }
        index -= static_cast<int>(bv.size());
    }
    throw std::out_of_range("mlp: parameter index");
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(parameter_count()));
    for (const auto& wm : w_)
        for (int i = 0; i < wm.rows(); ++i)
            for (int j = 0; j < wm.cols(); ++j) out.push_back(wm(i, j));
    for (const auto& bv : b_)
        for (int i = 0; i < bv.size(); ++i) out.push_back(bv(i));
    return out;
}

void Mlp::set_parameters(const std::vector<double>& flat) {
    std::size_t k = 0;
    for (auto& wm : w_)
        for (int i = 0; i < wm.rows(); ++i)
            for (int j = 0; j < wm.cols(); ++j) wm(i, j) = flat.at(k++);
    for (auto& bv : b_)
        for (int i = 0; i < bv.size(); ++i) bv(i) = flat.at(k++);
    if (k != flat.size()) throw std::invalid_argument("mlp: parameter vector size mismatch");
}

AdamOptimizer::AdamOptimizer(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.setZero(net);
    v_.setZero(net);
}

void AdamOptimizer::step(Mlp& net, const Mlp::Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < net.w_.size(); ++i) {
        m_.w[i] = beta1_ * m_.w[i] + (1.0 - beta1_) * grads.w[i];
        v_.w[i] = beta2_ * v_.w[i] + (1.0 - beta2_) * grads.w[i].array().square().matrix();
        net.w_[i].array() -=
            lr_ * (m_.w[i].array() / c1) / ((v_.w[i].array() / c2).sqrt() + eps_);
    }
    for (std::size_t i = 0; i < net.b_.size(); ++i) {
        m_.b[i] = beta1_ * m_.b[i] + (1.0 - beta1_) * grads.b[i];
        v_.b[i] = beta2_ * v_.b[i] + (1.0 - beta2_) * grads.b[i].array().square().matrix();
        net.b_[i].array() -=
            lr_ * (m_.b[i].array() / c1) / ((v_.b[i].array() / c2).sqrt() + eps_);
    }
}

void soft_update(Mlp& target, const Mlp& source, double rate) {
    for (std::size_t i = 0; i < target.w_.size(); ++i)
        target.w_[i] = (1.0 - rate) * target.w_[i] + rate * source.w_[i];
    for (std::size_t i = 0; i < target.b_.size(); ++i)
        target.b_[i] = (1.0 - rate) * target.b_[i] + rate * source.b_[i];
}

} // namespace csisim
