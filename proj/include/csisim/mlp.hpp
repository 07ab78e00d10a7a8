#pragma once

#include <vector>

#include <Eigen/Dense>

#include "csisim/rng.hpp"

namespace csisim {

// Two-hidden-layer tanh perceptron with explicit backprop. Small enough
// that everything stays dense and single precision is never needed.
class Mlp {
  public:
    Mlp() = default;
    Mlp(int in_dim, int hidden, int out_dim, Rng& rng);

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

    struct Cache {
        Eigen::VectorXd x, a1, h1, a2, h2, out;
    };
    Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache& cache) const;

    struct Gradients {
        std::vector<Eigen::MatrixXd> w;
        std::vector<Eigen::VectorXd> b;
        void setZero(const Mlp& net);
        void axpy(double scale, const Gradients& other);
    };

    // Accumulates parameter gradients for dL/dout = grad_out and returns
    // dL/dx.
    Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                             Gradients& grads) const;

    int input_dim() const { return w_.empty() ? 0 : static_cast<int>(w_[0].cols()); }
    int output_dim() const { return w_.empty() ? 0 : static_cast<int>(w_.back().rows()); }

    // Flat parameter access (layer order, row-major weights then biases).
    int parameter_count() const;
    double get_parameter(int index) const;
    void set_parameter(int index, double value);
    std::vector<double> parameters() const;
    void set_parameters(const std::vector<double>& flat);

    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }

    friend class AdamOptimizer;
    friend void soft_update(Mlp& target, const Mlp& source, double rate);

  private:
    std::vector<Eigen::MatrixXd> w_;
    std::vector<Eigen::VectorXd> b_;
};

class AdamOptimizer {
  public:
    AdamOptimizer(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step(Mlp& net, const Mlp::Gradients& grads);
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    Mlp::Gradients m_, v_;
};

// target <- (1 - rate) * target + rate * source
void soft_update(Mlp& target, const Mlp& source, double rate);

} // namespace csisim
