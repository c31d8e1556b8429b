#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace modcl::nn {

/// Activations are stored channels x (batch * length): column n*L + t holds
/// time step t of sample n. Vectors (one per sample) are features x batch.
using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

enum class Mode { Train, Eval };

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Visits every persistent tensor (trainable or not) in declaration order.
using StateVisitor = std::function<void(const std::string& name, Matrix& tensor)>;

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void fan_in_uniform(Matrix& w, int fan_in, std::mt19937_64& rng);

inline constexpr float kLeakySlope = 0.01F;

class Conv1d {
 public:
  struct Cache {
    Matrix cols;
    int batch = 0;
    int length = 0;
  };

  Conv1d(std::string name, int in_channels, int out_channels, int kernel, std::mt19937_64& rng);

  Matrix forward(const Matrix& x, int batch, int length, Cache* cache) const;
  /// Accumulates weight/bias gradients; returns d/dx unless `need_input_grad` is false.
  Matrix backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad);

  void parameters(std::vector<Parameter*>& out) { out.push_back(&weight_); out.push_back(&bias_); }
  void visit(const StateVisitor& f) { f(weight_.name, weight_.value); f(bias_.name, bias_.value); }

  [[nodiscard]] int out_channels() const noexcept { return out_; }

 private:
  int in_;
  int out_;
  int kernel_;
  Parameter weight_;  // out x (in * kernel), column j*in + c
  Parameter bias_;    // out x 1
};

/// Per-row normalization across all columns (batch and time).
class BatchNorm {
 public:
  struct Cache {
    Matrix normalized;
    Vector inv_std;
    Mode mode = Mode::Train;
  };

  BatchNorm(std::string name, int channels, float momentum = 0.1F, float eps = 1e-5F);

  Matrix forward(const Matrix& x, Mode mode, Cache* cache);
  Matrix backward(const Matrix& grad_out, const Cache& cache);

  void parameters(std::vector<Parameter*>& out) { out.push_back(&gamma_); out.push_back(&beta_); }
  void visit(const StateVisitor& f);

 private:
  float momentum_;
  float eps_;
  Parameter gamma_;
  Parameter beta_;
  std::string name_;
  Matrix running_mean_;
  Matrix running_var_;
};

struct LeakyReluCache {
  Matrix input;
};
Matrix leaky_relu(const Matrix& x, LeakyReluCache* cache);
Matrix leaky_relu_backward(const Matrix& grad_out, const LeakyReluCache& cache);

/// Width-2 stride-2 max pooling along time; lengths below 2 pass through.
struct MaxPoolCache {
  std::vector<Eigen::Index> argmax;
  int batch = 0;
  int in_length = 0;
  int out_length = 0;
};
int pooled_length(int length) noexcept;
Matrix max_pool(const Matrix& x, int batch, int length, MaxPoolCache* cache);
Matrix max_pool_backward(const Matrix& grad_out, const MaxPoolCache& cache, Eigen::Index channels);

Matrix global_average_pool(const Matrix& x, int batch, int length);
Matrix global_average_pool_backward(const Matrix& grad_out, int batch, int length);

class Linear {
 public:
  struct Cache {
    Matrix input;
  };

  Linear(std::string name, int in_features, int out_features, std::mt19937_64& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad = true);

  void parameters(std::vector<Parameter*>& out) { out.push_back(&weight_); out.push_back(&bias_); }
  void visit(const StateVisitor& f) { f(weight_.name, weight_.value); f(bias_.name, bias_.value); }

  [[nodiscard]] int in_features() const noexcept { return static_cast<int>(weight_.value.cols()); }
  [[nodiscard]] int out_features() const noexcept { return static_cast<int>(weight_.value.rows()); }
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }

 private:
  Parameter weight_;  // out x in
  Parameter bias_;    // out x 1
};

/// Adam without weight decay or schedule.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, double learning_rate = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();
  [[nodiscard]] std::int64_t steps() const noexcept { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::int64_t t_ = 0;
};

}  // namespace modcl::nn
