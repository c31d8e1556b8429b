#include "modcl/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace modcl::nn {

void fan_in_uniform(Matrix& w, int fan_in, std::mt19937_64& rng) {
  const float bound = 1.0F / std::sqrt(static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, int in_channels, int out_channels, int kernel, std::mt19937_64& rng)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
  if (kernel % 2 != 1) throw std::invalid_argument("Conv1d: kernel size must be odd");
  weight_.name = name + ".weight";
  weight_.value.resize(out_channels, in_channels * kernel);
  fan_in_uniform(weight_.value, in_channels * kernel, rng);
  bias_.name = name + ".bias";
  bias_.value = Matrix::Zero(out_channels, 1);
  weight_.zero_grad();
  bias_.zero_grad();
}

// Column layout of the unfolded input: row j*in + c holds channel c at tap j.
Matrix Conv1d::forward(const Matrix& x, int batch, int length, Cache* cache) const {
  if (x.rows() != in_ || x.cols() != static_cast<Eigen::Index>(batch) * length) {
    throw std::invalid_argument("Conv1d: input shape mismatch");
  }
  const int pad = kernel_ / 2;
  Matrix cols(static_cast<Eigen::Index>(in_) * kernel_, x.cols());
  const auto rows = static_cast<std::size_t>(in_);
  for (int n = 0; n < batch; ++n) {
    for (int t = 0; t < length; ++t) {
      float* dst = cols.data() + static_cast<std::size_t>(n * length + t) * cols.rows();
      for (int j = 0; j < kernel_; ++j) {
        const int src = t + j - pad;
        float* d = dst + static_cast<std::size_t>(j) * rows;
        if (src < 0 || src >= length) {
          std::memset(d, 0, rows * sizeof(float));
        } else {
          std::memcpy(d, x.data() + static_cast<std::size_t>(n * length + src) * rows,
                      rows * sizeof(float));
        }
      }
    }
  }
  Matrix y(out_, x.cols());
  y.noalias() = weight_.value * cols;
  y.colwise() += bias_.value.col(0);
  if (cache != nullptr) {
    cache->cols = std::move(cols);
    cache->batch = batch;
    cache->length = length;
  }
  return y;
}

Matrix Conv1d::backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad) {
  weight_.grad.noalias() += grad_out * cache.cols.transpose();
  bias_.grad.col(0) += grad_out.rowwise().sum();
  if (!need_input_grad) return {};

  const Matrix dcols = weight_.value.transpose() * grad_out;
  const int pad = kernel_ / 2;
  const int length = cache.length;
  Matrix dx = Matrix::Zero(in_, grad_out.cols());
  for (int n = 0; n < cache.batch; ++n) {
    for (int t = 0; t < length; ++t) {
      const auto col = static_cast<Eigen::Index>(n * length + t);
      for (int j = 0; j < kernel_; ++j) {
        const int src = t + j - pad;
        if (src < 0 || src >= length) continue;
        dx.col(n * length + src) += dcols.block(static_cast<Eigen::Index>(j) * in_, col, in_, 1);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, int channels, float momentum, float eps)
    : momentum_(momentum), eps_(eps), name_(std::move(name)) {
  gamma_.name = name_ + ".gamma";
  gamma_.value = Matrix::Ones(channels, 1);
  beta_.name = name_ + ".beta";
  beta_.value = Matrix::Zero(channels, 1);
  gamma_.zero_grad();
  beta_.zero_grad();
  running_mean_ = Matrix::Zero(channels, 1);
  running_var_ = Matrix::Ones(channels, 1);
}

void BatchNorm::visit(const StateVisitor& f) {
  f(gamma_.name, gamma_.value);
  f(beta_.name, beta_.value);
  f(name_ + ".running_mean", running_mean_);
  f(name_ + ".running_var", running_var_);
}

Matrix BatchNorm::forward(const Matrix& x, Mode mode, Cache* cache) {
  const auto channels = x.rows();
  if (channels != gamma_.value.rows()) throw std::invalid_argument("BatchNorm: channel mismatch");
  const auto count = x.cols();
  Vector mean;
  Vector inv_std(channels);
  if (mode == Mode::Train) {
    if (count < 1) throw std::invalid_argument("BatchNorm: empty batch");
    mean = x.rowwise().mean();
    Vector var = (x.colwise() - mean).array().square().rowwise().mean();
    inv_std = (var.array() + eps_).rsqrt();
    const float unbias = count > 1 ? static_cast<float>(count) / static_cast<float>(count - 1) : 1.0F;
    running_mean_.col(0) = (1.0F - momentum_) * running_mean_.col(0) + momentum_ * mean;
    running_var_.col(0) = (1.0F - momentum_) * running_var_.col(0) + momentum_ * unbias * var;
  } else {
    mean = running_mean_.col(0);
    inv_std = (running_var_.col(0).array() + eps_).rsqrt();
  }
  Matrix normalized = (x.colwise() - mean).array().colwise() * inv_std.array();
  Matrix y = (normalized.array().colwise() * gamma_.value.col(0).array()).colwise() +
             beta_.value.col(0).array();
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

Matrix BatchNorm::backward(const Matrix& grad_out, const Cache& cache) {
  gamma_.grad.col(0) += (grad_out.array() * cache.normalized.array()).rowwise().sum().matrix();
  beta_.grad.col(0) += grad_out.rowwise().sum();
  const Matrix dnorm = grad_out.array().colwise() * gamma_.value.col(0).array();
  if (cache.mode == Mode::Eval) return dnorm.array().colwise() * cache.inv_std.array();

  const auto count = static_cast<float>(grad_out.cols());
  const Vector sum_d = dnorm.rowwise().sum();
  const Vector sum_dx = (dnorm.array() * cache.normalized.array()).rowwise().sum();
  Matrix dx = (count * dnorm.array()).colwise() - sum_d.array();
  dx.array() -= cache.normalized.array().colwise() * sum_dx.array();
  dx.array().colwise() *= cache.inv_std.array() / count;
  return dx;
}

// ---------------------------------------------------------------- activations and pooling

Matrix leaky_relu(const Matrix& x, LeakyReluCache* cache) {
  Matrix y = x.array().max(0.0F) + kLeakySlope * x.array().min(0.0F);
  if (cache != nullptr) cache->input = x;
  return y;
}

Matrix leaky_relu_backward(const Matrix& grad_out, const LeakyReluCache& cache) {
  return (cache.input.array() > 0.0F).select(grad_out, kLeakySlope * grad_out);
}

int pooled_length(int length) noexcept { return length < 2 ? length : length / 2; }

Matrix max_pool(const Matrix& x, int batch, int length, MaxPoolCache* cache) {
  const int out_len = pooled_length(length);
  if (cache != nullptr) {
    cache->batch = batch;
    cache->in_length = length;
    cache->out_length = out_len;
  }
  if (out_len == length) return x;

  const auto channels = x.rows();
  Matrix y(channels, static_cast<Eigen::Index>(batch) * out_len);
  if (cache != nullptr) cache->argmax.resize(static_cast<std::size_t>(y.size()));
  for (int n = 0; n < batch; ++n) {
    for (int t = 0; t < out_len; ++t) {
      const Eigen::Index a = static_cast<Eigen::Index>(n) * length + 2 * t;
      const Eigen::Index o = static_cast<Eigen::Index>(n) * out_len + t;
      for (Eigen::Index c = 0; c < channels; ++c) {
        const float va = x(c, a);
        const float vb = x(c, a + 1);
        const bool second = vb > va;
        y(c, o) = second ? vb : va;
        if (cache != nullptr) cache->argmax[static_cast<std::size_t>(o * channels + c)] = second ? a + 1 : a;
      }
    }
  }
  return y;
}

Matrix max_pool_backward(const Matrix& grad_out, const MaxPoolCache& cache, Eigen::Index channels) {
  if (cache.out_length == cache.in_length) return grad_out;
  Matrix dx = Matrix::Zero(channels, static_cast<Eigen::Index>(cache.batch) * cache.in_length);
  for (Eigen::Index o = 0; o < grad_out.cols(); ++o) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      dx(c, cache.argmax[static_cast<std::size_t>(o * channels + c)]) += grad_out(c, o);
    }
  }
  return dx;
}

Matrix global_average_pool(const Matrix& x, int batch, int length) {
  Matrix y(x.rows(), batch);
  for (int n = 0; n < batch; ++n) {
    y.col(n) = x.middleCols(static_cast<Eigen::Index>(n) * length, length).rowwise().mean();
  }
  return y;
}

Matrix global_average_pool_backward(const Matrix& grad_out, int batch, int length) {
  Matrix dx(grad_out.rows(), static_cast<Eigen::Index>(batch) * length);
  const float scale = 1.0F / static_cast<float>(length);
  for (int n = 0; n < batch; ++n) {
    dx.middleCols(static_cast<Eigen::Index>(n) * length, length).colwise() = grad_out.col(n) * scale;
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_features, int out_features, std::mt19937_64& rng) {
  weight_.name = name + ".weight";
  weight_.value.resize(out_features, in_features);
  fan_in_uniform(weight_.value, in_features, rng);
  bias_.name = name + ".bias";
  bias_.value = Matrix::Zero(out_features, 1);
  weight_.zero_grad();
  bias_.zero_grad();
}

Matrix Linear::forward(const Matrix& x, Cache* cache) const {
  if (x.rows() != weight_.value.cols()) {
    throw std::invalid_argument("Linear " + weight_.name + ": expected " +
                                std::to_string(weight_.value.cols()) + " input features, got " +
                                std::to_string(x.rows()));
  }
  Matrix y(weight_.value.rows(), x.cols());
  y.noalias() = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  if (cache != nullptr) cache->input = x;
  return y;
}

Matrix Linear::backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad) {
  weight_.grad.noalias() += grad_out * cache.input.transpose();
  bias_.grad.col(0) += grad_out.rowwise().sum();
  if (!need_input_grad) return {};
  return weight_.value.transpose() * grad_out;
}

// ---------------------------------------------------------------- Adam

Adam::Adam(std::vector<Parameter*> params, double learning_rate, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto step = static_cast<float>(lr_ / c1);
  const auto sqrt_c2 = static_cast<float>(std::sqrt(c2));
  const auto eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = b1 * m_[i] + (1.0F - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0F - b2) * p.grad.cwiseAbs2();
    p.value.array() -= step * m_[i].array() / (v_[i].array().sqrt() / sqrt_c2 + eps);
  }
}

}  // namespace modcl::nn
