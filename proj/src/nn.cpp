/* Copyright 2026 The Wildscan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wildscan/nn.hpp"

#include <cmath>
#include <numbers>

#include "wildscan/common.hpp"

namespace wildscan::nn {

ParamId ParamStore::add(std::string name, Matrix initial) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(initial));
  return values_.size() - 1;
}

std::size_t ParamStore::total_values() const {
  std::size_t total = 0;
  for (const auto& value : values_) total += static_cast<std::size_t>(value.size());
  return total;
}

GradStore::GradStore(const ParamStore& params) {
  grads_.reserve(params.size());
  for (ParamId id = 0; id < params.size(); ++id) {
    grads_.push_back(Matrix::Zero(params[id].rows(), params[id].cols()));
  }
}

void GradStore::zero() {
  for (auto& grad : grads_) grad.setZero();
}

double standard_normal(std::mt19937_64& rng) {
  constexpr double kScale = 1.0 / 18446744073709551616.0;  // 2^-64
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(rng()) * kScale;
  const double u2 = static_cast<double>(rng()) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix random_normal(int rows, int cols, double stddev, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * standard_normal(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(ParamStore& params, const std::string& name, int in_channels, int out_channels,
               int kernel, int stride, int padding, std::mt19937_64& rng, double init_stddev,
               double init_bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  const int fan_in = in_channels * kernel * kernel;
  const double stddev = init_stddev > 0.0 ? init_stddev : std::sqrt(2.0 / fan_in);
  weight_ = params.add(name + ".weight", random_normal(out_channels, fan_in, stddev, rng));
  bias_ = params.add(name + ".bias", Matrix::Constant(out_channels, 1, init_bias));
}

Matrix Conv2d::im2col(const FeatureMap& x, int out_h, int out_w) const {
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(in_channels_) * kernel_ * kernel_,
                             static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < in_channels_; ++c) {
    const double* plane = x.values.row(c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        double* row = cols.row((c * kernel_ + ky) * kernel_ + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= x.height) continue;
          const double* src = plane + static_cast<std::ptrdiff_t>(iy) * x.width;
          double* dst = row + static_cast<std::ptrdiff_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix >= 0 && ix < x.width) dst[ox] = src[ix];
          }
        }
      }
    }
  }
  return cols;
}

FeatureMap Conv2d::forward(const ParamStore& params, const FeatureMap& x,
                           LayerCache* cache) const {
  if (x.channels != in_channels_) throw Error("Conv2d: channel mismatch");
  const int out_h = (x.height + 2 * padding_ - kernel_) / stride_ + 1;
  const int out_w = (x.width + 2 * padding_ - kernel_) / stride_ + 1;
  if (out_h <= 0 || out_w <= 0) throw Error("Conv2d: input smaller than kernel");
  FeatureMap y;
  y.channels = out_channels_;
  y.height = out_h;
  y.width = out_w;
  if (pointwise()) {
    y.values.noalias() = params[weight_] * x.values;
    if (cache) cache->input = x;
  } else {
    Matrix cols = im2col(x, out_h, out_w);
    y.values.noalias() = params[weight_] * cols;
    if (cache) {
      cache->input.channels = x.channels;
      cache->input.height = x.height;
      cache->input.width = x.width;
      cache->columns = std::move(cols);
    }
  }
  y.values.colwise() += params[bias_].col(0);
  return y;
}

FeatureMap Conv2d::backward(const ParamStore& params, const LayerCache& cache,
                            const FeatureMap& grad_out, GradStore* grads,
                            bool need_input_grad) const {
  const Matrix& cols = pointwise() ? cache.input.values : cache.columns;
  if (grads) {
    (*grads)[weight_].noalias() += grad_out.values * cols.transpose();
    (*grads)[bias_].col(0) += grad_out.values.rowwise().sum().transpose();
  }
  if (!need_input_grad) return {};
  FeatureMap dx(in_channels_, cache.input.height, cache.input.width);
  if (pointwise()) {
    dx.values.noalias() = params[weight_].transpose() * grad_out.values;
    return dx;
  }
  Matrix dcols = params[weight_].transpose() * grad_out.values;
  const int out_h = grad_out.height;
  const int out_w = grad_out.width;
  for (int c = 0; c < in_channels_; ++c) {
    double* plane = dx.values.row(c).data();
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const double* row = dcols.row((c * kernel_ + ky) * kernel_ + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= dx.height) continue;
          double* dst = plane + static_cast<std::ptrdiff_t>(iy) * dx.width;
          const double* src = row + static_cast<std::ptrdiff_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix >= 0 && ix < dx.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Relu

FeatureMap Relu::forward(const ParamStore&, const FeatureMap& x, LayerCache* cache) const {
  FeatureMap y = x;
  y.values = y.values.cwiseMax(0.0);
  if (cache) cache->input = x;
  return y;
}

FeatureMap Relu::backward(const ParamStore&, const LayerCache& cache, const FeatureMap& grad_out,
                          GradStore*, bool need_input_grad) const {
  if (!need_input_grad) return {};
  FeatureMap dx = grad_out;
  dx.values = (cache.input.values.array() > 0.0).select(grad_out.values, 0.0);
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

FeatureMap MaxPool2::forward(const ParamStore&, const FeatureMap& x, LayerCache* cache) const {
  const int out_h = x.height / 2;
  const int out_w = x.width / 2;
  if (out_h == 0 || out_w == 0) throw Error("MaxPool2: input smaller than 2x2");
  FeatureMap y(x.channels, out_h, out_w);
  std::vector<int> argmax;
  if (cache) argmax.resize(static_cast<std::size_t>(x.channels) * out_h * out_w);
  for (int c = 0; c < x.channels; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        int best = (2 * oy) * x.width + 2 * ox;
        double best_value = x.values(c, best);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int index = (2 * oy + dy) * x.width + 2 * ox + dx;
            if (x.values(c, index) > best_value) {
              best_value = x.values(c, index);
              best = index;
            }
          }
        }
        y.values(c, oy * out_w + ox) = best_value;
        if (cache) argmax[(static_cast<std::size_t>(c) * out_h + oy) * out_w + ox] = best;
      }
    }
  }
  if (cache) {
    cache->input.channels = x.channels;
    cache->input.height = x.height;
    cache->input.width = x.width;
    cache->indices = std::move(argmax);
  }
  return y;
}

FeatureMap MaxPool2::backward(const ParamStore&, const LayerCache& cache,
                              const FeatureMap& grad_out, GradStore*, bool need_input_grad) const {
  if (!need_input_grad) return {};
  FeatureMap dx(cache.input.channels, cache.input.height, cache.input.width);
  const int out_size = grad_out.height * grad_out.width;
  for (int c = 0; c < grad_out.channels; ++c) {
    for (int o = 0; o < out_size; ++o) {
      dx.values(c, cache.indices[static_cast<std::size_t>(c) * out_size + o]) += grad_out.values(c, o);
    }
  }
  return dx;
}

FeatureMap AvgPool2::forward(const ParamStore&, const FeatureMap& x, LayerCache* cache) const {
  const int out_h = x.height / 2;
  const int out_w = x.width / 2;
  if (out_h == 0 || out_w == 0) throw Error("AvgPool2: input smaller than 2x2");
  FeatureMap y(x.channels, out_h, out_w);
  for (int c = 0; c < x.channels; ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        y.values(c, oy * out_w + ox) =
            0.25 * (x.at(c, 2 * oy, 2 * ox) + x.at(c, 2 * oy, 2 * ox + 1) +
                    x.at(c, 2 * oy + 1, 2 * ox) + x.at(c, 2 * oy + 1, 2 * ox + 1));
      }
    }
  }
  if (cache) {
    cache->input.channels = x.channels;
    cache->input.height = x.height;
    cache->input.width = x.width;
  }
  return y;
}

FeatureMap AvgPool2::backward(const ParamStore&, const LayerCache& cache,
                              const FeatureMap& grad_out, GradStore*, bool need_input_grad) const {
  if (!need_input_grad) return {};
  FeatureMap dx(cache.input.channels, cache.input.height, cache.input.width);
  for (int c = 0; c < grad_out.channels; ++c) {
    for (int oy = 0; oy < grad_out.height; ++oy) {
      for (int ox = 0; ox < grad_out.width; ++ox) {
        const double g = 0.25 * grad_out.at(c, oy, ox);
        dx.at(c, 2 * oy, 2 * ox) += g;
        dx.at(c, 2 * oy, 2 * ox + 1) += g;
        dx.at(c, 2 * oy + 1, 2 * ox) += g;
        dx.at(c, 2 * oy + 1, 2 * ox + 1) += g;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// DenseLayer

DenseLayer::DenseLayer(ParamStore& params, const std::string& name, int in_channels,
                       int growth_rate, std::mt19937_64& rng)
    : in_channels_(in_channels),
      growth_rate_(growth_rate),
      conv_(params, name + ".conv", in_channels, growth_rate, 3, 1, 1, rng) {}

FeatureMap DenseLayer::forward(const ParamStore& params, const FeatureMap& x,
                               LayerCache* cache) const {
  FeatureMap activated = x;
  activated.values = x.values.cwiseMax(0.0);
  LayerCache* conv_cache = nullptr;
  if (cache) {
    cache->input = x;
    cache->children.resize(1);
    conv_cache = &cache->children[0];
  }
  FeatureMap grown = conv_.forward(params, activated, conv_cache);
  FeatureMap y(in_channels_ + growth_rate_, x.height, x.width);
  y.values.topRows(in_channels_) = x.values;
  y.values.bottomRows(growth_rate_) = grown.values;
  return y;
}

FeatureMap DenseLayer::backward(const ParamStore& params, const LayerCache& cache,
                                const FeatureMap& grad_out, GradStore* grads,
                                bool need_input_grad) const {
  FeatureMap d_grown(growth_rate_, grad_out.height, grad_out.width);
  d_grown.values = grad_out.values.bottomRows(growth_rate_);
  FeatureMap d_activated = conv_.backward(params, cache.children[0], d_grown, grads, need_input_grad);
  if (!need_input_grad) return {};
  FeatureMap dx(in_channels_, grad_out.height, grad_out.width);
  dx.values = grad_out.values.topRows(in_channels_);
  dx.values += (cache.input.values.array() > 0.0).select(d_activated.values, 0.0);
  return dx;
}

// ---------------------------------------------------------------------------
// Sequential

FeatureMap Sequential::forward(const ParamStore& params, const FeatureMap& x,
                               LayerCache* cache) const {
  if (cache) cache->children.resize(layers_.size());
  FeatureMap current = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    current = layers_[i]->forward(params, current, cache ? &cache->children[i] : nullptr);
  }
  return current;
}

FeatureMap Sequential::backward(const ParamStore& params, const LayerCache& cache,
                                const FeatureMap& grad_out, GradStore* grads,
                                bool need_input_grad) const {
  FeatureMap grad = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = i > 0 || need_input_grad;
    grad = layers_[i]->backward(params, cache.children[i], grad, grads, need);
    if (!need) break;
  }
  return grad;
}

int Sequential::output_channels(int input_channels) const {
  int channels = input_channels;
  for (const auto& layer : layers_) channels = layer->output_channels(channels);
  return channels;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ParamStore& params, const std::string& name, int in_features, int out_features,
               std::mt19937_64& rng, double init_stddev)
    : in_features_(in_features), out_features_(out_features) {
  const double stddev = init_stddev > 0.0 ? init_stddev : std::sqrt(2.0 / in_features);
  weight_ = params.add(name + ".weight", random_normal(out_features, in_features, stddev, rng));
  bias_ = params.add(name + ".bias", Matrix::Zero(out_features, 1));
}

Matrix Linear::forward(const ParamStore& params, const Matrix& x) const {
  Matrix y = params[weight_] * x;
  y.colwise() += params[bias_].col(0);
  return y;
}

Matrix Linear::backward(const ParamStore& params, const Matrix& x, const Matrix& grad_out,
                        GradStore* grads) const {
  if (grads) {
    (*grads)[weight_].noalias() += grad_out * x.transpose();
    (*grads)[bias_].col(0) += grad_out.rowwise().sum().transpose();
  }
  return params[weight_].transpose() * grad_out;
}

// ---------------------------------------------------------------------------
// RoiAlign

RoiAlign::Plan RoiAlign::plan(const FeatureMap& features, std::span<const Box> regions) const {
  Plan plan;
  plan.channels = features.channels;
  plan.height = features.height;
  plan.width = features.width;
  plan.taps.resize(regions.size());
  const int height = features.height;
  const int width = features.width;
  const double samples = static_cast<double>(sampling_ratio_) * sampling_ratio_;

  for (std::size_t r = 0; r < regions.size(); ++r) {
    const Box& box = regions[r];
    const double start_x = box.x_min * spatial_scale_ - 0.5;
    const double start_y = box.y_min * spatial_scale_ - 0.5;
    const double bin_w = (box.x_max - box.x_min) * spatial_scale_ / out_w_;
    const double bin_h = (box.y_max - box.y_min) * spatial_scale_ / out_h_;
    auto& taps = plan.taps[r];
    taps.reserve(static_cast<std::size_t>(bins()) * sampling_ratio_ * sampling_ratio_ * 4);
    for (int py = 0; py < out_h_; ++py) {
      for (int px = 0; px < out_w_; ++px) {
        const int bin = py * out_w_ + px;
        for (int iy = 0; iy < sampling_ratio_; ++iy) {
          double y = start_y + py * bin_h + (iy + 0.5) * bin_h / sampling_ratio_;
          for (int ix = 0; ix < sampling_ratio_; ++ix) {
            double x = start_x + px * bin_w + (ix + 0.5) * bin_w / sampling_ratio_;
            if (y < -1.0 || y > height || x < -1.0 || x > width) continue;
            double sy = std::max(y, 0.0);
            double sx = std::max(x, 0.0);
            int y_low = static_cast<int>(sy);
            int x_low = static_cast<int>(sx);
            int y_high, x_high;
            if (y_low >= height - 1) {
              y_low = y_high = height - 1;
              sy = y_low;
            } else {
              y_high = y_low + 1;
            }
            if (x_low >= width - 1) {
              x_low = x_high = width - 1;
              sx = x_low;
            } else {
              x_high = x_low + 1;
            }
            const double ly = sy - y_low;
            const double lx = sx - x_low;
            const double hy = 1.0 - ly;
            const double hx = 1.0 - lx;
            taps.push_back({bin, y_low * width + x_low, hy * hx / samples});
            taps.push_back({bin, y_low * width + x_high, hy * lx / samples});
            taps.push_back({bin, y_high * width + x_low, ly * hx / samples});
            taps.push_back({bin, y_high * width + x_high, ly * lx / samples});
          }
        }
      }
    }
  }
  return plan;
}

Matrix RoiAlign::forward(const FeatureMap& features, const Plan& plan) const {
  const int bin_count = bins();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(features.channels) * bin_count,
                            static_cast<Eigen::Index>(plan.taps.size()));
  for (std::size_t r = 0; r < plan.taps.size(); ++r) {
    for (int c = 0; c < features.channels; ++c) {
      const double* plane = features.values.row(c).data();
      const Eigen::Index base = static_cast<Eigen::Index>(c) * bin_count;
      for (const Tap& tap : plan.taps[r]) {
        out(base + tap.bin, static_cast<Eigen::Index>(r)) += tap.weight * plane[tap.index];
      }
    }
  }
  return out;
}

FeatureMap RoiAlign::backward(const Plan& plan, const Matrix& grad_out) const {
  FeatureMap dx(plan.channels, plan.height, plan.width);
  const int bin_count = bins();
  for (std::size_t r = 0; r < plan.taps.size(); ++r) {
    for (int c = 0; c < plan.channels; ++c) {
      double* plane = dx.values.row(c).data();
      const Eigen::Index base = static_cast<Eigen::Index>(c) * bin_count;
      for (const Tap& tap : plan.taps[r]) {
        plane[tap.index] += tap.weight * grad_out(base + tap.bin, static_cast<Eigen::Index>(r));
      }
    }
  }
  return dx;
}

}  // namespace wildscan::nn
