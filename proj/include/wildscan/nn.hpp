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

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wildscan/box.hpp"

// Minimal CPU layers with hand-written backward passes. Forward passes are
// const and keep no state in the layer, so a network can serve concurrent
// inference; activations needed for backprop go into a caller-owned
// LayerCache, parameter gradients into a caller-owned GradStore.
namespace wildscan::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channel-planar feature map: values(c, y * width + x).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix values;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), values(Matrix::Zero(c, h * w)) {}

  double& at(int c, int y, int x) { return values(c, y * width + x); }
  double at(int c, int y, int x) const { return values(c, y * width + x); }
};

using ParamId = std::size_t;

class ParamStore {
 public:
  ParamId add(std::string name, Matrix initial);

  Matrix& operator[](ParamId id) { return values_[id]; }
  const Matrix& operator[](ParamId id) const { return values_[id]; }
  const std::string& name(ParamId id) const { return names_[id]; }
  std::size_t size() const { return values_.size(); }
  std::size_t total_values() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

class GradStore {
 public:
  explicit GradStore(const ParamStore& params);

  void zero();
  Matrix& operator[](ParamId id) { return grads_[id]; }
  const Matrix& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

 private:
  std::vector<Matrix> grads_;
};

// Deterministic standard normal draws (Box-Muller over mt19937_64), portable
// across standard library implementations.
double standard_normal(std::mt19937_64& rng);
Matrix random_normal(int rows, int cols, double stddev, std::mt19937_64& rng);

struct LayerCache {
  FeatureMap input;
  Matrix columns;
  std::vector<int> indices;
  std::vector<LayerCache> children;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                             LayerCache* cache) const = 0;
  // Accumulates parameter gradients into `grads` when non-null. Returns the
  // gradient w.r.t. the layer input, or an empty map if !need_input_grad.
  virtual FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                              const FeatureMap& grad_out, GradStore* grads,
                              bool need_input_grad) const = 0;
  virtual int output_channels(int input_channels) const { return input_channels; }
};

class Conv2d : public Layer {
 public:
  // He-normal weights when init_stddev <= 0.
  Conv2d(ParamStore& params, const std::string& name, int in_channels, int out_channels,
         int kernel, int stride, int padding, std::mt19937_64& rng, double init_stddev = 0.0,
         double init_bias = 0.0);

  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
  int output_channels(int) const override { return out_channels_; }

  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }

 private:
  bool pointwise() const { return kernel_ == 1 && stride_ == 1 && padding_ == 0; }
  Matrix im2col(const FeatureMap& x, int out_h, int out_w) const;

  int in_channels_;
  int out_channels_;
  int kernel_;
  int stride_;
  int padding_;
  ParamId weight_;
  ParamId bias_;
};

class Relu : public Layer {
 public:
  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
};

// 2x2 max pooling, stride 2, floor on odd sizes.
class MaxPool2 : public Layer {
 public:
  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
};

// 2x2 average pooling, stride 2, floor on odd sizes.
class AvgPool2 : public Layer {
 public:
  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
};

// DenseNet-style layer: out = concat(x, conv3x3(relu(x))).
class DenseLayer : public Layer {
 public:
  DenseLayer(ParamStore& params, const std::string& name, int in_channels, int growth_rate,
             std::mt19937_64& rng);

  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
  int output_channels(int input_channels) const override { return input_channels + growth_rate_; }

 private:
  int in_channels_;
  int growth_rate_;
  Conv2d conv_;
};

class Sequential : public Layer {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  FeatureMap forward(const ParamStore& params, const FeatureMap& x,
                     LayerCache* cache) const override;
  FeatureMap backward(const ParamStore& params, const LayerCache& cache,
                      const FeatureMap& grad_out, GradStore* grads,
                      bool need_input_grad) const override;
  int output_channels(int input_channels) const override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Fully connected layer over column samples: y = W x + b, x is (in x N).
class Linear {
 public:
  Linear(ParamStore& params, const std::string& name, int in_features, int out_features,
         std::mt19937_64& rng, double init_stddev = 0.0);

  Matrix forward(const ParamStore& params, const Matrix& x) const;
  // Returns dL/dx; accumulates dL/dW and dL/db when grads is non-null.
  Matrix backward(const ParamStore& params, const Matrix& x, const Matrix& grad_out,
                  GradStore* grads) const;

  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }
  int in_features() const { return in_features_; }
  int out_features() const { return out_features_; }

 private:
  int in_features_;
  int out_features_;
  ParamId weight_;
  ParamId bias_;
};

// Bilinear ROI-align (half-pixel aligned, fixed sampling grid per bin).
// Output column r holds region r's features, row c * (out_h * out_w) + bin.
class RoiAlign {
 public:
  RoiAlign(int out_h, int out_w, double spatial_scale, int sampling_ratio = 2)
      : out_h_(out_h), out_w_(out_w), spatial_scale_(spatial_scale), sampling_ratio_(sampling_ratio) {}

  struct Tap {
    int bin;
    int index;
    double weight;
  };
  struct Plan {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::vector<Tap>> taps;  // per region
  };

  Plan plan(const FeatureMap& features, std::span<const Box> regions) const;
  Matrix forward(const FeatureMap& features, const Plan& plan) const;
  FeatureMap backward(const Plan& plan, const Matrix& grad_out) const;

  int bins() const { return out_h_ * out_w_; }

 private:
  int out_h_;
  int out_w_;
  double spatial_scale_;
  int sampling_ratio_;
};

}  // namespace wildscan::nn
