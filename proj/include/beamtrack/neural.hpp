#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "beamtrack/rng.hpp"

namespace beamtrack {

enum class Activation { relu, identity, sigmoid };

struct Layer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
  Activation act = Activation::relu;
};

struct Mlp {
  std::vector<Layer> layers;
  int input_dim() const { return layers.empty() ? 0 : int(layers.front().w.cols()); }
  int output_dim() const { return layers.empty() ? 0 : int(layers.back().w.rows()); }
};

// Fan-in uniform init: weights and biases in +-1/sqrt(fan_in).
Mlp make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);

struct ForwardCache {
  Eigen::MatrixXd input;                // in x batch
  std::vector<Eigen::MatrixXd> pre;     // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;    // activations per layer
};

// Columns are samples. Cache is optional and only needed for backward().
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
};

// Exact reverse-mode gradients for the cached forward pass. dout has the
// shape of the network output; if dinput is given it receives dLoss/dx.
Gradients backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& dout,
                   Eigen::MatrixXd* dinput = nullptr);

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const Mlp& net);

// One bias-corrected Adam step. Throws on non-finite gradients.
void apply_gradients(Mlp& net, AdamState& opt, const Gradients& grads, double lr);

// target := (1 - mix) * target + mix * online
void soft_update(Mlp& target, const Mlp& online, double mix);

void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

}  // namespace beamtrack
