#include "beamtrack/neural.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace beamtrack {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::identity:
      return z;
    case Activation::sigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  throw std::logic_error("unknown activation");
}

// Derivative expressed through pre-activation z and activation a.
Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::relu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::identity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::sigmoid:
      return a.array() * (1.0 - a.array());
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

Mlp make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
  if (acts.size() != dims.size() - 1) {
    throw std::invalid_argument("make_mlp: one activation per layer required");
  }
  Mlp net;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] < 1 || dims[l + 1] < 1) throw std::invalid_argument("make_mlp: dims must be >= 1");
    Layer layer;
    const double bound = 1.0 / std::sqrt(double(dims[l]));
    layer.w.resize(dims[l + 1], dims[l]);
    layer.b.resize(dims[l + 1]);
    for (int i = 0; i < layer.w.rows(); ++i) {
      for (int j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = rng.uniform(-bound, bound);
      layer.b[i] = rng.uniform(-bound, bound);
    }
    layer.act = acts[l];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (x.rows() != net.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Eigen::MatrixXd h = x;
  for (const auto& layer : net.layers) {
    Eigen::MatrixXd z = (layer.w * h).colwise() + layer.b;
    Eigen::MatrixXd a = activate(z, layer.act);
    if (cache) {
      cache->pre.push_back(z);
      cache->post.push_back(a);
    }
    h = std::move(a);
  }
  return h;
}

Gradients backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& dout,
                   Eigen::MatrixXd* dinput) {
  const size_t n = net.layers.size();
  if (cache.pre.size() != n || cache.post.size() != n) {
    throw std::invalid_argument("backward: cache does not match network");
  }
  Gradients grads;
  grads.dw.resize(n);
  grads.db.resize(n);
  Eigen::MatrixXd delta = dout;
  for (size_t l = n; l-- > 0;) {
    const auto& layer = net.layers[l];
    delta = delta.cwiseProduct(activate_grad(cache.pre[l], cache.post[l], layer.act));
    const Eigen::MatrixXd& below = (l == 0) ? cache.input : cache.post[l - 1];
    grads.dw[l] = delta * below.transpose();
    grads.db[l] = delta.rowwise().sum();
    if (l > 0 || dinput) {
      Eigen::MatrixXd next = layer.w.transpose() * delta;
      if (l == 0 && dinput) *dinput = next;
      delta = std::move(next);
    }
  }
  return grads;
}

AdamState make_adam(const Mlp& net) {
  AdamState opt;
  for (const auto& layer : net.layers) {
    opt.mw.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    opt.vw.push_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    opt.mb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
    opt.vb.push_back(Eigen::VectorXd::Zero(layer.b.size()));
  }
  return opt;
}

namespace {

template <typename T>
void adam_step(T& param, T& m, T& v, const T& grad, double lr, const AdamState& opt) {
  m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
  v = opt.beta2 * v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(opt.beta1, double(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, double(opt.step));
  const T m_hat = m / bc1;
  const T v_hat = v / bc2;
  param -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt().unaryExpr([&](double s) {
    return s + opt.epsilon;
  }));
}

}  // namespace

void apply_gradients(Mlp& net, AdamState& opt, const Gradients& grads, double lr) {
  if (grads.dw.size() != net.layers.size() || grads.db.size() != net.layers.size()) {
    throw std::invalid_argument("apply_gradients: gradient shape mismatch");
  }
  for (size_t l = 0; l < net.layers.size(); ++l) {
    if (!grads.dw[l].allFinite() || !grads.db[l].allFinite()) {
      throw std::runtime_error("apply_gradients: non-finite gradient in layer " + std::to_string(l));
    }
  }
  opt.step += 1;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    adam_step(net.layers[l].w, opt.mw[l], opt.vw[l], grads.dw[l], lr, opt);
    adam_step(net.layers[l].b, opt.mb[l], opt.vb[l], grads.db[l], lr, opt);
  }
}

void soft_update(Mlp& target, const Mlp& online, double mix) {
  if (target.layers.size() != online.layers.size()) {
    throw std::invalid_argument("soft_update: network shapes differ");
  }
  for (size_t l = 0; l < target.layers.size(); ++l) {
    target.layers[l].w = (1.0 - mix) * target.layers[l].w + mix * online.layers[l].w;
    target.layers[l].b = (1.0 - mix) * target.layers[l].b + mix * online.layers[l].b;
  }
}

namespace {

constexpr std::uint32_t kMagic = 0x704c4d42;  // "BMLp"

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
}

}  // namespace

void save_mlp(const std::string& path, const Mlp& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path + " for writing");
  write_pod(out, kMagic);
  write_pod(out, std::uint32_t(net.layers.size()));
  for (const auto& layer : net.layers) {
    write_pod(out, std::uint32_t(layer.w.rows()));
    write_pod(out, std::uint32_t(layer.w.cols()));
    write_pod(out, std::uint8_t(layer.act));
  }
  for (const auto& layer : net.layers) {
    for (int i = 0; i < layer.w.rows(); ++i) {
      for (int j = 0; j < layer.w.cols(); ++j) write_pod(out, layer.w(i, j));
    }
    for (int i = 0; i < layer.b.size(); ++i) write_pod(out, layer.b[i]);
  }
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  std::uint32_t magic = 0, count = 0;
  read_pod(in, magic);
  if (!in || magic != kMagic) throw std::runtime_error("load_mlp: " + path + " is not a checkpoint");
  read_pod(in, count);
  if (!in || count == 0 || count > 64) throw std::runtime_error("load_mlp: bad layer count");
  Mlp net;
  for (std::uint32_t l = 0; l < count; ++l) {
    std::uint32_t rows = 0, cols = 0;
    std::uint8_t act = 0;
    read_pod(in, rows);
    read_pod(in, cols);
    read_pod(in, act);
    if (!in || rows == 0 || cols == 0 || act > std::uint8_t(Activation::sigmoid)) {
      throw std::runtime_error("load_mlp: bad layer header");
    }
    Layer layer;
    layer.w.resize(rows, cols);
    layer.b.resize(rows);
    layer.act = Activation(act);
    net.layers.push_back(std::move(layer));
  }
  for (auto& layer : net.layers) {
    for (int i = 0; i < layer.w.rows(); ++i) {
      for (int j = 0; j < layer.w.cols(); ++j) read_pod(in, layer.w(i, j));
    }
    for (int i = 0; i < layer.b.size(); ++i) read_pod(in, layer.b[i]);
  }
  if (!in) throw std::runtime_error("load_mlp: truncated file " + path);
  for (size_t l = 0; l + 1 < net.layers.size(); ++l) {
    if (net.layers[l + 1].w.cols() != net.layers[l].w.rows()) {
      throw std::runtime_error("load_mlp: inconsistent layer dims");
    }
  }
  return net;
}

}  // namespace beamtrack
