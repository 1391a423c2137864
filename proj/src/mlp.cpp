#include "sndiff/mlp.hpp"

#include "sndiff/binary_io.hpp"

namespace sndiff {

namespace {

constexpr int kFormatVersion = 1;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double activate(Activation a, double v) {
  switch (a) {
    case Activation::SiLU:
      return v * sigmoid(v);
    case Activation::Tanh:
      return std::tanh(v);
    case Activation::Softplus:
      return v > 30.0 ? v : std::log1p(std::exp(v));
  }
  return v;
}

double activate_grad(Activation a, double v) {
  switch (a) {
    case Activation::SiLU: {
      const double s = sigmoid(v);
      return s * (1.0 + v * (1.0 - s));
    }
    case Activation::Tanh: {
      const double th = std::tanh(v);
      return 1.0 - th * th;
    }
    case Activation::Softplus:
      return sigmoid(v);
  }
  return 1.0;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::SiLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  throw ConfigError("unknown activation '" + name + "' (expected silu, tanh or softplus)");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::SiLU:
      return "silu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Softplus:
      return "softplus";
  }
  return "?";
}

MlpScoreNet::MlpScoreNet(Architecture arch, DiffusionSchedule schedule, Rng& init_rng)
    : arch_(std::move(arch)), schedule_(schedule) {
  if (arch_.dim < 1) throw ConfigError("MlpScoreNet: dim must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index fan_in = arch_.dim + 2;
  std::vector<int> widths = arch_.hidden;
  widths.push_back(static_cast<int>(arch_.dim));
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] < 1) throw ConfigError("MlpScoreNet: layer widths must be positive");
    const bool last = l + 1 == widths.size();
    const double scale = (last ? 0.1 : std::sqrt(2.0)) / std::sqrt(static_cast<double>(fan_in));
    Layer layer{Matrix(widths[l], fan_in), Vector::Zero(widths[l])};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * normal(init_rng);
    layers_.push_back(std::move(layer));
    fan_in = widths[l];
  }
  validate();
}

MlpScoreNet::MlpScoreNet(Architecture arch, DiffusionSchedule schedule, std::vector<Layer> layers)
    : arch_(std::move(arch)), schedule_(schedule), layers_(std::move(layers)) {
  validate();
}

void MlpScoreNet::validate() const {
  if (!(arch_.data_variance > 0.0)) throw ConfigError("MlpScoreNet: data_variance must be > 0");
  if (layers_.size() != arch_.hidden.size() + 1) {
    throw ConfigError("MlpScoreNet: layer count does not match architecture");
  }
  Eigen::Index fan_in = arch_.dim + 2;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Eigen::Index width =
        l < arch_.hidden.size() ? arch_.hidden[l] : static_cast<Eigen::Index>(arch_.dim);
    if (layers_[l].weight.rows() != width || layers_[l].weight.cols() != fan_in ||
        layers_[l].bias.size() != width) {
      throw ShapeError("MlpScoreNet: layer " + std::to_string(l) + " has inconsistent shape");
    }
    fan_in = width;
  }
}

Matrix MlpScoreNet::features(const Matrix& xs, const Vector& ts, Vector& in_scale,
                             Vector& out_scale) const {
  if (xs.rows() != arch_.dim) throw ShapeError("MlpScoreNet: input dimension mismatch");
  if (ts.size() != xs.cols()) throw ShapeError("MlpScoreNet: one time per column required");
  const double beta_max = schedule_.beta(1.0);
  Matrix f(arch_.dim + 2, xs.cols());
  in_scale.resize(xs.cols());
  out_scale.resize(xs.cols());
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    const double b2 = schedule_.beta_sq(ts[j]);
    const double b = std::sqrt(b2);
    if (arch_.inv_beta_output && !(b > 0.0)) {
      throw DomainError("MlpScoreNet: score undefined at t=0");
    }
    in_scale[j] = 1.0 / std::sqrt(arch_.data_variance + b2);
    out_scale[j] = arch_.inv_beta_output ? 1.0 / b : 1.0;
    f.col(j).head(arch_.dim) = in_scale[j] * xs.col(j);
    f(arch_.dim, j) = ts[j];
    f(arch_.dim + 1, j) = b / beta_max;
  }
  return f;
}

Matrix MlpScoreNet::forward(const Matrix& xs, const Vector& ts, Cache* cache) const {
  Vector in_scale, out_scale;
  Matrix h = features(xs, ts, in_scale, out_scale);
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
    cache->in_scale = in_scale;
    cache->out_scale = out_scale;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (cache) cache->inputs.push_back(h);
    Matrix pre = (layers_[l].weight * h).colwise() + layers_[l].bias;
    if (l + 1 == layers_.size()) {
      h = std::move(pre);
    } else {
      h = pre.unaryExpr([a = arch_.activation](double v) { return activate(a, v); });
      if (cache) cache->preacts.push_back(std::move(pre));
    }
  }
  return h * out_scale.asDiagonal();
}

Matrix MlpScoreNet::backward(const Cache& cache, const Matrix& grad_out, Vector* param_grad) const {
  Matrix g = grad_out * cache.out_scale.asDiagonal();
  // Offsets of each layer inside the flat parameter vector.
  std::vector<Eigen::Index> offsets(layers_.size());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = off;
    off += layers_[l].weight.size() + layers_[l].bias.size();
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) {
      g = g.cwiseProduct(cache.preacts[l].unaryExpr(
          [a = arch_.activation](double v) { return activate_grad(a, v); }));
    }
    if (param_grad) {
      const auto& w = layers_[l].weight;
      Eigen::Map<Matrix> dw(param_grad->data() + offsets[l], w.rows(), w.cols());
      dw.noalias() += g * cache.inputs[l].transpose();
      param_grad->segment(offsets[l] + w.size(), w.rows()) += g.rowwise().sum();
    }
    g = layers_[l].weight.transpose() * g;
  }
  return g.topRows(arch_.dim) * cache.in_scale.asDiagonal();
}

Vector MlpScoreNet::score(const Vector& x, double t) const {
  return forward(x, Vector::Constant(1, t), nullptr).col(0);
}

Matrix MlpScoreNet::score_batch(const Matrix& xs, const Vector& ts) const {
  return forward(xs, ts, nullptr);
}

Vector MlpScoreNet::vjp(const Vector& x, double t, const Vector& v) const {
  if (v.size() != arch_.dim) throw ShapeError("MlpScoreNet::vjp: cotangent dimension mismatch");
  Cache cache;
  forward(x, Vector::Constant(1, t), &cache);
  return backward(cache, v, nullptr).col(0);
}

void MlpScoreNet::accumulate_parameter_gradient(const Matrix& xs, const Vector& ts,
                                                const Matrix& upstream, Vector& grad) const {
  if (grad.size() != parameter_count()) throw ShapeError("parameter gradient size mismatch");
  Cache cache;
  forward(xs, ts, &cache);
  backward(cache, upstream, &grad);
}

Eigen::Index MlpScoreNet::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector MlpScoreNet::flat_parameters() const {
  Vector theta(parameter_count());
  Eigen::Index off = 0;
  for (const auto& l : layers_) {
    theta.segment(off, l.weight.size()) = l.weight.reshaped();
    off += l.weight.size();
    theta.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return theta;
}

void MlpScoreNet::set_flat_parameters(const Vector& theta) {
  if (theta.size() != parameter_count()) throw ShapeError("set_flat_parameters: size mismatch");
  Eigen::Index off = 0;
  for (auto& l : layers_) {
    l.weight.reshaped() = theta.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = theta.segment(off, l.bias.size());
    off += l.bias.size();
  }
}

void MlpScoreNet::save(const std::filesystem::path& path) const {
  nlohmann::json header = {
      {"format", "sndiff-mlp"},
      {"version", kFormatVersion},
      {"dim", arch_.dim},
      {"hidden", arch_.hidden},
      {"activation", activation_name(arch_.activation)},
      {"data_variance", arch_.data_variance},
      {"inv_beta_output", arch_.inv_beta_output},
      {"sigma", schedule_.sigma()},
      {"layout", "per layer: weight (column-major rows x cols), then bias"},
  };
  const Vector theta = flat_parameters();
  write_flat(path, std::move(header), std::vector<double>(theta.data(), theta.data() + theta.size()));
}

MlpScoreNet MlpScoreNet::load(const std::filesystem::path& path) {
  const FlatFile f = read_flat(path);
  try {
    const auto& h = f.header;
    if (h.at("format") != "sndiff-mlp") throw DataError(path.string() + ": not an MLP model file");
    if (h.at("version").get<int>() != kFormatVersion) {
      throw DataError(path.string() + ": unsupported model format version");
    }
    Architecture arch;
    arch.dim = h.at("dim").get<Eigen::Index>();
    arch.hidden = h.at("hidden").get<std::vector<int>>();
    arch.activation = parse_activation(h.at("activation").get<std::string>());
    arch.data_variance = h.at("data_variance").get<double>();
    arch.inv_beta_output = h.at("inv_beta_output").get<bool>();
    DiffusionSchedule schedule(h.at("sigma").get<double>());
    Rng dummy(0);
    MlpScoreNet net(arch, schedule, dummy);
    if (static_cast<Eigen::Index>(f.data.size()) != net.parameter_count()) {
      throw DataError(path.string() + ": parameter count does not match architecture");
    }
    net.set_flat_parameters(
        Eigen::Map<const Vector>(f.data.data(), static_cast<Eigen::Index>(f.data.size())));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed model header: " + e.what());
  }
}

}  // namespace sndiff
