#include "run_config.hpp"

#include "sndiff/mlp.hpp"

#include <fstream>
#include <set>

namespace sndiff::app {

namespace {

/// Strict view of one JSON object: reads keys (materialising defaults) and
/// rejects keys that were never read.
class Section {
 public:
  Section(json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_.is_null()) j_ = json::object();
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_[key].is_null(); }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    if (!has(key)) j_[key] = fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(where(key) + ": required");
    return as<T>(key);
  }

  json& child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) j_[key] = json::object();
    return j_[key];
  }

  json& raw(const std::string& key) {
    seen_.insert(key);
    return j_[key];
  }

  void mark(const std::string& key) { seen_.insert(key); }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) {
    try {
      return j_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": wrong type (" + e.what() + ")");
    }
  }

  json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector to_vector(const json& j, const std::string& where) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(where + ": expected a number array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": expected a number array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(where + ": expected an array of rows");
  const std::size_t rows = j.size(), cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(where + ": expected numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

/// Vector-valued key that may be a scalar broadcast to `dim` entries.
Vector broadcast(const json& j, Eigen::Index dim, const std::string& where) {
  if (j.is_number()) {
    if (dim < 1) throw ConfigError(where + ": scalar value needs \"dim\"");
    return Vector::Constant(dim, j.get<double>());
  }
  Vector v = to_vector(j, where);
  if (dim > 0 && v.size() != dim) throw ConfigError(where + ": expected " + std::to_string(dim) + " entries");
  return v;
}

void parse_dataset(json& j, const std::string& path, std::uint64_t default_seed, DatasetSpec* out);
void parse_prior(json& j, const std::string& path, std::uint64_t seed);

void parse_dataset(json& j, const std::string& path, std::uint64_t default_seed, DatasetSpec* out) {
  Section s(j, path);
  DatasetSpec d;
  d.source = s.get<std::string>("source", "file");
  d.scale = s.get<double>("scale", 1.0);
  if (d.source == "file") {
    d.path = s.require<std::string>("path");
    d.format = s.get<std::string>("format", "flat");
    parse_dataset_format(d.format);
  } else {
    d.count = s.get<int>("count", 1000);
    d.seed = s.get<std::uint64_t>("seed", default_seed);
    if (d.count < 1) throw ConfigError(s.where("count") + ": must be >= 1");
    if (d.source == "smooth_images" || d.source == "sprites" || d.source == "sine_noise") {
      d.rows = s.get<int>("rows", 16);
      d.cols = s.get<int>("cols", 16);
      if (d.rows < 1 || d.cols < 1) throw ConfigError(path + ": rows and cols must be >= 1");
    }
    if (d.source == "sprites") {
      d.weight = s.get<double>("weight", 1.0);
      d.max_shift = s.get<int>("max_shift", 2);
      d.sprite_dir = s.get<std::string>("sprite_dir", "");
    } else if (d.source == "sine_noise") {
      d.avg_std = s.get<double>("avg_std", 0.2);
      d.period = s.get<double>("period", 16.0);
      d.axis = s.get<std::string>("axis", "column");
      parse_sine_axis(d.axis);
    } else if (d.source == "prior") {
      json& p = s.child("prior");
      parse_prior(p, s.where("prior"), d.seed);
      d.prior = p;
    } else if (d.source != "smooth_images") {
      throw ConfigError(s.where("source") + ": unknown dataset source '" + d.source + "'");
    }
  }
  s.finish();
  if (out) *out = d;
}

void parse_prior(json& j, const std::string& path, std::uint64_t seed) {
  Section s(j, path);
  const auto kind = s.require<std::string>("kind");
  if (kind == "gaussian" || kind == "delta") {
    const int dim = s.get<int>("dim", 0);
    if (!s.has("mean")) throw ConfigError(s.where("mean") + ": required");
    const Vector mean = broadcast(s.raw("mean"), dim, s.where("mean"));
    if (kind == "gaussian") {
      if (s.has("covariance")) {
        const Matrix c = to_matrix(s.raw("covariance"), s.where("covariance"));
        if (c.rows() != mean.size() || c.cols() != mean.size())
          throw ConfigError(s.where("covariance") + ": shape does not match the mean");
        if (s.has("variance")) throw ConfigError(path + ": give either variance or covariance");
      } else {
        if (!s.has("variance")) s.raw("variance") = 1.0;
        const Vector v = broadcast(s.raw("variance"), mean.size(), s.where("variance"));
        if ((v.array() < 0.0).any()) throw ConfigError(s.where("variance") + ": must be >= 0");
      }
    }
  } else if (kind == "sine") {
    if (s.get<int>("rows", 1) < 1 || s.require<int>("cols") < 1) throw ConfigError(path + ": rows, cols >= 1");
    if (!(s.get<double>("avg_std", 0.2) >= 0.0)) throw ConfigError(s.where("avg_std") + ": must be >= 0");
    s.get<double>("period", 16.0);
    parse_sine_axis(s.get<std::string>("axis", "column"));
    s.get<double>("mean", 0.0);
    s.get<double>("floor", 0.0);
  } else if (kind == "gaussian_fit") {
    parse_dataset(s.child("dataset"), s.where("dataset"), derive_seed(seed, Stream::Parameters, 11), nullptr);
    if (!(s.get<double>("floor", 1e-3) >= 0.0)) throw ConfigError(s.where("floor") + ": must be >= 0");
    const auto cov = s.get<std::string>("covariance", "full");
    if (cov != "full" && cov != "diagonal" && cov != "isotropic")
      throw ConfigError(s.where("covariance") + ": expected full, diagonal or isotropic");
  } else if (kind == "mixture") {
    const Vector w = to_vector(s.require<json>("weights"), s.where("weights"));
    const json means = s.require<json>("means");
    const json vars = s.require<json>("variances");
    if (!means.is_array() || !vars.is_array() || means.size() != static_cast<std::size_t>(w.size()) ||
        vars.size() != means.size())
      throw ConfigError(path + ": weights, means and variances need one entry per component");
  } else if (kind == "mlp") {
    s.require<std::string>("model");
  } else {
    throw ConfigError(s.where("kind") + ": unknown prior kind '" + kind + "'");
  }
  s.finish();
}

std::uint64_t role_seed(std::uint64_t seed, std::uint64_t role) {
  return derive_seed(seed, Stream::Parameters, role);
}

void parse_problem(json& j, std::uint64_t seed, ProblemSpec* out) {
  Section s(j, "problem");
  ProblemSpec p;
  p.count = s.get<int>("count", 1);
  if (p.count < 1) throw ConfigError("problem.count: must be >= 1");
  if (s.has("image_shape")) {
    const auto shape = s.require<std::vector<int>>("image_shape");
    if (shape.size() != 2 || shape[0] < 1 || shape[1] < 1)
      throw ConfigError("problem.image_shape: expected [rows, cols]");
    p.image_shape = std::make_pair(shape[0], shape[1]);
  } else {
    s.raw("image_shape") = nullptr;
  }
  const auto mix = s.get<std::vector<double>>("mix", {1.0, 1.0});
  if (mix.size() != 2) throw ConfigError("problem.mix: expected [a, b]");
  p.mix_a = mix[0];
  p.mix_b = mix[1];

  {
    json& oj = s.child("operator");
    Section o(oj, "problem.operator");
    const auto kind = o.get<std::string>("kind", "identity");
    if (kind == "identity") {
      if (o.require<int>("dim") < 1) throw ConfigError("problem.operator.dim: must be >= 1");
    } else if (kind == "scaled_identity") {
      if (o.require<int>("dim") < 1) throw ConfigError("problem.operator.dim: must be >= 1");
      o.get<double>("scale", 1.0);
    } else if (kind == "dense") {
      to_matrix(o.require<json>("matrix"), "problem.operator.matrix");
    } else if (kind == "cs") {
      if (o.require<int>("dim") < 1) throw ConfigError("problem.operator.dim: must be >= 1");
      if (!(o.get<double>("factor", 2.0) >= 1.0)) throw ConfigError("problem.operator.factor: must be >= 1");
      o.get<std::uint64_t>("seed", role_seed(seed, 20));
    } else {
      throw ConfigError("problem.operator.kind: unknown operator '" + kind + "'");
    }
    o.finish();
    p.op = oj;
  }

  if (s.has("y")) {
    p.y = to_vector(s.raw("y"), "problem.y");
    if (p.count != 1) throw ConfigError("problem.y: an explicit observation requires count = 1");
    if (s.has("signal") || s.has("noise")) throw ConfigError("problem: give either y or signal/noise");
  } else {
    s.raw("y") = nullptr;
    json& sj = s.child("signal");
    Section sg(sj, "problem.signal");
    const auto src = sg.require<std::string>("source");
    if (src == "vector") {
      to_vector(sg.require<json>("value"), "problem.signal.value");
    } else if (src == "dataset") {
      parse_dataset(sg.child("dataset"), "problem.signal.dataset", role_seed(seed, 21), nullptr);
    } else if (src != "prior" && src != "smooth_image") {
      throw ConfigError("problem.signal.source: unknown source '" + src + "'");
    }
    sg.finish();
    p.signal = sj;

    json& nj = s.child("noise");
    Section ns(nj, "problem.noise");
    const auto nsrc = ns.require<std::string>("source");
    if (nsrc == "sine") {
      ns.get<double>("avg_std", 0.2);
      ns.get<double>("period", 16.0);
      parse_sine_axis(ns.get<std::string>("axis", "column"));
    } else if (nsrc == "sprite") {
      ns.get<double>("weight", 1.0);
      ns.get<int>("max_shift", 2);
      ns.get<std::string>("sprite_dir", "");
    } else if (nsrc == "gaussian_iid") {
      if (!(ns.get<double>("std", 0.1) >= 0.0)) throw ConfigError("problem.noise.std: must be >= 0");
    } else if (nsrc == "vector") {
      to_vector(ns.require<json>("value"), "problem.noise.value");
    } else if (nsrc == "prior") {
      if (p.mix_b != 1.0) throw ConfigError("problem.noise: source 'prior' requires mix b = 1");
    } else if (nsrc != "zero") {
      throw ConfigError("problem.noise.source: unknown source '" + nsrc + "'");
    }
    ns.finish();
    p.noise = nj;
  }
  s.finish();
  if (out) *out = p;
}

}  // namespace

RunConfig parse_config(json j, const Overrides& overrides) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.output_dir) j["output_dir"] = overrides.output_dir->string();
  if (overrides.rule) j["guidance"]["rule"] = *overrides.rule;

  RunConfig c;
  Section top(j, "config");
  c.experiment = top.get<std::string>("experiment", "run");
  c.seed = top.get<std::uint64_t>("seed", 0);
  c.output_dir = top.get<std::string>("output_dir", "runs/" + c.experiment);

  {
    Section s(top.child("schedule"), "schedule");
    c.sigma = s.get<double>("sigma", 25.0);
    s.finish();
    DiffusionSchedule check(c.sigma);
  }

  {
    Section g(top.child("guidance"), "guidance");
    c.guidance.rule = parse_rule(g.get<std::string>("rule", "pigdm"));
    c.guidance.lambda_prime = g.get<double>("lambda_prime", 1.0);
    c.guidance.kappa_prime = g.get<double>("kappa_prime", 1.0);
    c.guidance.rho = g.get<double>("rho", 1.0);
    const auto rsq = g.get<std::string>("r_sq", "positive");
    if (rsq == "positive") c.guidance.r_sq_form = RsqForm::Positive;
    else if (rsq == "literal") c.guidance.r_sq_form = RsqForm::Literal;
    else if (rsq == "constant") c.guidance.r_sq_form = RsqForm::Constant;
    else throw ConfigError("guidance.r_sq: expected positive, literal or constant");
    if (c.guidance.r_sq_form == RsqForm::Constant) c.guidance.r_sq_value = g.get<double>("r_sq_value", 1.0);
    c.guidance.residual_floor = g.get<double>("residual_floor", 1e-8);
    const auto jac = g.get<std::string>("jacobian", "exact");
    if (jac == "exact") c.guidance.jacobian = JacobianMode::Exact;
    else if (jac == "identity") c.guidance.jacobian = JacobianMode::Identity;
    else throw ConfigError("guidance.jacobian: expected exact or identity");
    const auto pn = g.get<std::string>("projection_noise", "fresh");
    if (pn == "fresh") c.guidance.projection_noise = ProjectionNoise::Fresh;
    else if (pn == "frozen") c.guidance.projection_noise = ProjectionNoise::Frozen;
    else throw ConfigError("guidance.projection_noise: expected fresh or frozen");
    c.guidance.time_floor = g.get<double>("time_floor", kDefaultTimeFloor);
    g.finish();
    c.guidance.validate();
  }

  {
    Section s(top.child("sampler"), "sampler");
    c.sampler.steps = s.get<int>("steps", 600);
    c.sampler.chains = s.get<int>("chains", 1);
    c.sampler.record_trajectory = s.get<bool>("record_trajectory", false);
    c.sampler.denoise_last = s.get<bool>("denoise_last", true);
    c.sampler.order = parse_step_order(s.get<std::string>("order", "dc_first"));
    c.sampler.divergence_factor = s.get<double>("divergence_factor", 1e6);
    c.sampler.threads = s.get<unsigned>("threads", 0u);
    s.finish();
    c.sampler.schedule = DiffusionSchedule(c.sigma);
    c.sampler.guidance = c.guidance;
    c.sampler.seed = c.seed;
    c.sampler.validate();
  }

  if (top.has("signal_prior")) {
    json& pj = top.child("signal_prior");
    parse_prior(pj, "signal_prior", role_seed(c.seed, 1));
    c.signal_prior = PriorSpec{pj.at("kind").get<std::string>(), pj};
  } else {
    top.mark("signal_prior");
  }
  if (top.has("noise_prior")) {
    json& pj = top.child("noise_prior");
    parse_prior(pj, "noise_prior", role_seed(c.seed, 2));
    c.noise_prior = PriorSpec{pj.at("kind").get<std::string>(), pj};
  } else {
    top.mark("noise_prior");
  }
  if (top.has("problem")) {
    ProblemSpec p;
    parse_problem(top.child("problem"), c.seed, &p);
    c.problem = p;
  } else {
    top.mark("problem");
  }

  if (top.has("train")) {
    Section s(top.child("train"), "train");
    TrainSpec t;
    t.target = s.get<std::string>("target", "signal");
    if (t.target != "signal" && t.target != "noise") throw ConfigError("train.target: expected signal or noise");
    parse_dataset(s.child("dataset"), "train.dataset", role_seed(c.seed, 3), &t.dataset);
    t.hidden = s.get<std::vector<int>>("hidden", {64, 64});
    t.activation = s.get<std::string>("activation", "silu");
    parse_activation(t.activation);
    t.config.batch_size = s.get<int>("batch_size", 64);
    t.config.steps = s.get<int>("steps", 5000);
    t.config.learning_rate = s.get<double>("learning_rate", 1e-3);
    t.config.momentum = s.get<double>("momentum", 0.9);
    t.config.epsilon = s.get<double>("epsilon", 1e-3);
    t.config.weighting = parse_loss_weighting(s.get<std::string>("weighting", "none"));
    t.config.grad_clip = s.get<double>("grad_clip", 0.0);
    t.config.log_every = s.get<int>("log_every", 100);
    t.config.seed = s.get<std::uint64_t>("seed", role_seed(c.seed, 4));
    s.finish();
    t.config.validate();
    c.train = t;
  } else {
    top.mark("train");
  }

  if (top.has("bench")) {
    Section s(top.child("bench"), "bench");
    BenchSpec b;
    b.rules = s.get<std::vector<std::string>>("rules", b.rules);
    for (const auto& r : b.rules) parse_rule(r);
    b.steps = s.get<std::vector<int>>("steps", b.steps);
    b.dims = s.get<std::vector<int>>("dims", b.dims);
    b.repeats = s.get<int>("repeats", 5);
    s.finish();
    if (b.repeats < 1) throw ConfigError("bench.repeats: must be >= 1");
    for (int v : b.steps) if (v < 1) throw ConfigError("bench.steps: entries must be >= 1");
    for (int v : b.dims) if (v < 1) throw ConfigError("bench.dims: entries must be >= 1");
    c.bench = b;
  } else {
    top.mark("bench");
  }

  {
    Section s(top.child("eval"), "eval");
    c.eval_clip = s.get<bool>("clip", true);
    s.finish();
  }
  top.finish();
  c.resolved = j;
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(std::move(j), overrides);
}

std::vector<Vector> build_dataset(const DatasetSpec& spec, const DiffusionSchedule& schedule) {
  std::vector<Vector> out;
  if (spec.source == "file") {
    if (!std::filesystem::exists(spec.path)) throw DataError("dataset not found: " + spec.path.string());
    out = load_dataset(spec.path, parse_dataset_format(spec.format));
  } else {
    Rng rng = make_rng(spec.seed, Stream::Problem);
    if (spec.source == "smooth_images") {
      for (int i = 0; i < spec.count; ++i) out.push_back(gen_smooth_image(spec.rows, spec.cols, rng));
    } else if (spec.source == "sprites") {
      const SpriteLibrary lib = spec.sprite_dir.empty() ? procedural_digit_library(spec.rows, spec.cols)
                                                         : load_sprite_library(spec.sprite_dir);
      for (int i = 0; i < spec.count; ++i)
        out.push_back(gen_sprite_noise(spec.rows, spec.cols, lib, rng, spec.weight, spec.max_shift));
    } else if (spec.source == "sine_noise") {
      const SineAxis axis = parse_sine_axis(spec.axis);
      for (int i = 0; i < spec.count; ++i)
        out.push_back(gen_sine_noise(spec.rows, spec.cols, rng, spec.avg_std, spec.period, axis));
    } else if (spec.source == "prior") {
      const Prior p = build_prior(PriorSpec{spec.prior.at("kind").get<std::string>(), spec.prior}, schedule, spec.seed);
      if (!p.samplable) throw ConfigError("dataset: prior of kind '" + spec.prior.at("kind").get<std::string>() + "' cannot be sampled");
      for (int i = 0; i < spec.count; ++i) out.push_back(p.sample(rng));
    }
  }
  if (spec.scale != 1.0) for (auto& v : out) v *= spec.scale;
  return out;
}

Prior build_prior(const PriorSpec& spec, const DiffusionSchedule& schedule, std::uint64_t seed) {
  const json& j = spec.raw;
  Prior p;
  const std::string& kind = spec.kind;
  auto gaussian = [&](const Vector& mean, std::optional<Matrix> cov, std::optional<Vector> var) {
    std::shared_ptr<AnalyticGaussianScore> g;
    if (cov) {
      g = std::make_shared<AnalyticGaussianScore>(mean, *cov, schedule);
      p.covariance = *cov;
    } else {
      g = std::make_shared<AnalyticGaussianScore>(mean, *var, schedule);
      p.covariance = Matrix(var->asDiagonal());
    }
    p.score = g;
    p.mean = mean;
    p.samplable = true;
    p.sample = [g](Rng& rng) { return g->sample(rng); };
  };
  if (kind == "gaussian" || kind == "delta") {
    const int dim = j.value("dim", 0);
    const Vector mean = broadcast(j.at("mean"), dim, "prior.mean");
    if (kind == "delta") {
      gaussian(mean, std::nullopt, Vector::Zero(mean.size()));
    } else if (j.contains("covariance") && !j.at("covariance").is_null()) {
      gaussian(mean, to_matrix(j.at("covariance"), "prior.covariance"), std::nullopt);
    } else {
      gaussian(mean, std::nullopt, broadcast(j.at("variance"), mean.size(), "prior.variance"));
    }
  } else if (kind == "sine") {
    const Vector std = sine_noise_std(j.at("rows").get<int>(), j.at("cols").get<int>(), j.at("avg_std").get<double>(),
                                      j.at("period").get<double>(), parse_sine_axis(j.at("axis").get<std::string>()));
    Vector var = std.array().square();
    var.array() += j.at("floor").get<double>();
    gaussian(Vector::Constant(std.size(), j.at("mean").get<double>()), std::nullopt, var);
  } else if (kind == "gaussian_fit") {
    DatasetSpec ds;
    json copy = j.at("dataset");
    parse_dataset(copy, "prior.dataset", derive_seed(seed, Stream::Parameters, 11), &ds);
    const auto data = build_dataset(ds, schedule);
    if (data.size() < 2) throw DataError("gaussian_fit: need at least two samples");
    const double floor = j.at("floor").get<double>();
    const auto fitted = AnalyticGaussianScore::fit(data, floor, schedule);
    const std::string mode = j.at("covariance").get<std::string>();
    if (mode == "full") {
      gaussian(fitted.mean(), fitted.covariance(), std::nullopt);
    } else {
      Vector var = fitted.covariance().diagonal();
      if (mode == "isotropic") var.setConstant(var.mean());
      gaussian(fitted.mean(), std::nullopt, var);
    }
  } else if (kind == "mixture") {
    const Vector w = to_vector(j.at("weights"), "prior.weights");
    std::vector<Vector> means, vars;
    for (const auto& m : j.at("means")) means.push_back(to_vector(m, "prior.means"));
    for (const auto& v : j.at("variances")) vars.push_back(to_vector(v, "prior.variances"));
    auto g = std::make_shared<GaussianMixtureScore>(w, means, vars, schedule);
    p.score = g;
    p.samplable = true;
    p.sample = [g](Rng& rng) { return g->sample(rng); };
  } else if (kind == "mlp") {
    const std::filesystem::path path = j.at("model").get<std::string>();
    if (!std::filesystem::exists(path)) throw DataError("model file not found: " + path.string());
    auto net = std::make_shared<MlpScoreNet>(MlpScoreNet::load(path));
    if (std::abs(net->schedule().sigma() - schedule.sigma()) > 1e-12)
      throw ConfigError("model " + path.string() + " was trained with a different schedule sigma");
    p.score = net;
  } else {
    throw ConfigError("unknown prior kind '" + kind + "'");
  }
  return p;
}

InverseProblem build_problem(const RunConfig& config, int index, const Prior& signal_prior,
                             const Prior& noise_prior) {
  if (!config.problem) throw ConfigError("config has no problem section");
  const ProblemSpec& spec = *config.problem;
  const json& o = spec.op;
  const std::string kind = o.at("kind").get<std::string>();
  std::optional<LinearOperator> A;
  if (kind == "identity") {
    A = LinearOperator::identity(o.at("dim").get<int>());
  } else if (kind == "scaled_identity") {
    A = LinearOperator::scaled_identity(o.at("dim").get<int>(), o.at("scale").get<double>());
  } else if (kind == "dense") {
    A = LinearOperator::dense(to_matrix(o.at("matrix"), "problem.operator.matrix"));
  } else {
    Rng op_rng = make_rng(o.at("seed").get<std::uint64_t>(), Stream::Problem);
    A = make_cs_operator(o.at("dim").get<int>(), o.at("factor").get<double>(), op_rng);
  }
  const Eigen::Index d = A->cols(), m = A->rows();

  if (spec.y) {
    if (spec.y->size() != m) throw ShapeError("problem.y: expected " + std::to_string(m) + " entries");
    InverseProblem p;
    p.A = *A;
    p.y = *spec.y;
    p.mix_a = spec.mix_a;
    p.mix_b = spec.mix_b;
    p.provenance = {{"operator", kind_name(A->kind())}, {"source", "explicit"}};
    return p;
  }

  Rng rng = make_rng(config.seed, Stream::Problem, static_cast<std::uint64_t>(index));
  auto shape_for = [&](Eigen::Index n) -> std::pair<int, int> {
    if (spec.image_shape && static_cast<Eigen::Index>(spec.image_shape->first) * spec.image_shape->second == n)
      return *spec.image_shape;
    return {1, static_cast<int>(n)};
  };

  const json& sj = spec.signal;
  const std::string ssrc = sj.at("source").get<std::string>();
  Vector x;
  if (ssrc == "vector") {
    x = to_vector(sj.at("value"), "problem.signal.value");
  } else if (ssrc == "prior") {
    if (!signal_prior.samplable) throw ConfigError("problem.signal: the signal prior cannot be sampled");
    x = signal_prior.sample(rng);
  } else if (ssrc == "smooth_image") {
    const auto [r, c] = shape_for(d);
    x = gen_smooth_image(r, c, rng);
  } else {
    DatasetSpec ds;
    json copy = sj.at("dataset");
    parse_dataset(copy, "problem.signal.dataset", 0, &ds);
    const auto data = build_dataset(ds, config.schedule());
    if (index >= static_cast<int>(data.size()))
      throw DataError("problem.signal.dataset: has " + std::to_string(data.size()) + " records, problem " +
                      std::to_string(index) + " requested");
    x = data[index];
  }
  if (x.size() != d) throw ShapeError("problem.signal: expected " + std::to_string(d) + " entries");

  const json& nj = spec.noise;
  const std::string nsrc = nj.at("source").get<std::string>();
  Vector n;
  if (nsrc == "zero") {
    n = Vector::Zero(m);
  } else if (nsrc == "vector") {
    n = to_vector(nj.at("value"), "problem.noise.value");
  } else if (nsrc == "prior") {
    if (!noise_prior.samplable) throw ConfigError("problem.noise: the noise prior cannot be sampled");
    n = noise_prior.sample(rng);
  } else if (nsrc == "gaussian_iid") {
    n = nj.at("std").get<double>() * standard_normal(m, rng);
  } else if (nsrc == "sine") {
    const auto [r, c] = shape_for(m);
    n = gen_sine_noise(r, c, rng, nj.at("avg_std").get<double>(), nj.at("period").get<double>(),
                       parse_sine_axis(nj.at("axis").get<std::string>()));
  } else {
    const auto [r, c] = shape_for(m);
    const std::string dir = nj.at("sprite_dir").get<std::string>();
    const SpriteLibrary lib = dir.empty() ? procedural_digit_library(r, c) : load_sprite_library(dir);
    n = gen_sprite_noise(r, c, lib, rng, nj.at("weight").get<double>(), nj.at("max_shift").get<int>());
  }
  if (n.size() != m) throw ShapeError("problem.noise: expected " + std::to_string(m) + " entries");

  InverseProblem p = observe(x, *A, n, spec.mix_a, spec.mix_b);
  p.provenance["signal"] = ssrc;
  p.provenance["noise"] = nsrc;
  p.provenance["index"] = index;
  p.provenance["seed"] = config.seed;
  return p;
}

}  // namespace sndiff::app
