#include "subsense/encoder.hpp"

#include <cmath>
#include <limits>

#include "subsense/error.hpp"

namespace subsense::encoder {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

Matrix uniform(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

Matrix glorot(int fan_in, int fan_out, Rng& rng) {
  return uniform(fan_in, fan_out, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

// Row-wise RMS normalization with gain and bias. No mean subtraction: a
// constant vector such as the replicated slot fill must survive.
Matrix rms_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                Matrix& xhat, Eigen::VectorXd& inv_rms) {
  const auto d = static_cast<double>(x.cols());
  inv_rms = ((x.array().square().rowwise().sum() / d) + kNormEps).rsqrt();
  xhat = x.array().colwise() * inv_rms.array();
  Matrix y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix rms_norm_backward(const Matrix& dy, const Matrix& xhat,
                         const Eigen::VectorXd& inv_rms, const Matrix& gain,
                         Matrix& dgain, Matrix& dbias) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  const Eigen::VectorXd proj = (dxhat.array() * xhat.array()).rowwise().sum() / d;
  Matrix dx = dxhat - (xhat.array().colwise() * proj.array()).matrix();
  dx.array().colwise() *= inv_rms.array();
  return dx;
}

Matrix gelu(const Matrix& u) {
  return u.unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  });
}

Matrix gelu_grad(const Matrix& u) {
  return u.unaryExpr([](double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) +
           0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  });
}

Matrix dropout_mask(int rows, int cols, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
  return m;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

void check_example(const augment::AugmentedExample& ex, const ModelConfig& config) {
  const auto n = static_cast<std::size_t>(config.max_len);
  if (ex.base.ids.size() != n || ex.base.mask.size() != n) {
    throw ContractError("forward: example length does not match config max_len");
  }
  if (!ex.base.mask.empty() && ex.base.mask[0] == 0) {
    throw ContractError("forward: CLS position must be attended");
  }
  for (auto id : ex.base.ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw ContractError("forward: token id outside vocabulary");
    }
  }
}

Eigen::RowVectorXd forward_one(const augment::AugmentedExample& ex,
                               const EncoderParams& params, const ModelConfig& config,
                               const ForwardOptions& options, ExampleCache& c) {
  const int L = config.seq_len();
  const int d = config.d_model;
  const int H = config.n_heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = options.dropout && config.dropout_rate > 0.0;
  if (drop && !options.rng) throw ContractError("forward: dropout requires an rng");

  c.ids = ex.base.ids;
  c.slot_live = ex.mode != augment::AugmentMode::Baseline;
  c.emb_sum.resize(L, d);
  for (int t = 0; t < config.max_len; ++t) {
    c.emb_sum.row(t) = params.tok_emb.row(ex.base.ids[static_cast<std::size_t>(t)]) +
                       params.pos_emb.row(t);
  }
  const double fill = c.slot_live ? ex.slot_fill : 0.0;
  c.emb_sum.row(L - 1) =
      params.pos_emb.row(L - 1) + Eigen::RowVectorXd::Constant(d, fill);

  Matrix x = rms_norm(c.emb_sum, params.emb_norm_gain, params.emb_norm_bias,
                      c.emb_xhat, c.emb_inv_rms);
  if (drop) c.drop_emb = dropout_mask(L, d, config.dropout_rate, *options.rng);
  apply_mask(x, c.drop_emb);

  std::vector<int> keys;
  for (int j = 0; j < L; ++j) {
    if (ex.attends(static_cast<std::size_t>(j))) keys.push_back(j);
  }

  c.layers.resize(params.layers.size());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& p = params.layers[li];
    auto& lc = c.layers[li];
    lc.x_in = x;
    lc.a_in = rms_norm(x, p.norm1_gain, p.norm1_bias, lc.xhat1, lc.inv_rms1);
    lc.q = lc.a_in * p.wq;
    lc.q.rowwise() += p.bq.row(0);
    lc.k = lc.a_in * p.wk;
    lc.k.rowwise() += p.bk.row(0);
    lc.v = lc.a_in * p.wv;
    lc.v.rowwise() += p.bv.row(0);

    lc.probs.assign(static_cast<std::size_t>(H), Matrix());
    lc.attn_concat.resize(L, d);
    for (int h = 0; h < H; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const Matrix scores = (qh * kh.transpose()) * scale;
      Matrix& P = lc.probs[static_cast<std::size_t>(h)];
      P = Matrix::Zero(L, L);
      for (int i = 0; i < L; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j : keys) mx = std::max(mx, scores(i, j));
        double z = 0.0;
        for (int j : keys) {
          const double e = std::exp(scores(i, j) - mx);
          P(i, j) = e;
          z += e;
        }
        for (int j : keys) P(i, j) /= z;
      }
      lc.attn_concat.middleCols(h * dh, dh) = P * lc.v.middleCols(h * dh, dh);
    }
    Matrix attn = lc.attn_concat * p.wo;
    attn.rowwise() += p.bo.row(0);
    if (drop) lc.drop_attn = dropout_mask(L, d, config.dropout_rate, *options.rng);
    apply_mask(attn, lc.drop_attn);
    lc.h = x + attn;

    lc.f_in = rms_norm(lc.h, p.norm2_gain, p.norm2_bias, lc.xhat2, lc.inv_rms2);
    lc.u = lc.f_in * p.w1;
    lc.u.rowwise() += p.b1.row(0);
    lc.g = gelu(lc.u);
    Matrix f = lc.g * p.w2;
    f.rowwise() += p.b2.row(0);
    if (drop) lc.drop_ffn = dropout_mask(L, d, config.dropout_rate, *options.rng);
    apply_mask(f, lc.drop_ffn);
    x = lc.h + f;
  }
  c.cls = x.row(0);
  return c.cls * params.head_w + params.head_b.row(0);
}

void backward_one(const ExampleCache& c, const EncoderParams& params,
                  const ModelConfig& config, const Eigen::RowVectorXd& dlogit,
                  EncoderParams& g, double& dslot) {
  const int L = config.seq_len();
  const int d = config.d_model;
  const int H = config.n_heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.head_w += c.cls.transpose() * dlogit;
  g.head_b.row(0) += dlogit;
  Matrix dx = Matrix::Zero(L, d);
  dx.row(0) = dlogit * params.head_w.transpose();

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& p = params.layers[li];
    const auto& lc = c.layers[li];
    auto& gl = g.layers[li];

    // x = h + drop(ffn(norm2(h)))
    Matrix df = dx;
    apply_mask(df, lc.drop_ffn);
    gl.w2 += lc.g.transpose() * df;
    gl.b2.row(0) += df.colwise().sum();
    const Matrix du = ((df * p.w2.transpose()).array() * gelu_grad(lc.u).array()).matrix();
    gl.w1 += lc.f_in.transpose() * du;
    gl.b1.row(0) += du.colwise().sum();
    const Matrix df_in = du * p.w1.transpose();
    Matrix dh_res = dx + rms_norm_backward(df_in, lc.xhat2, lc.inv_rms2, p.norm2_gain,
                                           gl.norm2_gain, gl.norm2_bias);

    // h = x_in + drop(attn(norm1(x_in)))
    Matrix dattn = dh_res;
    apply_mask(dattn, lc.drop_attn);
    gl.wo += lc.attn_concat.transpose() * dattn;
    gl.bo.row(0) += dattn.colwise().sum();
    const Matrix dconcat = dattn * p.wo.transpose();
    Matrix dq(L, d), dk(L, d), dv(L, d);
    for (int h = 0; h < H; ++h) {
      const Matrix& P = lc.probs[static_cast<std::size_t>(h)];
      const auto dO = dconcat.middleCols(h * dh, dh);
      const Matrix dP = dO * lc.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = P.transpose() * dO;
      const Eigen::VectorXd row_dot = (dP.array() * P.array()).rowwise().sum();
      const Matrix dS = (P.array() * (dP.array().colwise() - row_dot.array())).matrix() * scale;
      dq.middleCols(h * dh, dh) = dS * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = dS.transpose() * lc.q.middleCols(h * dh, dh);
    }
    gl.wq += lc.a_in.transpose() * dq;
    gl.bq.row(0) += dq.colwise().sum();
    gl.wk += lc.a_in.transpose() * dk;
    gl.bk.row(0) += dk.colwise().sum();
    gl.wv += lc.a_in.transpose() * dv;
    gl.bv.row(0) += dv.colwise().sum();
    const Matrix da_in = dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
    dx = dh_res + rms_norm_backward(da_in, lc.xhat1, lc.inv_rms1, p.norm1_gain,
                                    gl.norm1_gain, gl.norm1_bias);
  }

  apply_mask(dx, c.drop_emb);
  const Matrix demb = rms_norm_backward(dx, c.emb_xhat, c.emb_inv_rms, params.emb_norm_gain,
                                        g.emb_norm_gain, g.emb_norm_bias);
  g.pos_emb += demb;
  for (int t = 0; t < config.max_len; ++t) {
    g.tok_emb.row(c.ids[static_cast<std::size_t>(t)]) += demb.row(t);
  }
  dslot += c.slot_live ? demb.row(L - 1).sum() : 0.0;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || n_layers < 0 || d_ff <= 0 || max_len < 3 ||
      vocab_size <= 4) {
    throw ConfigError("model config: dimensions must be positive (max_len >= 3, vocab_size > 4)");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model config: d_model " + std::to_string(d_model) +
                      " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (n_classes != 2) throw ConfigError("model config: n_classes is fixed at 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("model config: dropout_rate must be in [0, 1)");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},   {"n_heads", c.n_heads},
          {"n_layers", c.n_layers}, {"d_ff", c.d_ff},
          {"max_len", c.max_len},   {"vocab_size", c.vocab_size},
          {"n_classes", c.n_classes}, {"dropout_rate", c.dropout_rate},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.max_len = j.value("max_len", c.max_len);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

EncoderParams EncoderParams::zeros(const ModelConfig& config) {
  config.validate();
  const int d = config.d_model;
  const int ff = config.d_ff;
  EncoderParams p;
  p.tok_emb = Matrix::Zero(config.vocab_size, d);
  p.pos_emb = Matrix::Zero(config.seq_len(), d);
  p.emb_norm_gain = Matrix::Zero(1, d);
  p.emb_norm_bias = Matrix::Zero(1, d);
  p.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& l : p.layers) {
    l.norm1_gain = l.norm1_bias = Matrix::Zero(1, d);
    l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Matrix::Zero(1, d);
    l.norm2_gain = l.norm2_bias = Matrix::Zero(1, d);
    l.w1 = Matrix::Zero(d, ff);
    l.b1 = Matrix::Zero(1, ff);
    l.w2 = Matrix::Zero(ff, d);
    l.b2 = Matrix::Zero(1, d);
  }
  p.head_w = Matrix::Zero(d, 2);
  p.head_b = Matrix::Zero(1, 2);
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

void EncoderParams::check_shapes(const ModelConfig& config) const {
  if (layers.size() != static_cast<std::size_t>(config.n_layers)) {
    throw ContractError("parameter layer count does not match config");
  }
  const Eigen::Index d = config.d_model;
  const Eigen::Index ff = config.d_ff;
  auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ContractError(std::string("parameter shape mismatch: ") + name);
    }
  };
  expect(tok_emb, config.vocab_size, d, "tok_emb");
  expect(pos_emb, config.seq_len(), d, "pos_emb");
  expect(emb_norm_gain, 1, d, "emb_norm.gain");
  expect(emb_norm_bias, 1, d, "emb_norm.bias");
  for (const auto& l : layers) {
    expect(l.norm1_gain, 1, d, "norm1.gain");
    expect(l.norm1_bias, 1, d, "norm1.bias");
    for (const Matrix* w : {&l.wq, &l.wk, &l.wv, &l.wo}) expect(*w, d, d, "attn weight");
    for (const Matrix* b : {&l.bq, &l.bk, &l.bv, &l.bo}) expect(*b, 1, d, "attn bias");
    expect(l.norm2_gain, 1, d, "norm2.gain");
    expect(l.norm2_bias, 1, d, "norm2.bias");
    expect(l.w1, d, ff, "ffn.w1");
    expect(l.b1, 1, ff, "ffn.b1");
    expect(l.w2, ff, d, "ffn.w2");
    expect(l.b2, 1, d, "ffn.b2");
  }
  expect(head_w, d, 2, "head.w");
  expect(head_b, 1, 2, "head.b");
}

EncoderParams init(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int d = config.d_model;
  const int ff = config.d_ff;
  EncoderParams p = EncoderParams::zeros(config);
  p.tok_emb = uniform(config.vocab_size, d, 0.1, rng);
  p.pos_emb = uniform(config.seq_len(), d, 0.1, rng);
  p.emb_norm_gain.setOnes();
  for (auto& l : p.layers) {
    l.norm1_gain.setOnes();
    l.wq = glorot(d, d, rng);
    l.wk = glorot(d, d, rng);
    l.wv = glorot(d, d, rng);
    l.wo = glorot(d, d, rng);
    l.norm2_gain.setOnes();
    l.w1 = glorot(d, ff, rng);
    l.w2 = glorot(ff, d, rng);
  }
  p.head_w = glorot(d, 2, rng);
  return p;
}

ForwardOutput forward(std::span<const augment::AugmentedExample> batch,
                      const EncoderParams& params, const ModelConfig& config,
                      bool train_mode, Rng* rng) {
  return forward(batch, params, config,
                 ForwardOptions{.keep_cache = train_mode, .dropout = train_mode, .rng = rng});
}

ForwardOutput forward(std::span<const augment::AugmentedExample> batch,
                      const EncoderParams& params, const ModelConfig& config,
                      const ForwardOptions& options) {
  config.validate();
  params.check_shapes(config);
  ForwardOutput out;
  out.logits.resize(static_cast<Eigen::Index>(batch.size()), 2);
  if (options.keep_cache) out.cache.emplace();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    check_example(batch[b], config);
    ExampleCache c;
    out.logits.row(static_cast<Eigen::Index>(b)) = forward_one(batch[b], params, config, options, c);
    if (out.cache) out.cache->examples.push_back(std::move(c));
  }
  return out;
}

Gradients zero_gradients(const ModelConfig& config, std::size_t batch_size) {
  return Gradients{EncoderParams::zeros(config), std::vector<double>(batch_size, 0.0)};
}

void backward_accumulate(const ForwardCache& cache, const EncoderParams& params,
                         const ModelConfig& config, const Matrix& dlogits,
                         Gradients& grads) {
  const auto n = cache.examples.size();
  if (static_cast<std::size_t>(dlogits.rows()) != n || dlogits.cols() != 2) {
    throw ContractError("backward: upstream gradient shape does not match batch");
  }
  if (grads.slot_fill.size() < n) grads.slot_fill.resize(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    backward_one(cache.examples[b], params, config, dlogits.row(static_cast<Eigen::Index>(b)),
                 grads.params, grads.slot_fill[b]);
  }
}

Gradients backward(const std::optional<ForwardCache>& cache, const EncoderParams& params,
                   const ModelConfig& config, const Matrix& dlogits) {
  if (!cache) throw ContractError("backward: no cached activations (forward ran without train_mode)");
  Gradients g = zero_gradients(config, cache->examples.size());
  backward_accumulate(*cache, params, config, dlogits, g);
  return g;
}

}  // namespace subsense::encoder
