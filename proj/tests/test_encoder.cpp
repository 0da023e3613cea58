#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "support.hpp"
#include "subsense/encoder.hpp"
#include "subsense/error.hpp"

using namespace subsense;
using namespace subsense::encoder;
using augment::AugmentedExample;
using augment::AugmentMode;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 16;
  c.max_len = 6;
  c.vocab_size = 12;
  c.dropout_rate = 0.0;
  c.seed = 42;
  return c;
}

// Random example with a CLS/tokens/SEP/PAD layout.
AugmentedExample random_example(const ModelConfig& c, std::mt19937_64& rng, AugmentMode mode,
                                bool slot_mask) {
  std::uniform_int_distribution<int> len(0, c.max_len - 2);
  std::uniform_int_distribution<int> tok(4, c.vocab_size - 1);
  std::uniform_real_distribution<double> fill(0.0, 1.0);
  const int k = len(rng);
  AugmentedExample ex;
  ex.base.ids.assign(static_cast<std::size_t>(c.max_len), textprep::Vocab::kPad);
  ex.base.mask.assign(static_cast<std::size_t>(c.max_len), 0);
  ex.base.ids[0] = textprep::Vocab::kCls;
  ex.base.mask[0] = 1;
  for (int i = 1; i <= k; ++i) {
    ex.base.ids[static_cast<std::size_t>(i)] = tok(rng);
    ex.base.mask[static_cast<std::size_t>(i)] = 1;
  }
  ex.base.ids[static_cast<std::size_t>(k + 1)] = textprep::Vocab::kSep;
  ex.base.mask[static_cast<std::size_t>(k + 1)] = 1;
  ex.base.n_real = static_cast<std::size_t>(k + 2);
  ex.slot_fill = fill(rng);
  ex.mode = mode;
  ex.slot_mask = slot_mask;
  return ex;
}

AugmentedExample as_baseline(AugmentedExample ex) {
  ex.mode = AugmentMode::Baseline;
  ex.slot_mask = false;
  ex.slot_fill = 0.0;
  return ex;
}

// Perturbs every parameter so gains and biases are not at their trivial
// initial values.
void jitter(EncoderParams& p, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  p.for_each([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += u(rng);
  });
}

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

}  // namespace

TEST_CASE("init determinism and config validation") {
  const auto c = tiny_config();
  const auto a = init(c);
  const auto b = init(c);
  std::vector<Matrix> ta, tb;
  a.for_each([&](const std::string&, const Matrix& m) { ta.push_back(m); });
  b.for_each([&](const std::string&, const Matrix& m) { tb.push_back(m); });
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);

  auto c2 = c;
  c2.seed = 43;
  CHECK(init(c2).tok_emb != a.tok_emb);
  CHECK(a.emb_norm_gain == Matrix::Ones(1, c.d_model));
  CHECK(a.layers[0].bq == Matrix::Zero(1, c.d_model));
  CHECK(a.all_finite());

  ModelConfig bad = c;
  bad.d_model = 65;
  bad.n_heads = 4;
  CHECK_THROWS_AS(init(bad), ConfigError);
  bad = c;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.n_classes = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto j = to_json(c);
  const auto back = model_config_from_json(j);
  CHECK(to_json(back) == j);
}

TEST_CASE("forward contract errors") {
  const auto c = tiny_config();
  const auto p = init(c);
  std::mt19937_64 rng(1);
  auto ex = random_example(c, rng, AugmentMode::SS, true);
  ex.base.ids.push_back(2);
  ex.base.mask.push_back(0);
  CHECK_THROWS_AS(forward(std::span(&ex, 1), p, c, false), ContractError);

  auto ex2 = random_example(c, rng, AugmentMode::SS, true);
  ex2.base.ids[1] = c.vocab_size;
  CHECK_THROWS_AS(forward(std::span(&ex2, 1), p, c, false), ContractError);

  auto wrong = c;
  wrong.d_model = 4;
  const auto ex3 = random_example(c, rng, AugmentMode::SS, true);
  CHECK_THROWS_AS(forward(std::span(&ex3, 1), p, wrong, false), ContractError);

  auto drop = c;
  drop.dropout_rate = 0.5;
  CHECK_THROWS_AS(forward(std::span(&ex3, 1), p, drop, true, nullptr), ContractError);
}

TEST_CASE("masked slot and PAD ids cannot influence the logits") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = tiny_config();
    c.seed = static_cast<std::uint64_t>(trial);
    c.n_layers = 1 + trial % 3;
    auto p = init(c);
    jitter(p, rng, 0.2);
    std::vector<AugmentedExample> ss, base, pad_changed;
    for (int b = 0; b < 3; ++b) {
      auto ex = random_example(c, rng, AugmentMode::SS, false);
      ss.push_back(ex);
      base.push_back(as_baseline(ex));
      auto swapped = ex;
      for (std::size_t i = 0; i < swapped.base.ids.size(); ++i) {
        if (!swapped.base.mask[i]) swapped.base.ids[i] = 4 + static_cast<int>(i % 5);
      }
      pad_changed.push_back(swapped);
    }
    const auto a = forward(ss, p, c, false).logits;
    const auto b = forward(base, p, c, false).logits;
    const auto d = forward(pad_changed, p, c, false).logits;
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((a - d).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("attention rows over unmasked keys sum to one") {
  const auto c = tiny_config();
  std::mt19937_64 rng(5);
  auto p = init(c);
  jitter(p, rng, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ex = random_example(c, rng, trial % 2 ? AugmentMode::SS : AugmentMode::SO, trial % 3 != 0);
    const auto out = forward(std::span(&ex, 1), p, c, ForwardOptions{.keep_cache = true});
    for (const auto& P : out.cache->examples[0].layers[0].probs) {
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
          if (ex.attends(static_cast<std::size_t>(j))) {
            sum += P(i, j);
          } else {
            CHECK(P(i, j) == 0.0);
          }
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("zero-layer model equals head of the normalized CLS embedding") {
  ModelConfig c;
  c.d_model = 2;
  c.n_heads = 1;
  c.n_layers = 0;
  c.d_ff = 2;
  c.max_len = 3;
  c.vocab_size = 5;
  c.dropout_rate = 0.0;
  auto p = EncoderParams::zeros(c);
  p.tok_emb(0, 0) = 0.5;
  p.tok_emb(0, 1) = -1.0;
  p.pos_emb(0, 0) = 0.25;
  p.pos_emb(0, 1) = 0.5;
  p.emb_norm_gain << 2.0, 0.5;
  p.emb_norm_bias << 0.1, -0.2;
  p.head_w << 1.0, -1.0, 0.5, 2.0;
  p.head_b << 0.3, -0.7;

  AugmentedExample ex;
  ex.base.ids = {0, 4, 1};
  ex.base.mask = {1, 1, 1};
  ex.base.n_real = 3;
  ex.mode = AugmentMode::SO;
  ex.slot_mask = true;
  ex.slot_fill = 0.8;

  // x = (0.75, -0.5); rms = sqrt((0.5625 + 0.25) / 2 + 1e-5)
  const double rms = std::sqrt((0.5625 + 0.25) / 2.0 + 1e-5);
  const double y0 = 2.0 * 0.75 / rms + 0.1;
  const double y1 = 0.5 * -0.5 / rms - 0.2;
  const double l0 = y0 * 1.0 + y1 * 0.5 + 0.3;
  const double l1 = y0 * -1.0 + y1 * 2.0 - 0.7;
  const auto out = forward(std::span(&ex, 1), p, c, false);
  CHECK(out.logits(0, 0) == doctest::Approx(l0).epsilon(1e-12));
  CHECK(out.logits(0, 1) == doctest::Approx(l1).epsilon(1e-12));
}

namespace {

struct GradCheck {
  double max_rel = 0.0;
  double slot_max_rel = 0.0;
  std::size_t checked = 0;
};

GradCheck run_grad_check(const ModelConfig& c, std::vector<AugmentedExample> batch,
                         std::uint64_t dropout_seed) {
  std::mt19937_64 rng(99);
  auto p = init(c);
  jitter(p, rng, 0.2);
  Matrix upstream(static_cast<Eigen::Index>(batch.size()), 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = u(rng);

  const bool drop = c.dropout_rate > 0.0;
  const auto loss = [&](const EncoderParams& params, const std::vector<AugmentedExample>& xs) {
    Rng r(dropout_seed);
    const auto out = forward(xs, params, c, ForwardOptions{.keep_cache = false, .dropout = drop, .rng = &r});
    return (out.logits.array() * upstream.array()).sum();
  };
  Rng r(dropout_seed);
  const auto out = forward(batch, p, c, ForwardOptions{.keep_cache = true, .dropout = drop, .rng = &r});
  const auto g = backward(out.cache, p, c, upstream);

  const double h = 1e-5;
  GradCheck res;
  std::vector<Matrix*> ps, gs;
  p.for_each([&](const std::string&, Matrix& m) { ps.push_back(&m); });
  auto gcopy = g.params;
  gcopy.for_each([&](const std::string&, Matrix& m) { gs.push_back(&m); });
  for (std::size_t t = 0; t < ps.size(); ++t) {
    for (Eigen::Index i = 0; i < ps[t]->size(); ++i) {
      double& w = ps[t]->data()[i];
      const double orig = w;
      w = orig + h;
      const double up = loss(p, batch);
      w = orig - h;
      const double down = loss(p, batch);
      w = orig;
      const double num = (up - down) / (2 * h);
      res.max_rel = std::max(res.max_rel, rel_error(gs[t]->data()[i], num));
      ++res.checked;
    }
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto xs = batch;
    xs[b].slot_fill = batch[b].slot_fill + h;
    const double up = loss(p, xs);
    xs[b].slot_fill = batch[b].slot_fill - h;
    const double down = loss(p, xs);
    const double num = (up - down) / (2 * h);
    res.slot_max_rel = std::max(res.slot_max_rel, rel_error(g.slot_fill[b], num));
  }
  return res;
}

}  // namespace

TEST_CASE("finite-difference gradient check") {
  auto c = tiny_config();
  std::mt19937_64 rng(17);
  std::vector<AugmentedExample> batch = {random_example(c, rng, AugmentMode::SS, true),
                                         random_example(c, rng, AugmentMode::SO, true)};
  SUBCASE("dropout off") {
    const auto r = run_grad_check(c, batch, 0);
    MESSAGE("max relative error " << r.max_rel << ", slot " << r.slot_max_rel << " over " << r.checked);
    CHECK(r.checked == init(c).parameter_count());
    CHECK(r.max_rel < 1e-4);
    CHECK(r.slot_max_rel < 1e-4);
  }
  SUBCASE("dropout replayed from stored masks") {
    c.dropout_rate = 0.2;
    const auto r = run_grad_check(c, batch, 1234);
    MESSAGE("with dropout: max relative error " << r.max_rel << ", slot " << r.slot_max_rel);
    CHECK(r.max_rel < 1e-4);
    CHECK(r.slot_max_rel < 1e-4);
  }
}

TEST_CASE("backward edge cases") {
  const auto c = tiny_config();
  std::mt19937_64 rng(8);
  auto p = init(c);
  const std::vector<AugmentedExample> batch = {random_example(c, rng, AugmentMode::SS, false),
                                               random_example(c, rng, AugmentMode::SS, true)};
  const auto out = forward(batch, p, c, true);
  const auto zero = backward(out.cache, p, c, Matrix::Zero(2, 2));
  zero.params.for_each([&](const std::string& name, const Matrix& m) {
    CAPTURE(name);
    CHECK(m.cwiseAbs().maxCoeff() == 0.0);
  });

  const auto g = backward(out.cache, p, c, Matrix::Ones(2, 2));
  CHECK(g.slot_fill[0] == 0.0);
  CHECK(g.slot_fill[1] != 0.0);
  CHECK(g.params.all_finite());

  const auto nocache = forward(batch, p, c, false);
  CHECK_THROWS_AS(backward(nocache.cache, p, c, Matrix::Ones(2, 2)), ContractError);
  CHECK_THROWS_AS(backward(out.cache, p, c, Matrix::Ones(3, 2)), ContractError);
}

TEST_CASE("forward is bit-for-bit deterministic") {
  auto c = tiny_config();
  c.dropout_rate = 0.3;
  std::mt19937_64 rng(4);
  const auto p = init(c);
  std::vector<AugmentedExample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_example(c, rng, AugmentMode::SO, true));
  Rng r1(10), r2(10);
  const auto a = forward(batch, p, c, true, &r1).logits;
  const auto b = forward(batch, p, c, true, &r2).logits;
  CHECK(a == b);
  CHECK(forward(batch, p, c, false).logits == forward(batch, p, c, false).logits);
}

TEST_CASE("checkpoint round trip") {
  const auto c = tiny_config();
  std::mt19937_64 rng(6);
  auto p = init(c);
  jitter(p, rng, 0.5);
  testsupport::TempDir dir;
  save_checkpoint(dir / "m.ckpt", p, c);
  const auto ck = load_checkpoint(dir / "m.ckpt");
  CHECK(to_json(ck.config) == to_json(c));
  std::vector<Matrix> ta, tb;
  p.for_each([&](const std::string&, const Matrix& m) { ta.push_back(m); });
  ck.params.for_each([&](const std::string&, const Matrix& m) { tb.push_back(m); });
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);

  const auto bytes = testsupport::read_file(dir / "m.ckpt");
  CHECK(bytes.substr(0, 8) == "SUBSENSE");
  testsupport::write_file(dir / "trunc.ckpt", bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), SchemaError);
  auto bad = bytes;
  bad[0] = 'X';
  testsupport::write_file(dir / "bad.ckpt", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), SchemaError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), ResourceError);
}
