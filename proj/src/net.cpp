#include "mlvat/net.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'L', 'V', 'P'};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

// out(r x n) = a(r x k) * b(k x n)
Mat64 matmul(const Mat64& a, const Mat64& b) {
  Mat64 out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

// out(k x n) = a(r x k)^T * b(r x n)
Mat64 matmul_at_b(const Mat64& a, const Mat64& b) {
  Mat64 out(a.cols, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto b_row = b.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto out_row = out.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

// out(r x k) = a(r x n) * b(k x n)^T
Mat64 matmul_a_bt(const Mat64& a, const Mat64& b) {
  Mat64 out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto a_row = a.row(i);
    for (std::size_t k = 0; k < b.rows; ++k) {
      const auto b_row = b.row(k);
      double sum = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) sum += a_row[j] * b_row[j];
      out(i, k) = sum;
    }
  }
  return out;
}

void add_bias(Mat64& m, const Vec64& bias) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
  }
}

Vec64 column_sums(const Mat64& m) {
  Vec64 out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j];
  }
  return out;
}

void adamw_update(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                  const std::vector<double>& grad, const AdamWConfig& hp, double bias1, double bias2) {
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] = param[i] * decay - hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t d_in, std::size_t d_hidden, std::size_t d_out) {
  return {Mat64(d_in, d_hidden), Vec64(d_hidden, 0.0), Mat64(d_hidden, d_out), Vec64(d_out, 0.0)};
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params, std::size_t batch) {
  return {Mat64(params.d_in(), params.d_hidden()), Vec64(params.d_hidden(), 0.0),
          Mat64(params.d_hidden(), params.d_out()), Vec64(params.d_out(), 0.0),
          Mat64(batch, params.d_in())};
}

MlpParams init_params(Rng& rng, std::size_t d_in, std::size_t d_hidden, std::size_t d_out) {
  if (d_in == 0 || d_hidden == 0 || d_out == 0) {
    throw Error(Errc::InvalidSpec, "init_params: all dimensions must be >= 1");
  }
  MlpParams p = MlpParams::zeros(d_in, d_hidden, d_out);
  const double limit1 = std::sqrt(6.0 / static_cast<double>(d_in + d_hidden));
  const double limit2 = std::sqrt(6.0 / static_cast<double>(d_hidden + d_out));
  for (double& w : p.w1.values) w = rng.uniform(-limit1, limit1);
  for (double& w : p.w2.values) w = rng.uniform(-limit2, limit2);
  return p;
}

ForwardTrace forward(const MlpParams& params, const Mat64& x, Mode mode, double dropout, Rng& rng) {
  require(x.cols == params.d_in(), "forward: input has " + std::to_string(x.cols) +
                                       " columns, head expects " + std::to_string(params.d_in()));
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(Errc::InvalidConfig, "forward: dropout must lie in [0, 1)");
  }
  ForwardTrace t;
  t.input = x;
  t.hidden_pre = matmul(x, params.w1);
  add_bias(t.hidden_pre, params.b1);
  t.hidden_act = t.hidden_pre;
  for (double& h : t.hidden_act.values) h = std::tanh(h);

  t.dropout_mask = Mat64(x.rows, params.d_hidden(), 1.0);
  if (mode == Mode::Train && dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - dropout);
    for (double& m : t.dropout_mask.values) m = rng.uniform() < dropout ? 0.0 : keep_scale;
  }
  t.hidden_out = t.hidden_act;
  for (std::size_t i = 0; i < t.hidden_out.size(); ++i) t.hidden_out.values[i] *= t.dropout_mask.values[i];

  t.logits = matmul(t.hidden_out, params.w2);
  add_bias(t.logits, params.b2);
  return t;
}

Mat64 predict_logits(const MlpParams& params, const Mat64& x) {
  Rng unused(0);
  return forward(params, x, Mode::Eval, 0.0, unused).logits;
}

MlpGrads backward(const MlpParams& params, const ForwardTrace& trace, const Mat64& dloss_dlogits) {
  require(dloss_dlogits.rows == trace.logits.rows && dloss_dlogits.cols == trace.logits.cols,
          "backward: upstream gradient shape does not match logits");
  require(trace.input.cols == params.d_in() && trace.logits.cols == params.d_out(),
          "backward: trace was not produced by these parameters");

  MlpGrads g;
  g.w2 = matmul_at_b(trace.hidden_out, dloss_dlogits);
  g.b2 = column_sums(dloss_dlogits);

  Mat64 dpre = matmul_a_bt(dloss_dlogits, params.w2);
  for (std::size_t i = 0; i < dpre.size(); ++i) {
    const double a = trace.hidden_act.values[i];
    dpre.values[i] *= trace.dropout_mask.values[i] * (1.0 - a * a);
  }
  g.w1 = matmul_at_b(trace.input, dpre);
  g.b1 = column_sums(dpre);
  g.grad_input = matmul_a_bt(dpre, params.w1);
  return g;
}

void accumulate(MlpGrads& acc, const MlpGrads& g, double scale) {
  auto axpy = [scale](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  };
  axpy(acc.w1.values, g.w1.values);
  axpy(acc.b1, g.b1);
  axpy(acc.w2.values, g.w2.values);
  axpy(acc.b2, g.b2);
}

OptimizerState OptimizerState::init(const MlpParams& params, const AdamWConfig& hp) {
  OptimizerState s;
  s.hp = hp;
  s.m = MlpParams::zeros(params.d_in(), params.d_hidden(), params.d_out());
  s.v = s.m;
  return s;
}

void adamw_step(OptimizerState& state, MlpParams& params, const MlpGrads& grads) {
  require(grads.w1.rows == params.w1.rows && grads.w1.cols == params.w1.cols &&
              grads.w2.rows == params.w2.rows && grads.w2.cols == params.w2.cols &&
              grads.b1.size() == params.b1.size() && grads.b2.size() == params.b2.size(),
          "adamw_step: gradient shapes do not match parameters");
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.hp.beta1, t);
  const double bias2 = 1.0 - std::pow(state.hp.beta2, t);
  adamw_update(params.w1.values, state.m.w1.values, state.v.w1.values, grads.w1.values, state.hp, bias1, bias2);
  adamw_update(params.b1, state.m.b1, state.v.b1, grads.b1, state.hp, bias1, bias2);
  adamw_update(params.w2.values, state.m.w2.values, state.v.w2.values, grads.w2.values, state.hp, bias1, bias2);
  adamw_update(params.b2, state.m.b2, state.v.b2, grads.b2, state.hp, bias1, bias2);
}

bool all_finite(const MlpParams& params) {
  return all_finite(params.w1.values) && all_finite(params.b1) && all_finite(params.w2.values) &&
         all_finite(params.b2);
}

void save_params(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::write_uint<std::uint32_t>(os, kCheckpointVersion);
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(params.d_in()));
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(params.d_hidden()));
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(params.d_out()));
  for (double x : params.w1.values) binio::write_f64(os, x);
  for (double x : params.b1) binio::write_f64(os, x);
  for (double x : params.w2.values) binio::write_f64(os, x);
  for (double x : params.b2) binio::write_f64(os, x);
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "cannot open checkpoint " + path.string());
  binio::Reader in(is, path.string());
  char magic[4];
  in.read_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(Errc::BadMagic, path.string() + ": not an MLVP checkpoint");
  }
  const auto version = in.read_uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(Errc::VersionUnsupported, path.string() + ": checkpoint version " + std::to_string(version));
  }
  const auto d_in = in.read_uint<std::uint32_t>();
  const auto d_hidden = in.read_uint<std::uint32_t>();
  const auto d_out = in.read_uint<std::uint32_t>();
  MlpParams p = MlpParams::zeros(d_in, d_hidden, d_out);
  for (double& x : p.w1.values) x = in.read_f64();
  for (double& x : p.b1) x = in.read_f64();
  for (double& x : p.w2.values) x = in.read_f64();
  for (double& x : p.b2) x = in.read_f64();
  return p;
}

}  // namespace mlvat
