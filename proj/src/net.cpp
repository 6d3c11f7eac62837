#include "resp/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "resp/error.hpp"

namespace resp::net {

namespace {

double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

VectorXd sigmoid(const VectorXd& v) {
  return v.unaryExpr([](double x) { return sigmoid_scalar(x); });
}

VectorXd concat2(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBiGruAt: return "BiGRU-AT";
    case Variant::kGruAt: return "GRU-AT";
    case Variant::kBiLstmAt: return "BiLSTM-AT";
    case Variant::kLstm: return "LSTM";
  }
  throw ValidationError("invalid variant");
}

std::string variant_id(Variant v) {
  switch (v) {
    case Variant::kBiGruAt: return "bigru-at";
    case Variant::kGruAt: return "gru-at";
    case Variant::kBiLstmAt: return "bilstm-at";
    case Variant::kLstm: return "lstm";
  }
  throw ValidationError("invalid variant");
}

Variant parse_variant(const std::string& id) {
  for (Variant v : {Variant::kBiGruAt, Variant::kGruAt, Variant::kBiLstmAt, Variant::kLstm})
    if (id == variant_id(v) || id == variant_name(v)) return v;
  throw UsageError("unknown model variant '" + id + "'");
}

bool is_bidirectional(Variant v) {
  return v == Variant::kBiGruAt || v == Variant::kBiLstmAt;
}

bool uses_gru(Variant v) { return v == Variant::kBiGruAt || v == Variant::kGruAt; }

bool has_attention(Variant v) { return v != Variant::kLstm; }

namespace {

GruCellParams make_gru_cell(int hidden, int input) {
  GruCellParams p;
  p.w_r = MatrixXd::Zero(hidden, hidden + input);
  p.w_z = MatrixXd::Zero(hidden, hidden + input);
  p.w_h = MatrixXd::Zero(hidden, hidden + input);
  p.b_r = VectorXd::Zero(hidden);
  p.b_z = VectorXd::Zero(hidden);
  p.b_h = VectorXd::Zero(hidden);
  return p;
}

LstmCellParams make_lstm_cell(int hidden, int input) {
  LstmCellParams p;
  p.w_f = MatrixXd::Zero(hidden, hidden + input);
  p.w_i = MatrixXd::Zero(hidden, hidden + input);
  p.w_g = MatrixXd::Zero(hidden, hidden + input);
  p.w_o = MatrixXd::Zero(hidden, hidden + input);
  p.b_f = VectorXd::Zero(hidden);
  p.b_i = VectorXd::Zero(hidden);
  p.b_g = VectorXd::Zero(hidden);
  p.b_o = VectorXd::Zero(hidden);
  return p;
}

ModelParams allocate_model(Variant variant, int hidden, int attn, int input) {
  check(hidden >= 1 && attn >= 1 && input >= 1, "model sizes must be positive");
  ModelParams m;
  m.variant = variant;
  m.hidden_size = hidden;
  m.attn_size = attn;
  m.input_size = input;
  if (uses_gru(variant)) {
    m.gru_fwd = make_gru_cell(hidden, input);
    if (is_bidirectional(variant)) m.gru_bwd = make_gru_cell(hidden, input);
  } else {
    m.lstm_fwd = make_lstm_cell(hidden, input);
    if (is_bidirectional(variant)) m.lstm_bwd = make_lstm_cell(hidden, input);
  }
  if (has_attention(variant)) {
    AttentionParams a;
    a.w_u = MatrixXd::Zero(attn, m.summary_size());
    a.b_w = VectorXd::Zero(attn);
    a.u_w = VectorXd::Zero(attn);
    m.attention = a;
  }
  m.dense_w = MatrixXd::Zero(2, m.summary_size());
  m.dense_b = VectorXd::Zero(2);
  return m;
}

}  // namespace

ModelParams zeros_like(const ModelParams& model) {
  return allocate_model(model.variant, model.hidden_size, model.attn_size,
                        model.input_size);
}

std::vector<ParamView> param_views(ModelParams& model) {
  std::vector<ParamView> views;
  auto add_m = [&](const std::string& name, MatrixXd& m) {
    views.push_back({name, m.data(), static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  };
  auto add_v = [&](const std::string& name, VectorXd& v) {
    views.push_back({name, v.data(), static_cast<int>(v.size()), 1});
  };
  auto add_gru = [&](const std::string& prefix, GruCellParams& c) {
    add_m(prefix + ".w_r", c.w_r);
    add_m(prefix + ".w_z", c.w_z);
    add_m(prefix + ".w_h", c.w_h);
    add_v(prefix + ".b_r", c.b_r);
    add_v(prefix + ".b_z", c.b_z);
    add_v(prefix + ".b_h", c.b_h);
  };
  auto add_lstm = [&](const std::string& prefix, LstmCellParams& c) {
    add_m(prefix + ".w_f", c.w_f);
    add_m(prefix + ".w_i", c.w_i);
    add_m(prefix + ".w_g", c.w_g);
    add_m(prefix + ".w_o", c.w_o);
    add_v(prefix + ".b_f", c.b_f);
    add_v(prefix + ".b_i", c.b_i);
    add_v(prefix + ".b_g", c.b_g);
    add_v(prefix + ".b_o", c.b_o);
  };
  if (model.gru_fwd) add_gru("gru_fwd", *model.gru_fwd);
  if (model.gru_bwd) add_gru("gru_bwd", *model.gru_bwd);
  if (model.lstm_fwd) add_lstm("lstm_fwd", *model.lstm_fwd);
  if (model.lstm_bwd) add_lstm("lstm_bwd", *model.lstm_bwd);
  if (model.attention) {
    add_m("attention.w_u", model.attention->w_u);
    add_v("attention.b_w", model.attention->b_w);
    add_v("attention.u_w", model.attention->u_w);
  }
  add_m("dense.w", model.dense_w);
  add_v("dense.b", model.dense_b);
  return views;
}

ModelParams init_model(Variant variant, int hidden_size, int attn_size, int input_size,
                       std::uint64_t seed) {
  ModelParams model = allocate_model(variant, hidden_size, attn_size, input_size);
  std::mt19937_64 rng(seed);
  for (ParamView& view : param_views(model)) {
    const bool is_bias = view.name.find(".b") != std::string::npos;
    if (is_bias) continue;  // biases start at zero
    // u_w is a vector scored against attn-sized activations
    const double fan_in = view.name == "attention.u_w" ? view.rows : view.cols;
    const double fan_out = view.name == "attention.u_w" ? 1.0 : view.rows;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (long k = 0; k < view.size(); ++k) view.data[k] = dist(rng);
  }
  return model;
}

VectorXd gru_cell(const GruCellParams& params, const VectorXd& h_prev, const VectorXd& x) {
  const long hidden = params.w_r.rows();
  check(params.w_z.rows() == hidden && params.w_h.rows() == hidden,
        "gru cell: inconsistent gate rows");
  check(params.w_r.cols() == hidden + x.size() && params.w_z.cols() == params.w_r.cols() &&
            params.w_h.cols() == params.w_r.cols(),
        "gru cell: weight columns must equal hidden + input size");
  check(h_prev.size() == hidden, "gru cell: h_prev has wrong size");
  check(params.b_r.size() == hidden && params.b_z.size() == hidden &&
            params.b_h.size() == hidden,
        "gru cell: bias has wrong size");

  VectorXd cat = concat2(h_prev, x);
  VectorXd r = sigmoid(params.w_r * cat + params.b_r);
  VectorXd z = sigmoid(params.w_z * cat + params.b_z);
  VectorXd cat_h = concat2(r.cwiseProduct(h_prev), x);
  VectorXd hbar = (params.w_h * cat_h + params.b_h).array().tanh();
  return (VectorXd::Ones(hidden) - z).cwiseProduct(h_prev) + z.cwiseProduct(hbar);
}

void lstm_cell(const LstmCellParams& params, const VectorXd& h_prev, const VectorXd& c_prev,
               const VectorXd& x, VectorXd& h_out, VectorXd& c_out) {
  const long hidden = params.w_f.rows();
  check(params.w_f.cols() == hidden + x.size(), "lstm cell: weight columns must equal hidden + input size");
  check(h_prev.size() == hidden && c_prev.size() == hidden, "lstm cell: state has wrong size");

  VectorXd cat = concat2(h_prev, x);
  VectorXd f = sigmoid(params.w_f * cat + params.b_f);
  VectorXd i = sigmoid(params.w_i * cat + params.b_i);
  VectorXd g = (params.w_g * cat + params.b_g).array().tanh();
  VectorXd o = sigmoid(params.w_o * cat + params.b_o);
  c_out = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  h_out = o.cwiseProduct(c_out.array().tanh().matrix());
}

namespace {

// Runs one direction over `inputs` in the given order, filling the cache.
void run_gru_chain(const GruCellParams& p, const std::vector<VectorXd>& inputs,
                   DirectionCache& cache) {
  const long hidden = p.w_r.rows();
  const std::size_t steps = inputs.size();
  cache.h.reserve(steps);
  cache.r.reserve(steps);
  cache.z.reserve(steps);
  cache.hbar.reserve(steps);

  VectorXd h = VectorXd::Zero(hidden);
  for (const VectorXd& x : inputs) {
    VectorXd cat = concat2(h, x);
    VectorXd r = sigmoid(p.w_r * cat + p.b_r);
    VectorXd z = sigmoid(p.w_z * cat + p.b_z);
    VectorXd cat_h = concat2(r.cwiseProduct(h), x);
    VectorXd hbar = (p.w_h * cat_h + p.b_h).array().tanh();
    h = (VectorXd::Ones(hidden) - z).cwiseProduct(h) + z.cwiseProduct(hbar);
    cache.r.push_back(std::move(r));
    cache.z.push_back(std::move(z));
    cache.hbar.push_back(std::move(hbar));
    cache.h.push_back(h);
  }
}

void run_lstm_chain(const LstmCellParams& p, const std::vector<VectorXd>& inputs,
                    DirectionCache& cache) {
  const long hidden = p.w_f.rows();
  const std::size_t steps = inputs.size();
  cache.h.reserve(steps);
  cache.f.reserve(steps);
  cache.i.reserve(steps);
  cache.g.reserve(steps);
  cache.o.reserve(steps);
  cache.c.reserve(steps);
  cache.tanh_c.reserve(steps);

  VectorXd h = VectorXd::Zero(hidden);
  VectorXd c = VectorXd::Zero(hidden);
  for (const VectorXd& x : inputs) {
    VectorXd cat = concat2(h, x);
    VectorXd f = sigmoid(p.w_f * cat + p.b_f);
    VectorXd i = sigmoid(p.w_i * cat + p.b_i);
    VectorXd g = (p.w_g * cat + p.b_g).array().tanh();
    VectorXd o = sigmoid(p.w_o * cat + p.b_o);
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    VectorXd tanh_c = c.array().tanh();
    h = o.cwiseProduct(tanh_c);
    cache.f.push_back(std::move(f));
    cache.i.push_back(std::move(i));
    cache.g.push_back(std::move(g));
    cache.o.push_back(std::move(o));
    cache.c.push_back(c);
    cache.tanh_c.push_back(std::move(tanh_c));
    cache.h.push_back(h);
  }
}

std::vector<VectorXd> reversed(const std::vector<VectorXd>& xs) {
  return {xs.rbegin(), xs.rend()};
}

}  // namespace

std::vector<VectorXd> bidirectional_scan(const GruCellParams& fwd, const GruCellParams& bwd,
                                         const std::vector<VectorXd>& sequence) {
  check(!sequence.empty(), "bidirectional scan over an empty sequence");
  DirectionCache f, b;
  run_gru_chain(fwd, sequence, f);
  run_gru_chain(bwd, reversed(sequence), b);
  const std::size_t steps = sequence.size();
  std::vector<VectorXd> out(steps);
  for (std::size_t t = 0; t < steps; ++t)
    out[t] = concat2(f.h[t], b.h[steps - 1 - t]);
  return out;
}

std::vector<VectorXd> bidirectional_scan(const LstmCellParams& fwd, const LstmCellParams& bwd,
                                         const std::vector<VectorXd>& sequence) {
  check(!sequence.empty(), "bidirectional scan over an empty sequence");
  DirectionCache f, b;
  run_lstm_chain(fwd, sequence, f);
  run_lstm_chain(bwd, reversed(sequence), b);
  const std::size_t steps = sequence.size();
  std::vector<VectorXd> out(steps);
  for (std::size_t t = 0; t < steps; ++t)
    out[t] = concat2(f.h[t], b.h[steps - 1 - t]);
  return out;
}

VectorXd softmax(const VectorXd& scores) {
  const double hi = scores.maxCoeff();
  VectorXd e = (scores.array() - hi).exp();
  return e / e.sum();
}

AttentionResult attention(const AttentionParams& params, const std::vector<VectorXd>& hidden) {
  check(!hidden.empty(), "attention over an empty sequence");
  check(params.w_u.cols() == hidden[0].size(), "attention: w_u columns must match hidden size");
  check(params.b_w.size() == params.w_u.rows() && params.u_w.size() == params.w_u.rows(),
        "attention: vector sizes must match w_u rows");

  const std::size_t steps = hidden.size();
  VectorXd scores(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    VectorXd u = (params.w_u * hidden[t] + params.b_w).array().tanh();
    scores[static_cast<long>(t)] = u.dot(params.u_w);
  }
  AttentionResult result;
  result.weights = softmax(scores);
  result.summary = VectorXd::Zero(hidden[0].size());
  for (std::size_t t = 0; t < steps; ++t)
    result.summary += result.weights[static_cast<long>(t)] * hidden[t];
  return result;
}

ForwardTrace forward(const ModelParams& model, const std::vector<double>& values,
                     const ForwardOptions& options) {
  check(!values.empty(), "forward over an empty trace");
  check(model.input_size == 1, "trace input expects input_size 1");

  if (options.check_normalization && values.size() >= 2) {
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(values.size()));
    if (std::abs(mean) > 0.1 || std::abs(sd - 1.0) > 0.1)
      throw ValidationError("trace is not z-normalized (mean " + std::to_string(mean) +
                            ", std " + std::to_string(sd) + "); normalize before classifying");
  }

  const std::size_t steps = values.size();
  std::vector<VectorXd> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t] = VectorXd::Constant(1, values[t]);

  ForwardTrace trace;
  if (uses_gru(model.variant)) {
    run_gru_chain(*model.gru_fwd, inputs, trace.fwd_cache);
    if (is_bidirectional(model.variant))
      run_gru_chain(*model.gru_bwd, reversed(inputs), trace.bwd_cache);
  } else {
    run_lstm_chain(*model.lstm_fwd, inputs, trace.fwd_cache);
    if (is_bidirectional(model.variant))
      run_lstm_chain(*model.lstm_bwd, reversed(inputs), trace.bwd_cache);
  }

  trace.hidden.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    if (is_bidirectional(model.variant))
      trace.hidden[t] = concat2(trace.fwd_cache.h[t], trace.bwd_cache.h[steps - 1 - t]);
    else
      trace.hidden[t] = trace.fwd_cache.h[t];
  }

  if (has_attention(model.variant)) {
    const AttentionParams& attn = *model.attention;
    trace.attn_u.resize(steps);
    VectorXd scores(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      trace.attn_u[t] = (attn.w_u * trace.hidden[t] + attn.b_w).array().tanh();
      scores[static_cast<long>(t)] = trace.attn_u[t].dot(attn.u_w);
    }
    trace.attn_weights = softmax(scores);
    trace.summary = VectorXd::Zero(model.summary_size());
    for (std::size_t t = 0; t < steps; ++t)
      trace.summary += trace.attn_weights[static_cast<long>(t)] * trace.hidden[t];
  } else {
    trace.summary = trace.hidden.back();
  }

  trace.logits = model.dense_w * trace.summary + model.dense_b;
  trace.probs = softmax(trace.logits);
  return trace;
}

double loss(const VectorXd& probs, Label label) {
  const long index = label == Label::kNormal ? 0 : 1;
  check(probs.size() == 2, "loss expects a 2-class probability vector");
  return -std::log(std::max(probs[index], 1e-12));
}

namespace {

// Backpropagation through one direction; dH is per scan step, inputs in
// scan order. Accumulates into the cell gradient.
void gru_chain_backward(const GruCellParams& p, GruCellParams& grad,
                        const std::vector<VectorXd>& inputs, const DirectionCache& cache,
                        const std::vector<VectorXd>& dH) {
  const long hidden = p.w_r.rows();
  const std::size_t steps = inputs.size();
  VectorXd dh_carry = VectorXd::Zero(hidden);

  for (std::size_t idx = steps; idx-- > 0;) {
    const VectorXd& r = cache.r[idx];
    const VectorXd& z = cache.z[idx];
    const VectorXd& hbar = cache.hbar[idx];
    const VectorXd h_prev = idx > 0 ? cache.h[idx - 1] : VectorXd::Zero(hidden);

    VectorXd dh = dH[idx] + dh_carry;
    VectorXd dhbar = dh.cwiseProduct(z);
    VectorXd dz = dh.cwiseProduct(hbar - h_prev);
    VectorXd dh_prev = dh.cwiseProduct(VectorXd::Ones(hidden) - z);

    VectorXd da_h = dhbar.cwiseProduct(VectorXd::Ones(hidden) - hbar.cwiseProduct(hbar));
    VectorXd cat_h = concat2(r.cwiseProduct(h_prev), inputs[idx]);
    grad.w_h.noalias() += da_h * cat_h.transpose();
    grad.b_h += da_h;
    VectorXd dcat_h = p.w_h.transpose() * da_h;
    VectorXd drh = dcat_h.head(hidden);
    VectorXd dr = drh.cwiseProduct(h_prev);
    dh_prev += drh.cwiseProduct(r);

    VectorXd cat = concat2(h_prev, inputs[idx]);
    VectorXd da_r = dr.cwiseProduct(r).cwiseProduct(VectorXd::Ones(hidden) - r);
    grad.w_r.noalias() += da_r * cat.transpose();
    grad.b_r += da_r;
    dh_prev += (p.w_r.transpose() * da_r).head(hidden);

    VectorXd da_z = dz.cwiseProduct(z).cwiseProduct(VectorXd::Ones(hidden) - z);
    grad.w_z.noalias() += da_z * cat.transpose();
    grad.b_z += da_z;
    dh_prev += (p.w_z.transpose() * da_z).head(hidden);

    dh_carry = std::move(dh_prev);
  }
}

void lstm_chain_backward(const LstmCellParams& p, LstmCellParams& grad,
                         const std::vector<VectorXd>& inputs, const DirectionCache& cache,
                         const std::vector<VectorXd>& dH) {
  const long hidden = p.w_f.rows();
  const std::size_t steps = inputs.size();
  VectorXd dh_carry = VectorXd::Zero(hidden);
  VectorXd dc_carry = VectorXd::Zero(hidden);

  for (std::size_t idx = steps; idx-- > 0;) {
    const VectorXd& f = cache.f[idx];
    const VectorXd& i = cache.i[idx];
    const VectorXd& g = cache.g[idx];
    const VectorXd& o = cache.o[idx];
    const VectorXd& tanh_c = cache.tanh_c[idx];
    const VectorXd c_prev = idx > 0 ? cache.c[idx - 1] : VectorXd::Zero(hidden);

    VectorXd dh = dH[idx] + dh_carry;
    VectorXd dc = dc_carry +
                  dh.cwiseProduct(o).cwiseProduct(VectorXd::Ones(hidden) -
                                                  tanh_c.cwiseProduct(tanh_c));
    VectorXd do_ = dh.cwiseProduct(tanh_c);
    VectorXd df = dc.cwiseProduct(c_prev);
    VectorXd di = dc.cwiseProduct(g);
    VectorXd dg = dc.cwiseProduct(i);
    dc_carry = dc.cwiseProduct(f);

    VectorXd cat = concat2(idx > 0 ? cache.h[idx - 1] : VectorXd::Zero(hidden), inputs[idx]);
    VectorXd da_f = df.cwiseProduct(f).cwiseProduct(VectorXd::Ones(hidden) - f);
    VectorXd da_i = di.cwiseProduct(i).cwiseProduct(VectorXd::Ones(hidden) - i);
    VectorXd da_g = dg.cwiseProduct(VectorXd::Ones(hidden) - g.cwiseProduct(g));
    VectorXd da_o = do_.cwiseProduct(o).cwiseProduct(VectorXd::Ones(hidden) - o);

    grad.w_f.noalias() += da_f * cat.transpose();
    grad.w_i.noalias() += da_i * cat.transpose();
    grad.w_g.noalias() += da_g * cat.transpose();
    grad.w_o.noalias() += da_o * cat.transpose();
    grad.b_f += da_f;
    grad.b_i += da_i;
    grad.b_g += da_g;
    grad.b_o += da_o;

    VectorXd dh_prev = (p.w_f.transpose() * da_f).head(hidden) +
                       (p.w_i.transpose() * da_i).head(hidden) +
                       (p.w_g.transpose() * da_g).head(hidden) +
                       (p.w_o.transpose() * da_o).head(hidden);
    dh_carry = std::move(dh_prev);
  }
}

}  // namespace

ModelParams backward(const ModelParams& model, const std::vector<double>& values,
                     Label label, const ForwardTrace& trace) {
  const std::size_t steps = values.size();
  const long hidden = model.hidden_size;
  ModelParams grads = zeros_like(model);

  // dense + softmax cross entropy
  VectorXd dlogits = trace.probs;
  dlogits[label == Label::kNormal ? 0 : 1] -= 1.0;
  grads.dense_w.noalias() = dlogits * trace.summary.transpose();
  grads.dense_b = dlogits;
  VectorXd dsummary = model.dense_w.transpose() * dlogits;

  std::vector<VectorXd> dhidden(steps, VectorXd::Zero(model.summary_size()));
  if (has_attention(model.variant)) {
    const AttentionParams& attn = *model.attention;
    AttentionParams& attn_grad = *grads.attention;
    VectorXd dalpha(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      dhidden[t] += trace.attn_weights[static_cast<long>(t)] * dsummary;
      dalpha[static_cast<long>(t)] = trace.hidden[t].dot(dsummary);
    }
    const double mixed = trace.attn_weights.dot(dalpha);
    for (std::size_t t = 0; t < steps; ++t) {
      const double de = trace.attn_weights[static_cast<long>(t)] *
                        (dalpha[static_cast<long>(t)] - mixed);
      const VectorXd& u = trace.attn_u[t];
      attn_grad.u_w += de * u;
      VectorXd da = (de * attn.u_w).cwiseProduct(
          VectorXd::Ones(u.size()) - u.cwiseProduct(u));
      attn_grad.w_u.noalias() += da * trace.hidden[t].transpose();
      attn_grad.b_w += da;
      dhidden[t] += attn.w_u.transpose() * da;
    }
  } else {
    dhidden[steps - 1] = dsummary;
  }

  std::vector<VectorXd> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t] = VectorXd::Constant(1, values[t]);

  std::vector<VectorXd> dH_fwd(steps);
  for (std::size_t t = 0; t < steps; ++t) dH_fwd[t] = dhidden[t].head(hidden);

  if (is_bidirectional(model.variant)) {
    // the backward chain ran over reversed input: scan step k covers t = T-1-k
    std::vector<VectorXd> dH_bwd(steps);
    for (std::size_t k = 0; k < steps; ++k)
      dH_bwd[k] = dhidden[steps - 1 - k].tail(hidden);
    std::vector<VectorXd> rev_inputs = reversed(inputs);
    if (uses_gru(model.variant)) {
      gru_chain_backward(*model.gru_fwd, *grads.gru_fwd, inputs, trace.fwd_cache, dH_fwd);
      gru_chain_backward(*model.gru_bwd, *grads.gru_bwd, rev_inputs, trace.bwd_cache, dH_bwd);
    } else {
      lstm_chain_backward(*model.lstm_fwd, *grads.lstm_fwd, inputs, trace.fwd_cache, dH_fwd);
      lstm_chain_backward(*model.lstm_bwd, *grads.lstm_bwd, rev_inputs, trace.bwd_cache, dH_bwd);
    }
  } else {
    if (uses_gru(model.variant))
      gru_chain_backward(*model.gru_fwd, *grads.gru_fwd, inputs, trace.fwd_cache, dH_fwd);
    else
      lstm_chain_backward(*model.lstm_fwd, *grads.lstm_fwd, inputs, trace.fwd_cache, dH_fwd);
  }
  return grads;
}

ModelParams backward(const ModelParams& model, const std::vector<double>& values,
                     Label label) {
  ForwardOptions opts;
  opts.check_normalization = false;
  return backward(model, values, label, forward(model, values, opts));
}

int predict(const ModelParams& model, const std::vector<double>& values) {
  ForwardTrace trace = forward(model, values);
  return trace.probs[1] > trace.probs[0] ? 1 : 0;
}

TrainResult train(const ModelParams& initial, const std::vector<LabeledTrace>& dataset,
                  const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  check(!dataset.empty(), "training set is empty");
  check(config.epochs >= 0 && config.batch_size >= 1, "bad training config");
  check(std::isfinite(config.lr) && config.lr >= 0.0, "learning rate must be >= 0");

  TrainResult result;
  result.model = initial;
  ModelParams adam_m = zeros_like(initial);
  ModelParams adam_v = zeros_like(initial);
  auto params = param_views(result.model);
  auto m_views = param_views(adam_m);
  auto v_views = param_views(adam_v);

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long epoch_correct = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double batch_n = static_cast<double>(end - start);

      ModelParams grads = zeros_like(initial);
      auto grad_views = param_views(grads);
      double batch_loss = 0.0;
      ForwardOptions opts;  // training data is pre-normalized

      for (std::size_t k = start; k < end; ++k) {
        const LabeledTrace& example = dataset[order[k]];
        ForwardTrace ft = forward(result.model, example.values, opts);
        batch_loss += loss(ft.probs, example.label);
        const int truth = example.label == Label::kNormal ? 0 : 1;
        if ((ft.probs[1] > ft.probs[0] ? 1 : 0) == truth) ++epoch_correct;
        ModelParams g = backward(result.model, example.values, example.label, ft);
        auto gv = param_views(g);
        for (std::size_t b = 0; b < grad_views.size(); ++b)
          for (long idx = 0; idx < grad_views[b].size(); ++idx)
            grad_views[b].data[idx] += gv[b].data[idx];
      }

      batch_loss /= batch_n;
      epoch_loss += batch_loss * batch_n;
      if (!std::isfinite(batch_loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(start / config.batch_size + 1));

      ++step;
      const double corr1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (long idx = 0; idx < params[b].size(); ++idx) {
          const double g = grad_views[b].data[idx] / batch_n;
          double& m = m_views[b].data[idx];
          double& v = v_views[b].data[idx];
          m = kBeta1 * m + (1.0 - kBeta1) * g;
          v = kBeta2 * v + (1.0 - kBeta2) * g * g;
          const double m_hat = m / corr1;
          const double v_hat = v / corr2;
          params[b].data[idx] -= config.lr * m_hat / (std::sqrt(v_hat) + kEps);
        }
      }
    }

    EpochStats stats{epoch, epoch_loss / static_cast<double>(dataset.size()),
                     static_cast<double>(epoch_correct) / static_cast<double>(dataset.size())};
    result.log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'P', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw ParseError(path + ": truncated model file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw ParseError(path + ": truncated model file");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(model.variant));
  write_u32(out, static_cast<std::uint32_t>(model.hidden_size));
  write_u32(out, static_cast<std::uint32_t>(model.attn_size));
  write_u32(out, static_cast<std::uint32_t>(model.input_size));

  auto views = param_views(const_cast<ModelParams&>(model));
  write_u32(out, static_cast<std::uint32_t>(views.size()));
  for (const ParamView& view : views) {
    write_u32(out, static_cast<std::uint32_t>(view.name.size()));
    out.write(view.name.data(), static_cast<std::streamsize>(view.name.size()));
    write_u32(out, static_cast<std::uint32_t>(view.rows));
    write_u32(out, static_cast<std::uint32_t>(view.cols));
    for (long k = 0; k < view.size(); ++k) write_f64(out, view.data[k]);
  }
  if (!out) throw IoError("short write to " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError(name + ": not a model checkpoint");
  const std::uint32_t version = read_u32(in, name);
  if (version != kFormatVersion)
    throw ParseError(name + ": unsupported format version " + std::to_string(version));

  const std::uint32_t variant_raw = read_u32(in, name);
  if (variant_raw > 3) throw ParseError(name + ": bad variant id");
  const auto variant = static_cast<Variant>(variant_raw);
  const int hidden = static_cast<int>(read_u32(in, name));
  const int attn = static_cast<int>(read_u32(in, name));
  const int input = static_cast<int>(read_u32(in, name));
  if (hidden < 1 || attn < 1 || input < 1) throw ParseError(name + ": bad architecture sizes");

  ModelParams model = allocate_model(variant, hidden, attn, input);
  auto views = param_views(model);
  const std::uint32_t count = read_u32(in, name);
  if (count != views.size())
    throw ParseError(name + ": expected " + std::to_string(views.size()) +
                     " parameter blocks, found " + std::to_string(count));

  for (ParamView& view : views) {
    const std::uint32_t name_len = read_u32(in, name);
    std::string block_name(name_len, '\0');
    in.read(block_name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len))
      throw ParseError(name + ": truncated model file");
    if (block_name != view.name)
      throw ParseError(name + ": parameter block mismatch, expected '" + view.name +
                       "', found '" + block_name + "'");
    const std::uint32_t rows = read_u32(in, name);
    const std::uint32_t cols = read_u32(in, name);
    if (rows != static_cast<std::uint32_t>(view.rows) ||
        cols != static_cast<std::uint32_t>(view.cols))
      throw ParseError(name + ": shape mismatch for '" + view.name + "'");
    for (long k = 0; k < view.size(); ++k) {
      view.data[k] = read_f64(in, name);
      if (!std::isfinite(view.data[k]))
        throw ParseError(name + ": non-finite value in '" + view.name + "'");
    }
  }
  return model;
}

void write_train_log(const std::vector<EpochStats>& log, const std::string& split,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,split,loss,accuracy\n";
  char buf[128];
  for (const EpochStats& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n", row.epoch, split.c_str(),
                  row.loss, row.accuracy);
    out << buf;
  }
}

}  // namespace resp::net
