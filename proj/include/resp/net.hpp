#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resp/types.hpp"

namespace resp::net {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Variant { kBiGruAt, kGruAt, kBiLstmAt, kLstm };

std::string variant_name(Variant v);     // "BiGRU-AT", ...
std::string variant_id(Variant v);       // "bigru-at", ... (CLI spelling)
Variant parse_variant(const std::string& id);
bool is_bidirectional(Variant v);
bool uses_gru(Variant v);
bool has_attention(Variant v);

// Gate weights act on the concatenation [h_prev; x].
struct GruCellParams {
  MatrixXd w_r, w_z, w_h;  // hidden x (hidden + input)
  VectorXd b_r, b_z, b_h;  // hidden

  int hidden_size() const { return static_cast<int>(w_r.rows()); }
  int input_size() const { return static_cast<int>(w_r.cols() - w_r.rows()); }
};

struct LstmCellParams {
  MatrixXd w_f, w_i, w_g, w_o;
  VectorXd b_f, b_i, b_g, b_o;

  int hidden_size() const { return static_cast<int>(w_f.rows()); }
  int input_size() const { return static_cast<int>(w_f.cols() - w_f.rows()); }
};

struct AttentionParams {
  MatrixXd w_u;  // attn x summary_in
  VectorXd b_w;  // attn
  VectorXd u_w;  // attn, trainable context vector
};

struct ModelParams {
  Variant variant = Variant::kBiGruAt;
  int hidden_size = 32;
  int attn_size = 8;
  int input_size = 1;
  std::optional<GruCellParams> gru_fwd, gru_bwd;
  std::optional<LstmCellParams> lstm_fwd, lstm_bwd;
  std::optional<AttentionParams> attention;
  MatrixXd dense_w;  // 2 x summary_size
  VectorXd dense_b;  // 2

  int summary_size() const {
    return is_bidirectional(variant) ? 2 * hidden_size : hidden_size;
  }
};

// Glorot-uniform weights, zero biases, deterministic in the seed.
ModelParams init_model(Variant variant, int hidden_size, int attn_size,
                       int input_size, std::uint64_t seed);

// Same layout with every entry zeroed; used for gradients and Adam state.
ModelParams zeros_like(const ModelParams& model);

// Flat view over one trainable block. Matrices are exposed in Eigen's
// column-major storage order.
struct ParamView {
  std::string name;
  double* data;
  int rows;
  int cols;

  long size() const { return static_cast<long>(rows) * cols; }
};

// Enumerates blocks in a fixed repo-wide order (cells, attention, dense).
std::vector<ParamView> param_views(ModelParams& model);

// Single recurrent steps.
VectorXd gru_cell(const GruCellParams& params, const VectorXd& h_prev,
                  const VectorXd& x);
void lstm_cell(const LstmCellParams& params, const VectorXd& h_prev,
               const VectorXd& c_prev, const VectorXd& x, VectorXd& h_out,
               VectorXd& c_out);

// Forward scan over t followed by an independent scan over the reversed
// input; output t concatenates the forward state at t with the backward
// state at t.
std::vector<VectorXd> bidirectional_scan(const GruCellParams& fwd,
                                         const GruCellParams& bwd,
                                         const std::vector<VectorXd>& sequence);
std::vector<VectorXd> bidirectional_scan(const LstmCellParams& fwd,
                                         const LstmCellParams& bwd,
                                         const std::vector<VectorXd>& sequence);

struct AttentionResult {
  VectorXd summary;
  VectorXd weights;  // one per step, positive, sums to 1
};

// u_t = tanh(W_u h_t + b_w); weights = softmax_t(u_t . u_w); s = sum a_t h_t.
AttentionResult attention(const AttentionParams& params,
                          const std::vector<VectorXd>& hidden);

// Numerically stable softmax (max subtraction).
VectorXd softmax(const VectorXd& scores);

// Everything backward() needs from one direction of the recurrent pass.
struct DirectionCache {
  std::vector<VectorXd> h;
  std::vector<VectorXd> r, z, hbar;           // GRU gates
  std::vector<VectorXd> f, i, g, o, c, tanh_c;  // LSTM gates
};

struct ForwardTrace {
  std::vector<VectorXd> hidden;  // per-step summary-layer inputs
  VectorXd attn_weights;         // empty for the plain LSTM variant
  std::vector<VectorXd> attn_u;
  VectorXd summary;
  VectorXd logits;
  VectorXd probs;
  DirectionCache fwd_cache, bwd_cache;
};

struct ForwardOptions {
  // Traces of length >= 2 must arrive z-normalized; disable only for
  // stress tests that feed raw values on purpose.
  bool check_normalization = true;
};

ForwardTrace forward(const ModelParams& model, const std::vector<double>& values,
                     const ForwardOptions& options = {});

// Cross entropy -log p[label], clamped at 1e-12.
double loss(const VectorXd& probs, Label label);

// Analytic gradients of loss() w.r.t. every parameter, same layout as the
// model itself.
ModelParams backward(const ModelParams& model, const std::vector<double>& values,
                     Label label, const ForwardTrace& trace);
ModelParams backward(const ModelParams& model, const std::vector<double>& values,
                     Label label);

struct LabeledTrace {
  std::vector<double> values;
  Label label = Label::kNormal;
};

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch;
  double loss;
  double accuracy;
};

struct TrainResult {
  ModelParams model;
  std::vector<EpochStats> log;  // training split, one row per epoch
};

// Mini-batch gradient averaging with Adam updates (beta1 0.9, beta2 0.999,
// eps 1e-8). Deterministic given the seed; aborts with the epoch/batch
// position if the loss stops being finite.
TrainResult train(const ModelParams& initial, const std::vector<LabeledTrace>& dataset,
                  const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

int predict(const ModelParams& model, const std::vector<double>& values);

// Checkpoint container: magic, format version, architecture header, then
// each parameter block as name, shape and little-endian 64-bit values.
void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

void write_train_log(const std::vector<EpochStats>& log, const std::string& split,
                     const std::filesystem::path& path);

}  // namespace resp::net
