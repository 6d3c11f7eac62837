#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "resp/net.hpp"
#include "resp/types.hpp"

namespace resp::eval {

// Rows are true labels, columns predicted labels, index 0 = normal,
// 1 = abnormal. Abnormal is the positive class.
struct EvalReport {
  net::Variant model_variant = net::Variant::kBiGruAt;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<std::array<long, 2>, 2> confusion{{{0, 0}, {0, 0}}};
  bool zero_division = false;  // set when precision/recall/F1 hit a 0/0

  long tn() const { return confusion[0][0]; }
  long fp() const { return confusion[0][1]; }
  long fn() const { return confusion[1][0]; }
  long tp() const { return confusion[1][1]; }
  long total() const { return tn() + fp() + fn() + tp(); }
};

// Stratified deterministic split; per-class train counts are rounded
// half-up so each class ratio is within one sample of the request.
void split(const std::vector<net::LabeledTrace>& dataset, double train_fraction,
           std::uint64_t seed, std::vector<net::LabeledTrace>& train,
           std::vector<net::LabeledTrace>& test);

EvalReport metrics(const std::vector<int>& predictions, const std::vector<Label>& labels);

EvalReport evaluate(const net::ModelParams& model,
                    const std::vector<net::LabeledTrace>& test_set);

struct CompareConfig {
  double train_fraction = 0.76;
  net::TrainConfig train;
  int hidden_size = 32;
  int attn_size = 8;
};

// Trains every requested variant with an identical split, seed and
// configuration, then evaluates all of them on the shared test set.
std::vector<EvalReport> compare_models(const std::vector<net::LabeledTrace>& dataset,
                                       const std::vector<net::Variant>& variants,
                                       const CompareConfig& config);

// `model,accuracy,precision,recall,f1,tn,fp,fn,tp`
void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path);

void write_confusion_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace resp::eval
