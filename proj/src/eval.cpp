#include "resp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "resp/error.hpp"

namespace resp::eval {

void split(const std::vector<net::LabeledTrace>& dataset, double train_fraction,
           std::uint64_t seed, std::vector<net::LabeledTrace>& train,
           std::vector<net::LabeledTrace>& test) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValidationError("train fraction must lie strictly between 0 and 1");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_class[dataset[i].label == Label::kAbnormal ? 1 : 0].push_back(i);
  for (const auto& members : by_class)
    if (members.size() < 2)
      throw ValidationError("stratified split needs at least 2 members per class");

  train.clear();
  test.clear();
  std::mt19937_64 rng(seed);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k)
      (k < n_train ? train : test).push_back(dataset[members[k]]);
  }
}

EvalReport metrics(const std::vector<int>& predictions, const std::vector<Label>& labels) {
  if (predictions.empty()) throw ValidationError("metrics over an empty prediction list");
  if (predictions.size() != labels.size())
    throw ValidationError("prediction and label counts differ");

  EvalReport report;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int truth = labels[i] == Label::kAbnormal ? 1 : 0;
    const int pred = predictions[i] ? 1 : 0;
    ++report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
  }

  const double tp = static_cast<double>(report.tp());
  const double tn = static_cast<double>(report.tn());
  const double fp = static_cast<double>(report.fp());
  const double fn = static_cast<double>(report.fn());

  report.accuracy = (tp + tn) / static_cast<double>(predictions.size());
  if (tp + fp > 0) {
    report.precision = tp / (tp + fp);
  } else {
    report.precision = 0.0;
    report.zero_division = true;
  }
  if (tp + fn > 0) {
    report.recall = tp / (tp + fn);
  } else {
    report.recall = 0.0;
    report.zero_division = true;
  }
  if (report.precision + report.recall > 0) {
    report.f1 = 2.0 * report.precision * report.recall / (report.precision + report.recall);
  } else {
    report.f1 = 0.0;
    report.zero_division = true;
  }
  return report;
}

EvalReport evaluate(const net::ModelParams& model,
                    const std::vector<net::LabeledTrace>& test_set) {
  std::vector<int> predictions;
  std::vector<Label> labels;
  predictions.reserve(test_set.size());
  labels.reserve(test_set.size());
  for (const auto& example : test_set) {
    predictions.push_back(net::predict(model, example.values));
    labels.push_back(example.label);
  }
  EvalReport report = metrics(predictions, labels);
  report.model_variant = model.variant;
  return report;
}

std::vector<EvalReport> compare_models(const std::vector<net::LabeledTrace>& dataset,
                                       const std::vector<net::Variant>& variants,
                                       const CompareConfig& config) {
  std::vector<net::LabeledTrace> train_set, test_set;
  split(dataset, config.train_fraction, config.train.seed, train_set, test_set);

  std::vector<EvalReport> reports;
  for (net::Variant variant : variants) {
    net::ModelParams model = net::init_model(variant, config.hidden_size,
                                             config.attn_size, 1, config.train.seed);
    net::TrainResult trained = net::train(model, train_set, config.train);
    reports.push_back(evaluate(trained.model, test_set));
  }
  return reports;
}

void write_report_csv(const std::vector<EvalReport>& reports,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,accuracy,precision,recall,f1,tn,fp,fn,tp\n";
  char buf[256];
  for (const EvalReport& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%ld,%ld,%ld,%ld\n",
                  net::variant_name(r.model_variant).c_str(), r.accuracy, r.precision,
                  r.recall, r.f1, r.tn(), r.fp(), r.fn(), r.tp());
    out << buf;
  }
}

void write_confusion_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << ",pred_normal,pred_abnormal\n";
  out << "true_normal," << report.tn() << "," << report.fp() << "\n";
  out << "true_abnormal," << report.fn() << "," << report.tp() << "\n";
}

}  // namespace resp::eval
