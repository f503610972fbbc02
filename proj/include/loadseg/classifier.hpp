#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadseg/ingest.hpp"
#include "loadseg/matrix.hpp"

namespace loadseg {

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> rows;  // row index in the matrix the set was drawn from
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<int> train_only_classes;  // fewer than two members, kept whole in train
};

/// Stratified split; `ratio` is the train share. Classes of two or more
/// members share round(ratio * m) train slots (m = their total size) by
/// largest remainder, each keeping at least one point on each side. Smaller
/// classes go to train whole.
TrainTestSplit split_train_test(const Matrix& features, std::span<const int> labels, double ratio, std::uint64_t seed);

struct GbdtParams {
  int rounds = 200;
  double learning_rate = 0.1;
  int max_depth = 6;
  int min_leaf_count = 1;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf margin contribution (0 for internal nodes)
  double cover = 0.0;  // training samples reaching the node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  [[nodiscard]] double predict(std::span<const double> x) const;
  /// Cover-weighted mean leaf value.
  [[nodiscard]] double expected_value() const;
};

struct GbdtModel {
  GbdtParams params;
  std::vector<int> classes;  // label value of each class index
  std::size_t feature_count = 0;
  std::vector<std::string> feature_names;
  std::vector<double> base_margins;
  std::vector<std::vector<RegressionTree>> trees;  // [round][class]
  std::optional<MinMaxBounds> normalization;
  double temperature = 1.0;
  std::vector<double> training_loss;  // mean cross-entropy after each round

  [[nodiscard]] std::size_t class_count() const { return classes.size(); }
  [[nodiscard]] std::vector<double> raw_margins(std::span<const double> x) const;
  /// Class index for a label value, or -1.
  [[nodiscard]] int class_index(int label) const;
};

/// Softmax boosting: each round fits one least-squares tree per class to the
/// negative gradient, with Newton leaf values. A single class yields a model
/// with no trees that always predicts that class.
GbdtModel train(const Dataset& train_set, const GbdtParams& params = {});

/// n x C softmax probabilities (margins divided by the model temperature).
Matrix predict_proba(const GbdtModel& model, const Matrix& features);
/// Label value of the most probable class per row (first index on ties).
std::vector<int> predict(const GbdtModel& model, const Matrix& probabilities);

/// Temperature minimising held-out log loss; stores it in the model and returns it.
double fit_temperature(GbdtModel& model, const Dataset& validation);

struct ClassMetrics {
  std::vector<int> classes;
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> f1;
  std::vector<long long> support;
  std::vector<std::vector<long long>> confusion;  // [true][predicted]
  std::optional<double> macro_precision;
  std::optional<double> macro_recall;
  std::optional<double> macro_f1;
  double accuracy = 0.0;
};

/// Metrics over the given class list. A class with no true members is absent
/// (all three metrics empty); precision is absent when nothing was predicted as it.
ClassMetrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, const std::vector<int>& classes);
ClassMetrics evaluate(const GbdtModel& model, const Dataset& test_set);

/// Table-4 style CSV: class,precision,recall,f1,support plus a macro row.
std::string metrics_to_csv(const ClassMetrics& metrics);

std::string model_to_json(const GbdtModel& model);
GbdtModel model_from_json(const std::string& text);

// ---- Attribution -------------------------------------------------------------

/// Adds the exact SHAP values of one tree at x into phi (cover-weighted
/// conditional expectations as the background).
void tree_shap(const RegressionTree& tree, std::span<const double> x, std::span<double> phi);

struct Attribution {
  std::size_t points = 0;
  std::size_t classes = 0;
  std::size_t features = 0;
  std::vector<double> phi;   // [point][class][feature]
  std::vector<double> base;  // [class]
  std::vector<double> mean_abs;  // [class][feature]

  [[nodiscard]] double value(std::size_t point, std::size_t cls, std::size_t feature) const {
    return phi[(point * classes + cls) * features + feature];
  }
  /// Feature indices by descending mean |phi| for a class.
  [[nodiscard]] std::vector<std::size_t> ranking(std::size_t cls) const;
};

Attribution shap_attribute(const GbdtModel& model, const Matrix& features);

std::string attribution_to_csv(const Attribution& attribution, const std::vector<std::string>& ids,
                               const GbdtModel& model);
std::string ranking_to_json(const Attribution& attribution, const GbdtModel& model, std::size_t top = 10);

}  // namespace loadseg
