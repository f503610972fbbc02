#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "loadseg/cluster.hpp"
#include "loadseg/matrix.hpp"

namespace loadseg {

struct ContingencyMatrix {
  std::string algo_a;
  std::string algo_b;
  std::vector<int> row_labels;  // label of A for each row, ascending
  std::vector<int> col_labels;  // label of B for each column, ascending
  std::vector<std::vector<long long>> counts;

  [[nodiscard]] long long row_sum(std::size_t r) const;
  [[nodiscard]] long long col_sum(std::size_t c) const;
  [[nodiscard]] long long total() const;
  [[nodiscard]] ContingencyMatrix transposed() const;
};

/// Co-occurrence counts. A point is skipped if either side marks it as noise;
/// every non-noise label of either labeling still gets a row or column.
ContingencyMatrix contingency(std::span<const int> labels_a, std::span<const int> labels_b,
                              std::string algo_a = "a", std::string algo_b = "b");

/// Rectangular maximum-weight assignment. Returns, for each row, the matched
/// column or -1 when there are more rows than columns.
std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weights);

inline constexpr double kDefaultInstabilityThreshold = 0.75;

struct AgreementReport {
  std::map<int, int> alignment;              // A label -> B label (injective)
  double overall_agreement = 0.0;            // matched / co-labeled points
  std::map<int, double> per_cluster_agreement;  // matched / row sum; 0 for an empty row
  std::set<int> unstable;                    // agreement < threshold
};

/// Maximum matching on counts; exact ties prefer pairing equal label values.
AgreementReport align(const ContingencyMatrix& matrix, double threshold = kDefaultInstabilityThreshold);

struct CrossComparison {
  Algorithm reference = Algorithm::kmeans;
  std::vector<ContingencyMatrix> tables;
  std::vector<AgreementReport> reports;
  std::set<int> flagged;  // unstable in a strict majority of comparisons
};

/// Compares the labeling whose algorithm is `reference` with every other one.
CrossComparison cross_compare(const std::vector<Labeling>& labelings, Algorithm reference,
                              double threshold = kDefaultInstabilityThreshold);

/// Table-3 style CSV: header row of B labels, one row per A label.
std::string contingency_to_csv(const ContingencyMatrix& matrix);
std::string cross_comparison_to_json(const CrossComparison& comparison);

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 0.0;  // 0 selects n / 12
  std::uint64_t seed = 0;
};

struct TsneResult {
  Matrix embedding;  // n x 2
  std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL against the unexaggerated P)
  double kl_after_exaggeration = 0.0;
  double kl_final = 0.0;
};

/// Exact O(n^2) t-SNE. Requires n > 3 * perplexity.
TsneResult tsne_embed(const Matrix& points, const TsneOptions& options = {});

}  // namespace loadseg
