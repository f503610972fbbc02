#include <algorithm>
#include <set>
#include <sstream>

#include "loadseg/classifier.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

ClassMetrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, const std::vector<int>& classes) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and prediction lengths differ");
  const std::size_t c = classes.size();
  auto index = [&](int label) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw ParameterError("label " + std::to_string(label) + " is not in the class list");
    return static_cast<std::size_t>(it - classes.begin());
  };
  ClassMetrics m;
  m.classes = classes;
  m.confusion.assign(c, std::vector<long long>(c, 0));
  long long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = index(truth[i]);
    const auto p = index(predicted[i]);
    ++m.confusion[t][p];
    if (t == p) ++correct;
  }
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  m.precision.resize(c);
  m.recall.resize(c);
  m.f1.resize(c);
  m.support.resize(c);
  double sp = 0.0, sr = 0.0, sf = 0.0;
  int np = 0, nr = 0, nf = 0;
  for (std::size_t k = 0; k < c; ++k) {
    long long row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += m.confusion[k][j];
      col += m.confusion[j][k];
    }
    m.support[k] = row;
    if (row == 0) continue;  // absent from the evaluated set
    const auto tp = static_cast<double>(m.confusion[k][k]);
    m.recall[k] = tp / static_cast<double>(row);
    if (col > 0) m.precision[k] = tp / static_cast<double>(col);
    if (m.precision[k]) {
      const double p = *m.precision[k], r = *m.recall[k];
      m.f1[k] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    if (m.precision[k]) {
      sp += *m.precision[k];
      ++np;
    }
    sr += *m.recall[k];
    ++nr;
    if (m.f1[k]) {
      sf += *m.f1[k];
      ++nf;
    }
  }
  if (np > 0) m.macro_precision = sp / np;
  if (nr > 0) m.macro_recall = sr / nr;
  if (nf > 0) m.macro_f1 = sf / nf;
  return m;
}

ClassMetrics evaluate(const GbdtModel& model, const Dataset& test_set) {
  if (test_set.features.rows() == 0) throw ParameterError("test set is empty");
  const auto predicted = predict(model, predict_proba(model, test_set.features));
  std::set<int> all(model.classes.begin(), model.classes.end());
  all.insert(test_set.labels.begin(), test_set.labels.end());
  return compute_metrics(test_set.labels, predicted, std::vector<int>(all.begin(), all.end()));
}

std::string metrics_to_csv(const ClassMetrics& metrics) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  long long total = 0;
  for (std::size_t k = 0; k < metrics.classes.size(); ++k) {
    out << metrics.classes[k] << ',' << opt(metrics.precision[k]) << ',' << opt(metrics.recall[k]) << ','
        << opt(metrics.f1[k]) << ',' << metrics.support[k] << '\n';
    total += metrics.support[k];
  }
  out << "macro," << opt(metrics.macro_precision) << ',' << opt(metrics.macro_recall) << ',' << opt(metrics.macro_f1)
      << ',' << total << '\n';
  out << "accuracy,,," << format_double(metrics.accuracy) << ',' << total << '\n';
  return out.str();
}

}  // namespace loadseg
