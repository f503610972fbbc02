#include "loadseg/consensus.hpp"

#include <algorithm>
#include <limits>

#include "json.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

long long ContingencyMatrix::row_sum(std::size_t r) const {
  long long s = 0;
  for (auto v : counts[r]) s += v;
  return s;
}

long long ContingencyMatrix::col_sum(std::size_t c) const {
  long long s = 0;
  for (const auto& row : counts) s += row[c];
  return s;
}

long long ContingencyMatrix::total() const {
  long long s = 0;
  for (std::size_t r = 0; r < counts.size(); ++r) s += row_sum(r);
  return s;
}

ContingencyMatrix ContingencyMatrix::transposed() const {
  ContingencyMatrix t;
  t.algo_a = algo_b;
  t.algo_b = algo_a;
  t.row_labels = col_labels;
  t.col_labels = row_labels;
  t.counts.assign(col_labels.size(), std::vector<long long>(row_labels.size(), 0));
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    for (std::size_t c = 0; c < col_labels.size(); ++c) t.counts[c][r] = counts[r][c];
  }
  return t;
}

ContingencyMatrix contingency(std::span<const int> a, std::span<const int> b, std::string algo_a, std::string algo_b) {
  if (a.size() != b.size()) throw DimensionError("contingency: labelings differ in length");
  std::set<int> ra, cb;
  for (int l : a) {
    if (l >= 0) ra.insert(l);
  }
  for (int l : b) {
    if (l >= 0) cb.insert(l);
  }
  ContingencyMatrix m;
  m.algo_a = std::move(algo_a);
  m.algo_b = std::move(algo_b);
  m.row_labels.assign(ra.begin(), ra.end());
  m.col_labels.assign(cb.begin(), cb.end());
  std::map<int, std::size_t> ri, ci;
  for (std::size_t i = 0; i < m.row_labels.size(); ++i) ri[m.row_labels[i]] = i;
  for (std::size_t i = 0; i < m.col_labels.size(); ++i) ci[m.col_labels[i]] = i;
  m.counts.assign(m.row_labels.size(), std::vector<long long>(m.col_labels.size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0) continue;
    ++m.counts[ri[a[i]]][ci[b[i]]];
  }
  return m;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<long long>>& weights) {
  const std::size_t rows = weights.size();
  const std::size_t cols = rows ? weights[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  long long top = 0;
  for (const auto& r : weights) {
    for (auto v : r) top = std::max(top, v);
  }
  // Square cost matrix (1-based) for the potentials formulation of the Hungarian method.
  std::vector<std::vector<long long>> cost(n + 1, std::vector<long long>(n + 1, top));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) cost[i + 1][j + 1] = top - weights[i][j];
  }
  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<long long> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      long long delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long long cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> match(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = static_cast<int>(j - 1);
  }
  return match;
}

AgreementReport align(const ContingencyMatrix& m, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ParameterError("instability threshold must be in (0, 1]");
  AgreementReport rep;
  const std::size_t rows = m.row_labels.size();
  const std::size_t cols = m.col_labels.size();
  // Scale counts so a +1 bonus for equal label values only breaks exact ties.
  const long long scale = static_cast<long long>(std::min(rows, cols)) + 1;
  std::vector<std::vector<long long>> w(rows, std::vector<long long>(cols, 0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      w[r][c] = m.counts[r][c] * scale + (m.row_labels[r] == m.col_labels[c] ? 1 : 0);
    }
  }
  const auto match = max_weight_assignment(w);
  long long matched_total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = m.row_labels[r];
    long long matched = 0;
    if (match[r] >= 0) {
      rep.alignment[label] = m.col_labels[static_cast<std::size_t>(match[r])];
      matched = m.counts[r][static_cast<std::size_t>(match[r])];
    }
    matched_total += matched;
    const long long rs = m.row_sum(r);
    const double agreement = rs > 0 ? static_cast<double>(matched) / static_cast<double>(rs) : 0.0;
    rep.per_cluster_agreement[label] = agreement;
    if (agreement < threshold) rep.unstable.insert(label);
  }
  const long long total = m.total();
  rep.overall_agreement = total > 0 ? static_cast<double>(matched_total) / static_cast<double>(total) : 0.0;
  return rep;
}

CrossComparison cross_compare(const std::vector<Labeling>& labelings, Algorithm reference, double threshold) {
  if (labelings.size() < 2) throw ParameterError("cross_compare needs at least two labelings");
  auto ref = std::find_if(labelings.begin(), labelings.end(), [&](const Labeling& l) { return l.algorithm == reference; });
  if (ref == labelings.end()) throw ParameterError("no labeling for reference algorithm " + to_string(reference));
  CrossComparison out;
  out.reference = reference;
  std::map<int, int> unstable_votes;
  for (auto it = labelings.begin(); it != labelings.end(); ++it) {
    if (it == ref) continue;
    auto table = contingency(ref->labels, it->labels, to_string(ref->algorithm), to_string(it->algorithm));
    auto rep = align(table, threshold);
    for (int l : rep.unstable) ++unstable_votes[l];
    out.tables.push_back(std::move(table));
    out.reports.push_back(std::move(rep));
  }
  const std::size_t comparisons = out.reports.size();
  for (const auto& [label, votes] : unstable_votes) {
    if (2 * static_cast<std::size_t>(votes) > comparisons) out.flagged.insert(label);
  }
  return out;
}

std::string contingency_to_csv(const ContingencyMatrix& m) {
  std::string out = m.algo_a + "\\" + m.algo_b;
  for (int c : m.col_labels) out += "," + std::to_string(c);
  out += ",total\n";
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    out += std::to_string(m.row_labels[r]);
    for (auto v : m.counts[r]) out += "," + std::to_string(v);
    out += "," + std::to_string(m.row_sum(r)) + "\n";
  }
  return out;
}

std::string cross_comparison_to_json(const CrossComparison& cmp) {
  nlohmann::ordered_json j;
  j["reference"] = to_string(cmp.reference);
  j["flagged"] = cmp.flagged;
  auto& arr = j["comparisons"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cmp.reports.size(); ++i) {
    const auto& r = cmp.reports[i];
    nlohmann::ordered_json o;
    o["against"] = cmp.tables[i].algo_b;
    o["overall_agreement"] = r.overall_agreement;
    auto& al = o["alignment"] = nlohmann::ordered_json::object();
    for (const auto& [a, b] : r.alignment) al[std::to_string(a)] = b;
    auto& pc = o["per_cluster_agreement"] = nlohmann::ordered_json::object();
    for (const auto& [a, v] : r.per_cluster_agreement) pc[std::to_string(a)] = v;
    o["unstable"] = r.unstable;
    arr.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

}  // namespace loadseg
