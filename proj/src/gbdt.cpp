#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "json.hpp"
#include "loadseg/classifier.hpp"
#include "loadseg/error.hpp"
#include "loadseg/random.hpp"

namespace loadseg {

// ---- split -------------------------------------------------------------------

TrainTestSplit split_train_test(const Matrix& features, std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("split ratio must be in (0, 1)");
  if (features.rows() != labels.size()) throw DimensionError("split: label count does not match row count");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  TrainTestSplit out;
  Rng rng(seed);
  std::size_t eligible_total = 0;
  for (auto& [label, idx] : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    if (idx.size() < 2) {
      out.train_only_classes.push_back(label);
    } else {
      eligible_total += idx.size();
    }
  }
  // Largest-remainder allocation of the train quota across eligible classes.
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(eligible_total)));
  std::map<int, std::size_t> quota;
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < 2) continue;
    const double exact = ratio * static_cast<double>(idx.size());
    quota[label] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[label];
    remainders.emplace_back(exact - std::floor(exact), label);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < remainders.size() && assigned < target; ++i, ++assigned) ++quota[remainders[i].second];

  std::vector<std::size_t> train_rows, test_rows;
  for (const auto& [label, idx] : by_class) {
    std::size_t take = idx.size();
    if (idx.size() >= 2) take = std::clamp<std::size_t>(quota[label], 1, idx.size() - 1);
    train_rows.insert(train_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    test_rows.insert(test_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  auto fill = [&](Dataset& d, const std::vector<std::size_t>& rows) {
    d.features = features.select_rows(rows);
    d.rows = rows;
    for (auto r : rows) d.labels.push_back(labels[r]);
  };
  fill(out.train, train_rows);
  fill(out.test, test_rows);
  return out;
}

// ---- trees -------------------------------------------------------------------

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                       : nodes[i].right);
  }
  return nodes[i].value;
}

double RegressionTree::expected_value() const {
  double s = 0.0;
  for (const auto& n : nodes) {
    if (n.feature < 0) s += n.value * n.cover;
  }
  return nodes.empty() || nodes[0].cover <= 0.0 ? 0.0 : s / nodes[0].cover;
}

std::vector<double> GbdtModel::raw_margins(std::span<const double> x) const {
  if (x.size() != feature_count) {
    throw DimensionError("expected " + std::to_string(feature_count) + " features, got " + std::to_string(x.size()));
  }
  std::vector<double> m = base_margins;
  for (const auto& round : trees) {
    for (std::size_t c = 0; c < round.size(); ++c) m[c] += round[c].predict(x);
  }
  return m;
}

int GbdtModel::class_index(int label) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == label) return static_cast<int>(i);
  }
  return -1;
}

namespace {

void softmax_inplace(std::span<double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : v) x /= s;
}

double cross_entropy(const Matrix& margins, const std::vector<std::size_t>& target) {
  double loss = 0.0;
  std::vector<double> row;
  for (std::size_t i = 0; i < margins.rows(); ++i) {
    auto m = margins.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : m) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : m) s += std::exp(x - mx);
    loss += mx + std::log(s) - m[target[i]];
  }
  return loss / static_cast<double>(margins.rows());
}

// Level-wise exact greedy least-squares tree on presorted feature orders.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const GbdtParams& p) : x_(x), p_(p) {
    const std::size_t n = x.rows();
    order_.resize(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      auto& o = order_[f];
      o.resize(n);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
  }

  RegressionTree build(const std::vector<double>& residual, const std::vector<double>& hessian, double leaf_scale) {
    const std::size_t n = x_.rows();
    RegressionTree tree;
    std::vector<int> node_of(n, 0);
    std::vector<double> sum{0.0};
    std::vector<std::size_t> count{n};
    for (double r : residual) sum[0] += r;
    tree.nodes.push_back(TreeNode{});
    tree.nodes[0].cover = static_cast<double>(n);
    std::vector<int> active{0};

    for (int depth = 0; depth < p_.max_depth && !active.empty(); ++depth) {
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot[static_cast<std::size_t>(active[s])] = static_cast<int>(s);
      const std::size_t m = active.size();
      std::vector<double> best_gain(m, 0.0), best_thr(m, 0.0);
      std::vector<int> best_feat(m, -1);
      std::vector<double> sum_l(m), last(m);
      std::vector<std::size_t> cnt_l(m);
      for (std::size_t f = 0; f < x_.cols(); ++f) {
        std::fill(sum_l.begin(), sum_l.end(), 0.0);
        std::fill(cnt_l.begin(), cnt_l.end(), 0);
        for (std::uint32_t i : order_[f]) {
          const int nd = node_of[i];
          if (nd < 0) continue;
          const int s = slot[static_cast<std::size_t>(nd)];
          if (s < 0) continue;
          const auto su = static_cast<std::size_t>(s);
          const double v = x_(i, f);
          if (cnt_l[su] > 0 && v > last[su]) {
            const std::size_t nl = cnt_l[su];
            const std::size_t nr = count[static_cast<std::size_t>(nd)] - nl;
            if (nl >= static_cast<std::size_t>(p_.min_leaf_count) && nr >= static_cast<std::size_t>(p_.min_leaf_count)) {
              const double total = sum[static_cast<std::size_t>(nd)];
              const double sr = total - sum_l[su];
              const double gain = sum_l[su] * sum_l[su] / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                                  total * total / static_cast<double>(nl + nr);
              if (gain > best_gain[su] + 1e-15) {
                best_gain[su] = gain;
                best_feat[su] = static_cast<int>(f);
                double mid = 0.5 * (last[su] + v);
                if (!(mid < v)) mid = last[su];
                best_thr[su] = mid;
              }
            }
          }
          ++cnt_l[su];
          sum_l[su] += residual[i];
          last[su] = v;
        }
      }
      std::vector<int> next;
      std::vector<int> left_of(tree.nodes.size(), -1), right_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < m; ++s) {
        const auto nd = static_cast<std::size_t>(active[s]);
        if (best_feat[s] < 0) continue;
        tree.nodes[nd].feature = best_feat[s];
        tree.nodes[nd].threshold = best_thr[s];
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        tree.nodes[nd].left = l;
        tree.nodes[nd].right = l + 1;
        left_of[nd] = l;
        right_of[nd] = l + 1;
        sum.resize(tree.nodes.size(), 0.0);
        count.resize(tree.nodes.size(), 0);
        next.push_back(l);
        next.push_back(l + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const int nd = node_of[i];
        if (nd < 0) continue;
        const auto ndu = static_cast<std::size_t>(nd);
        if (left_of[ndu] < 0) {
          continue;
        }
        const auto& node = tree.nodes[ndu];
        const int child = x_(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? left_of[ndu] : right_of[ndu];
        node_of[i] = child;
        sum[static_cast<std::size_t>(child)] += residual[i];
        ++count[static_cast<std::size_t>(child)];
      }
      for (int c : next) tree.nodes[static_cast<std::size_t>(c)].cover = static_cast<double>(count[static_cast<std::size_t>(c)]);
      active = std::move(next);
    }

    // Newton leaf values.
    std::vector<double> hsum(tree.nodes.size(), 0.0);
    std::vector<double> rsum(tree.nodes.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      // node_of holds the deepest node reached; that node is a leaf.
      const auto nd = static_cast<std::size_t>(node_of[i]);
      rsum[nd] += residual[i];
      hsum[nd] += hessian[i];
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      auto& node = tree.nodes[k];
      if (node.feature >= 0) continue;
      node.value = hsum[k] > 1e-300 ? leaf_scale * rsum[k] / std::max(hsum[k], 1e-12) : 0.0;
    }
    return tree;
  }

 private:
  const Matrix& x_;
  const GbdtParams& p_;
  std::vector<std::vector<std::uint32_t>> order_;
};

}  // namespace

GbdtModel train(const Dataset& data, const GbdtParams& params) {
  if (params.rounds < 0 || params.max_depth < 1 || params.min_leaf_count < 1 || !(params.learning_rate > 0.0)) {
    throw ParameterError("invalid boosting hyperparameters");
  }
  const std::size_t n = data.features.rows();
  if (n == 0) throw ParameterError("training set is empty");
  if (data.labels.size() != n) throw DimensionError("training labels do not match rows");
  GbdtModel model;
  model.params = params;
  model.feature_count = data.features.cols();
  std::map<int, std::size_t> counts;
  for (int l : data.labels) ++counts[l];
  for (const auto& [l, c] : counts) model.classes.push_back(l);
  const std::size_t k = model.classes.size();
  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = static_cast<std::size_t>(model.class_index(data.labels[i]));
  if (k == 1) {
    model.base_margins = {0.0};
    return model;
  }
  for (int l : model.classes) model.base_margins.push_back(std::log(static_cast<double>(counts[l]) / static_cast<double>(n)));

  Matrix margins(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) margins(i, c) = model.base_margins[c];
  }
  TreeBuilder builder(data.features, params);
  const double leaf_scale = static_cast<double>(k - 1) / static_cast<double>(k);
  double loss = cross_entropy(margins, target);
  Matrix prob(n, k);
  std::vector<double> residual(n), hessian(n);
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = prob.row(i);
      auto m = margins.row(i);
      std::copy(m.begin(), m.end(), p.begin());
      softmax_inplace(p);
    }
    std::vector<RegressionTree> round_trees;
    Matrix step(n, k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob(i, c);
        residual[i] = (target[i] == c ? 1.0 : 0.0) - p;
        hessian[i] = p * (1.0 - p);
      }
      RegressionTree t = builder.build(residual, hessian, leaf_scale);
      for (auto& node : t.nodes) node.value *= params.learning_rate;
      for (std::size_t i = 0; i < n; ++i) step(i, c) = t.predict(data.features.row(i));
      round_trees.push_back(std::move(t));
    }
    // Step halving keeps the training loss monotone.
    double scale = 1.0;
    Matrix candidate(n, k);
    double new_loss = loss;
    for (int attempt = 0; attempt < 40; ++attempt) {
      for (std::size_t j = 0; j < n * k; ++j) candidate.data()[j] = margins.data()[j] + scale * step.data()[j];
      new_loss = cross_entropy(candidate, target);
      if (new_loss <= loss) break;
      scale *= 0.5;
    }
    if (new_loss > loss) {
      scale = 0.0;
      new_loss = loss;
      candidate = margins;
    }
    if (scale != 1.0) {
      for (auto& t : round_trees) {
        for (auto& node : t.nodes) node.value *= scale;
      }
    }
    margins = std::move(candidate);
    loss = new_loss;
    model.training_loss.push_back(loss);
    model.trees.push_back(std::move(round_trees));
  }
  return model;
}

Matrix predict_proba(const GbdtModel& model, const Matrix& features) {
  if (features.cols() != model.feature_count && features.rows() > 0) {
    throw DimensionError("expected " + std::to_string(model.feature_count) + " features, got " +
                         std::to_string(features.cols()));
  }
  Matrix out(features.rows(), model.class_count());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto m = model.raw_margins(features.row(i));
    for (double& v : m) v /= model.temperature;
    softmax_inplace(m);
    std::copy(m.begin(), m.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> predict(const GbdtModel& model, const Matrix& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    auto row = probabilities.row(i);
    out[i] = model.classes[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
  }
  return out;
}

double fit_temperature(GbdtModel& model, const Dataset& validation) {
  if (validation.features.rows() == 0 || model.class_count() < 2) return model.temperature;
  std::vector<std::vector<double>> margins;
  std::vector<std::size_t> target;
  for (std::size_t i = 0; i < validation.features.rows(); ++i) {
    const int ci = model.class_index(validation.labels[i]);
    if (ci < 0) continue;
    margins.push_back(model.raw_margins(validation.features.row(i)));
    target.push_back(static_cast<std::size_t>(ci));
  }
  if (margins.empty()) return model.temperature;
  auto nll = [&](double log_t) {
    const double t = std::exp(log_t);
    double s = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (double v : margins[i]) mx = std::max(mx, v / t);
      double z = 0.0;
      for (double v : margins[i]) z += std::exp(v / t - mx);
      s += mx + std::log(z) - margins[i][target[i]] / t;
    }
    return s;
  };
  // Golden-section search on log T in [-4, 4].
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -4.0, b = 4.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = nll(c), fd = nll(d);
  for (int it = 0; it < 100; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = nll(d);
    }
  }
  model.temperature = std::exp(0.5 * (a + b));
  return model.temperature;
}

// ---- serialization ---------------------------------------------------------

std::string model_to_json(const GbdtModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "loadseg-gbdt";
  j["version"] = 1;
  j["params"] = {{"rounds", model.params.rounds},
                 {"learning_rate", model.params.learning_rate},
                 {"max_depth", model.params.max_depth},
                 {"min_leaf_count", model.params.min_leaf_count},
                 {"seed", model.params.seed}};
  j["classes"] = model.classes;
  j["feature_count"] = model.feature_count;
  j["feature_names"] = model.feature_names;
  j["base_margins"] = model.base_margins;
  j["temperature"] = model.temperature;
  if (model.normalization) {
    j["normalization"] = {{"min", model.normalization->min}, {"max", model.normalization->max}};
  } else {
    j["normalization"] = nullptr;
  }
  j["training_loss"] = model.training_loss;
  auto& rounds = j["trees"] = nlohmann::ordered_json::array();
  for (const auto& round : model.trees) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& t : round) {
      auto nodes = nlohmann::ordered_json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.cover});
      r.push_back(std::move(nodes));
    }
    rounds.push_back(std::move(r));
  }
  return j.dump() + "\n";
}

GbdtModel model_from_json(const std::string& text) {
  GbdtModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "loadseg-gbdt") throw SchemaError("not a model file");
    const auto& p = j.at("params");
    m.params.rounds = p.at("rounds");
    m.params.learning_rate = p.at("learning_rate");
    m.params.max_depth = p.at("max_depth");
    m.params.min_leaf_count = p.at("min_leaf_count");
    m.params.seed = p.at("seed");
    m.classes = j.at("classes").get<std::vector<int>>();
    m.feature_count = j.at("feature_count");
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.base_margins = j.at("base_margins").get<std::vector<double>>();
    m.temperature = j.at("temperature");
    if (!j.at("normalization").is_null()) {
      MinMaxBounds b;
      b.min = j["normalization"].at("min").get<std::vector<double>>();
      b.max = j["normalization"].at("max").get<std::vector<double>>();
      m.normalization = std::move(b);
    }
    m.training_loss = j.at("training_loss").get<std::vector<double>>();
    for (const auto& round : j.at("trees")) {
      std::vector<RegressionTree> r;
      for (const auto& t : round) {
        RegressionTree tree;
        for (const auto& n : t) {
          tree.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                        n.at(3).get<int>(), n.at(4).get<double>(), n.at(5).get<double>()});
        }
        r.push_back(std::move(tree));
      }
      m.trees.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  }
  if (m.base_margins.size() != m.classes.size()) throw SchemaError("model class count mismatch");
  return m;
}

}  // namespace loadseg
