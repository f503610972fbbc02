#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "loadseg/classifier.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

namespace {

struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

using Path = std::vector<PathElement>;

void extend(Path& path, double zero_fraction, double one_fraction, int feature) {
  const std::size_t depth = path.size();
  path.push_back({feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0});
  const auto d1 = static_cast<double>(depth + 1);
  for (std::size_t ii = depth; ii-- > 0;) {
    path[ii + 1].weight += one_fraction * path[ii].weight * static_cast<double>(ii + 1) / d1;
    path[ii].weight = zero_fraction * path[ii].weight * static_cast<double>(depth - ii) / d1;
  }
}

void unwind(Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  for (std::size_t ii = depth; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[ii].weight;
      path[ii].weight = next * d1 / (static_cast<double>(ii + 1) * one);
      next = tmp - path[ii].weight * zero * static_cast<double>(depth - ii) / d1;
    } else {
      path[ii].weight = path[ii].weight * d1 / (zero * static_cast<double>(depth - ii));
    }
  }
  for (std::size_t ii = index; ii < depth; ++ii) {
    path[ii].feature = path[ii + 1].feature;
    path[ii].zero_fraction = path[ii + 1].zero_fraction;
    path[ii].one_fraction = path[ii + 1].one_fraction;
  }
  path.pop_back();
}

// Total weight of the path with element `index` unwound, without modifying it.
double unwound_sum(const Path& path, std::size_t index) {
  const std::size_t depth = path.size() - 1;
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const auto d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  double total = 0.0;
  for (std::size_t ii = depth; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(ii + 1) * one);
      total += tmp;
      next = path[ii].weight - tmp * zero * static_cast<double>(depth - ii) / d1;
    } else {
      total += path[ii].weight / zero * d1 / static_cast<double>(depth - ii);
    }
  }
  return total;
}

void recurse(const RegressionTree& tree, std::span<const double> x, std::span<double> phi, std::size_t node, Path path,
             double zero_fraction, double one_fraction, int feature) {
  extend(path, zero_fraction, one_fraction, feature);
  const TreeNode& n = tree.nodes[node];
  if (n.feature < 0) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const double w = unwound_sum(path, i);
      phi[static_cast<std::size_t>(path[i].feature)] += w * (path[i].one_fraction - path[i].zero_fraction) * n.value;
    }
    return;
  }
  const auto f = static_cast<std::size_t>(n.feature);
  const auto hot = static_cast<std::size_t>(x[f] <= n.threshold ? n.left : n.right);
  const auto cold = static_cast<std::size_t>(x[f] <= n.threshold ? n.right : n.left);
  double incoming_zero = 1.0, incoming_one = 1.0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (path[k].feature == n.feature) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind(path, k);
      break;
    }
  }
  const double cover = n.cover > 0.0 ? n.cover : 1.0;
  recurse(tree, x, phi, hot, path, incoming_zero * tree.nodes[hot].cover / cover, incoming_one, n.feature);
  recurse(tree, x, phi, cold, path, incoming_zero * tree.nodes[cold].cover / cover, 0.0, n.feature);
}

}  // namespace

void tree_shap(const RegressionTree& tree, std::span<const double> x, std::span<double> phi) {
  if (tree.nodes.empty()) return;
  Path path;
  path.reserve(32);
  recurse(tree, x, phi, 0, path, 1.0, 1.0, -1);
}

std::vector<std::size_t> Attribution::ranking(std::size_t cls) const {
  std::vector<std::size_t> idx(features);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return mean_abs[cls * features + a] > mean_abs[cls * features + b];
  });
  return idx;
}

Attribution shap_attribute(const GbdtModel& model, const Matrix& features) {
  if (features.rows() > 0 && features.cols() != model.feature_count) {
    throw DimensionError("expected " + std::to_string(model.feature_count) + " features, got " +
                         std::to_string(features.cols()));
  }
  Attribution a;
  a.points = features.rows();
  a.classes = model.class_count();
  a.features = model.feature_count;
  a.phi.assign(a.points * a.classes * a.features, 0.0);
  a.mean_abs.assign(a.classes * a.features, 0.0);
  a.base = model.base_margins;
  for (const auto& round : model.trees) {
    for (std::size_t c = 0; c < round.size(); ++c) a.base[c] += round[c].expected_value();
  }
  for (std::size_t i = 0; i < a.points; ++i) {
    const auto x = features.row(i);
    for (std::size_t c = 0; c < a.classes; ++c) {
      std::span<double> phi(a.phi.data() + (i * a.classes + c) * a.features, a.features);
      for (const auto& round : model.trees) tree_shap(round[c], x, phi);
      for (std::size_t f = 0; f < a.features; ++f) a.mean_abs[c * a.features + f] += std::abs(phi[f]);
    }
  }
  if (a.points > 0) {
    for (double& v : a.mean_abs) v /= static_cast<double>(a.points);
  }
  return a;
}

namespace {

std::string feature_label(const GbdtModel& model, std::size_t f) {
  return f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f);
}

}  // namespace

std::string attribution_to_csv(const Attribution& attribution, const std::vector<std::string>& ids,
                               const GbdtModel& model) {
  if (ids.size() != attribution.points) throw DimensionError("id count does not match attribution rows");
  std::string out = "household_id,class";
  for (std::size_t f = 0; f < attribution.features; ++f) out += "," + csv_field(feature_label(model, f));
  out += '\n';
  for (std::size_t i = 0; i < attribution.points; ++i) {
    for (std::size_t c = 0; c < attribution.classes; ++c) {
      out += csv_field(ids[i]) + "," + std::to_string(model.classes[c]);
      for (std::size_t f = 0; f < attribution.features; ++f) out += "," + format_double(attribution.value(i, c, f));
      out += '\n';
    }
  }
  return out;
}

std::string ranking_to_json(const Attribution& attribution, const GbdtModel& model, std::size_t top) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < attribution.classes; ++c) {
    nlohmann::ordered_json entry;
    entry["class"] = model.classes[c];
    entry["base_value"] = attribution.base[c];
    auto& ranking = entry["ranking"] = nlohmann::ordered_json::array();
    const auto order = attribution.ranking(c);
    for (std::size_t r = 0; r < std::min(top, order.size()); ++r) {
      ranking.push_back({{"feature", feature_label(model, order[r])},
                         {"mean_abs_shap", attribution.mean_abs[c * attribution.features + order[r]]}});
    }
    j.push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

}  // namespace loadseg
