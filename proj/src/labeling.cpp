#include <set>

#include "loadseg/cluster.hpp"
#include "loadseg/error.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kmeans: return "kmeans";
    case Algorithm::kmedoids: return "kmedoids";
    case Algorithm::agglomerative: return "agglomerative";
    case Algorithm::dbscan: return "dbscan";
  }
  return "unknown";
}

std::string to_string(Linkage l) {
  switch (l) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
    case Linkage::ward: return "ward";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  name = trim(name);
  if (name == "kmeans" || name == "k-means") return Algorithm::kmeans;
  if (name == "kmedoids" || name == "k-medoids" || name == "pam") return Algorithm::kmedoids;
  if (name == "agglomerative" || name == "hierarchical") return Algorithm::agglomerative;
  if (name == "dbscan") return Algorithm::dbscan;
  throw ParameterError("unknown algorithm '" + std::string(name) + "'");
}

Linkage parse_linkage(std::string_view name) {
  name = trim(name);
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  if (name == "ward") return Linkage::ward;
  throw ParameterError("unknown linkage '" + std::string(name) + "'");
}

int Labeling::cluster_count() const {
  std::set<int> distinct;
  for (int l : labels) {
    if (l >= 0) distinct.insert(l);
  }
  return static_cast<int>(distinct.size());
}

double Labeling::noise_fraction() const {
  if (labels.empty()) return 0.0;
  std::size_t noise = 0;
  for (int l : labels) noise += l < 0 ? 1 : 0;
  return static_cast<double>(noise) / static_cast<double>(labels.size());
}

std::string Labeling::params_hash() const {
  std::string key = to_string(algorithm);
  for (const auto& [k, v] : params) key += ";" + k + "=" + v;
  return hex64(fnv1a64(key));
}

std::vector<int> canonicalize_labels(std::span<const int> labels) {
  std::vector<int> remap;
  std::vector<int> out(labels.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0) continue;
    if (static_cast<std::size_t>(l) >= remap.size()) remap.resize(static_cast<std::size_t>(l) + 1, -1);
    int& slot = remap[static_cast<std::size_t>(l)];
    if (slot < 0) {
      int next = 0;
      for (int r : remap) next += r >= 0 ? 1 : 0;
      slot = next;
    }
    out[i] = slot;
  }
  return out;
}

std::string labelings_to_csv(const std::vector<std::string>& ids, const std::vector<Labeling>& labelings) {
  std::string out = "household_id,algorithm,params_hash,label\n";
  for (const auto& lab : labelings) {
    if (lab.labels.size() != ids.size()) throw DimensionError("labeling length does not match id list");
    const std::string algo = to_string(lab.algorithm);
    const std::string hash = lab.params_hash();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out += csv_field(ids[i]) + "," + algo + "," + hash + "," + std::to_string(lab.labels[i]) + "\n";
    }
  }
  return out;
}

}  // namespace loadseg
