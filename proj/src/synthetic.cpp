#include "loadseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "loadseg/error.hpp"
#include "loadseg/random.hpp"
#include "loadseg/text.hpp"

namespace loadseg {

namespace {

double normal(Rng& rng) {
  // Box-Muller on the portable uniform generator.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Gram-Schmidt orthonormal vectors, each a random smooth curve before orthogonalization.
std::vector<std::vector<double>> orthonormal_basis(std::size_t count, std::size_t dims, Rng& rng, bool smooth) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dims, 0.0);
    if (smooth) {
      for (int b = 0; b < 2; ++b) {
        const double center = uniform01(rng) * static_cast<double>(dims);
        const double width = 1.0 + 1.0 * uniform01(rng);
        const double amp = normal(rng);
        for (std::size_t i = 0; i < dims; ++i) {
          // circular distance so the curve wraps around midnight
          double d = std::abs(static_cast<double>(i) - center);
          d = std::min(d, static_cast<double>(dims) - d);
          v[i] += amp * std::exp(-0.5 * d * d / (width * width));
        }
      }
    } else {
      for (auto& x : v) x = normal(rng);
    }
    for (const auto& q : basis) {
      const double dot = std::inner_product(v.begin(), v.end(), q.begin(), 0.0);
      for (std::size_t i = 0; i < dims; ++i) v[i] -= dot * q[i];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

// A typical residential day: overnight base, morning and evening peaks (kWh per half hour).
double base_shape(std::size_t slot) {
  const double h = static_cast<double>(slot) / 2.0;
  auto bump = [h](double at, double width, double height) {
    return height * std::exp(-0.5 * (h - at) * (h - at) / (width * width));
  };
  return 0.35 + bump(7.5, 1.2, 0.25) + bump(13.0, 2.0, 0.1) + bump(19.0, 1.8, 0.45);
}

}  // namespace

LabeledPoints planted_gaussians(int k, int per_cluster, int dims, double separation, std::uint64_t seed) {
  if (k < 1 || per_cluster < 1 || dims < k) throw ParameterError("planted_gaussians needs 1 <= k <= dims");
  Rng rng(seed);
  const auto basis = orthonormal_basis(static_cast<std::size_t>(k), static_cast<std::size_t>(dims), rng, false);
  LabeledPoints out;
  out.points = Matrix(static_cast<std::size_t>(k * per_cluster), static_cast<std::size_t>(dims));
  const double scale = separation / std::sqrt(2.0);
  std::size_t r = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_cluster; ++i, ++r) {
      for (std::size_t j = 0; j < static_cast<std::size_t>(dims); ++j) {
        out.points(r, j) = scale * basis[static_cast<std::size_t>(c)][j] + normal(rng);
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

MixtureFixture mixture_fixture(const MixtureOptions& o) {
  if (o.pure_clusters < 1 || o.mixed_clusters < 0 || o.mixed_clusters > o.pure_clusters) {
    throw ParameterError("mixture fixture needs at least as many pure clusters as mixed ones");
  }
  const double d = o.near_distance, e = o.split_distance, sep = o.separation;
  const double c = std::clamp(o.split_cosine, -1.0, 1.0);
  const double s = std::sqrt(1.0 - c * c);

  Rng rng(o.seed);
  const auto pure = static_cast<std::size_t>(o.pure_clusters);
  const auto mixed = static_cast<std::size_t>(o.mixed_clusters);
  const auto basis = orthonormal_basis(pure + 2 * mixed, kSlotCount, rng, true);
  // Pure centers form a regular simplex (sigma units). Each near sub-population
  // leaves its anchor cluster along a fresh direction w; the far one continues
  // from there at angle acos(split_cosine) to w, towards a direction shared by
  // all mixed clusters when `shared_anchor` is set.
  std::vector<std::vector<double>> center(pure + 2 * mixed, std::vector<double>(kSlotCount));
  for (std::size_t k = 0; k < pure; ++k) {
    for (std::size_t j = 0; j < kSlotCount; ++j) center[k][j] = sep / std::sqrt(2.0) * basis[k][j];
  }
  for (std::size_t m = 0; m < mixed; ++m) {
    const auto& w = basis[pure + 2 * m];
    const auto& u = basis[pure + 2 * m + 1];
    const auto& anchor = center[o.shared_anchor ? 0 : m];
    auto& near = center[pure + 2 * m];
    auto& far = center[pure + 2 * m + 1];
    for (std::size_t j = 0; j < kSlotCount; ++j) {
      near[j] = anchor[j] + d * w[j];
      far[j] = near[j] + e * (c * w[j] + s * u[j]);
    }
  }

  MixtureFixture out;
  auto emit = [&](const std::vector<double>& c, double spread, int cluster, int sub) {
    LoadProfile p;
    for (std::size_t j = 0; j < kSlotCount; ++j) {
      p.slots[j] = base_shape(j) + o.sigma_kwh * (c[j] + spread * normal(rng));
    }
    p.day_count = o.days;
    out.profiles.push_back(p);
    out.cluster.push_back(cluster);
    out.subpopulation.push_back(sub);
  };
  for (int c = 0; c < o.pure_clusters; ++c) {
    for (int i = 0; i < o.pure_size; ++i) emit(center[static_cast<std::size_t>(c)], o.pure_sigma, c, c);
  }
  for (int m = 0; m < o.mixed_clusters; ++m) {
    const int id = o.pure_clusters + m;
    out.mixed_clusters.push_back(id);
    const auto base = pure + 2 * static_cast<std::size_t>(m);
    for (int i = 0; i < o.far_size; ++i) emit(center[base + 1], o.sub_sigma, id, id);
    for (int i = 0; i < o.near_size; ++i) emit(center[base], o.sub_sigma, id, id + 100);
  }
  // Household ids in shuffled order so planted clusters are interleaved.
  std::vector<std::size_t> perm(out.profiles.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::string id = std::to_string(perm[i] + 1);
    out.profiles[i].household_id = "MAC" + std::string(6 - std::min<std::size_t>(6, id.size()), '0') + id;
  }
  return out;
}

std::string readings_csv(const std::vector<LoadProfile>& profiles, int days, double day_noise_kwh, std::uint64_t seed) {
  if (days < 1) throw ParameterError("need at least one day of readings");
  Rng rng(seed);
  std::string out = "LCLid,stdorToU,DateTime,KWH/hh (per half hour)\n";
  std::vector<double> eps(static_cast<std::size_t>(days));
  std::vector<std::vector<double>> day_values(static_cast<std::size_t>(days), std::vector<double>(kSlotCount));
  for (const auto& p : profiles) {
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      // Zero-mean day-to-day deviations, scaled so readings stay non-negative.
      const double scale = std::min(day_noise_kwh, std::max(0.0, p.slots[s]) / 6.0);
      double mean = 0.0;
      for (auto& x : eps) {
        x = scale * std::clamp(normal(rng), -2.5, 2.5);
        mean += x;
      }
      mean /= static_cast<double>(days);
      for (std::size_t dd = 0; dd < eps.size(); ++dd) {
        day_values[dd][s] = std::max(0.0, p.slots[s] + (eps[dd] - mean));
      }
    }
    for (int dd = 0; dd < days; ++dd) {
      const int day = 7 + dd;  // January 2013
      for (std::size_t s = 0; s < kSlotCount; ++s) {
        char ts[32];
        std::snprintf(ts, sizeof ts, "2013-01-%02d %02zu:%02d:00", day, s / 2, s % 2 == 0 ? 0 : 30);
        out += p.household_id;
        out += ",Std,";
        out += ts;
        out += ',';
        out += format_double(day_values[static_cast<std::size_t>(dd)][s]);
        out += '\n';
      }
    }
  }
  return out;
}

std::vector<LoadProfile> random_profiles(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const auto basis = orthonormal_basis(8, kSlotCount, rng, true);
  std::vector<LoadProfile> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& shape = basis[uniform_index(rng, basis.size())];
    const double level = 0.6 + 0.8 * uniform01(rng);
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      out[i].slots[s] = std::max(0.0, level * base_shape(s) + 0.3 * shape[s] + 0.02 * normal(rng));
    }
    std::string id = std::to_string(i + 1);
    out[i].household_id = "NEW" + std::string(id.size() < 7 ? 7 - id.size() : 0, '0') + id;
    out[i].day_count = 1;
  }
  return out;
}

}  // namespace loadseg
