#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loadseg/ingest.hpp"
#include "loadseg/matrix.hpp"

namespace loadseg {

struct LabeledPoints {
  Matrix points;
  std::vector<int> labels;
};

/// `k` isotropic Gaussian clusters of `per_cluster` points with unit sigma
/// whose centers form a regular simplex with edge `separation`.
LabeledPoints planted_gaussians(int k, int per_cluster, int dims, double separation, std::uint64_t seed);

/// Profile-space fixture: pure clusters plus mixed clusters. Mixed cluster m
/// is a "near" sub-population at `near_distance` from pure cluster m and a
/// "far" one at `split_distance` beyond it. Distances are in units of sigma.
struct MixtureOptions {
  int pure_clusters = 5;
  int pure_size = 126;
  int mixed_clusters = 2;
  int far_size = 20;
  int near_size = 15;
  double separation = 14.0;      // between pure centers
  double near_distance = 10.0;   // near sub-population to its pure cluster
  double split_distance = 11.0;  // near to far sub-population
  double split_cosine = 0.6;     // cosine between the two legs
  double pure_sigma = 1.0;       // spread of each pure cluster
  double sub_sigma = 0.7;        // spread of each sub-population
  bool shared_anchor = false;    // all near sub-populations next to pure cluster 0
  double sigma_kwh = 0.04;       // one sigma in kWh per slot
  double day_noise_kwh = 0.05;
  int days = 4;
  std::uint64_t seed = 7;
};

struct MixtureFixture {
  std::vector<LoadProfile> profiles;
  std::vector<int> cluster;         // planted cluster per profile (mixed ones last)
  std::vector<int> subpopulation;   // planted cluster, mixed split into two (far = c, near = c + 100)
  std::vector<int> mixed_clusters;  // planted ids of the mixed clusters
};

MixtureFixture mixture_fixture(const MixtureOptions& options = {});

/// Half-hourly readings in the London layout
/// (LCLid,stdorToU,DateTime,KWH/hh (per half hour)). The readings of each
/// household average back to its profile.
std::string readings_csv(const std::vector<LoadProfile>& profiles, int days, double day_noise_kwh, std::uint64_t seed);

/// Households drawn around a few typical daily shapes, for throughput runs.
std::vector<LoadProfile> random_profiles(std::size_t count, std::uint64_t seed);

}  // namespace loadseg
