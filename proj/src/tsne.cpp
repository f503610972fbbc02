#include <algorithm>
#include <cmath>
#include <limits>

#include "loadseg/consensus.hpp"
#include "loadseg/error.hpp"
#include "loadseg/random.hpp"

namespace loadseg {

namespace {

// Row-conditional affinities with a per-point precision found by bisection so
// that the entropy of P(.|i) equals log(perplexity).
std::vector<double> conditional_affinities(const Matrix& points, double perplexity) {
  const std::size_t n = points.rows();
  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = squared_distance(points.row(i), points.row(j));
      d2[i * n + j] = v;
      d2[j * n + i] = v;
    }
  }
  const double target = std::log(perplexity);
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, d2[i * n + j]);
    }
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        // shift by the nearest distance for numerical range; cancels on normalization
        const double e = std::exp(-beta * (d2[i * n + j] - dmin));
        p[i * n + j] = e;
        sum += e;
        weighted += e * (d2[i * n + j] - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-10) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
  }
  return p;
}

double kl_divergence(const std::vector<double>& p, const Matrix& y) {
  const std::size_t n = y.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) z += 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p[i * n + j];
      const double qij = std::max(1.0 / (1.0 + squared_distance(y.row(i), y.row(j))) / z, 1e-300);
      if (pij > 0.0) kl += pij * std::log(pij / qij);
    }
  }
  return kl;
}

}  // namespace

TsneResult tsne_embed(const Matrix& points, const TsneOptions& o) {
  const std::size_t n = points.rows();
  if (!(o.perplexity > 0.0) || static_cast<double>(n) <= 3.0 * o.perplexity) {
    throw ParameterError("t-SNE perplexity " + std::to_string(o.perplexity) + " infeasible for " + std::to_string(n) +
                         " points (need n > 3 * perplexity)");
  }
  if (o.iterations < 1) throw ParameterError("t-SNE needs at least one iteration");

  const std::vector<double> cond = conditional_affinities(points, o.perplexity);
  std::vector<double> p(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p[i * n + j] = i == j ? 0.0 : std::max((cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
    }
  }

  Rng rng(o.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  TsneResult res;
  Matrix y(n, 2);
  for (double& v : y.data()) v = init(rng);
  Matrix update(n, 2, 0.0), gains(n, 2, 1.0), grad(n, 2);
  const double lr = o.learning_rate > 0.0 ? o.learning_rate : static_cast<double>(n) / 12.0;
  std::vector<double> num(n * n);

  for (int iter = 0; iter < o.iterations; ++iter) {
    const bool early = iter < o.exaggeration_iterations;
    const double exag = early ? o.exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
        num[i * n + j] = v;
        num[j * n + i] = v;
        z += 2.0 * v;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num[i * n + j] / z;
        const double mult = (exag * p[i * n + j] - q) * num[i * n + j];
        gx += mult * (y(i, 0) - y(j, 0));
        gy += mult * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
    for (std::size_t k = 0; k < n * 2; ++k) {
      double& g = gains.data()[k];
      const double gr = grad.data()[k];
      double& u = update.data()[k];
      g = (gr > 0.0) != (u > 0.0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      u = momentum * u - lr * g * gr;
      y.data()[k] += u;
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
    const int done = iter + 1;
    if (done == o.exaggeration_iterations || done % 50 == 0 || done == o.iterations) {
      const double kl = kl_divergence(p, y);
      res.kl_trace.emplace_back(done, kl);
      if (done == o.exaggeration_iterations) res.kl_after_exaggeration = kl;
    }
  }
  res.kl_final = res.kl_trace.back().second;
  if (o.exaggeration_iterations >= o.iterations || o.exaggeration_iterations <= 0) {
    res.kl_after_exaggeration = res.kl_trace.front().second;
  }
  res.embedding = std::move(y);
  return res;
}

}  // namespace loadseg
