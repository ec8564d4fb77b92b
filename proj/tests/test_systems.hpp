#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "icac/model.hpp"

namespace icac::test {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Memoryless scalar AWGN channel with unit noise.
inline LqgSystem awgn() {
  IsiChannel ch;
  ch.F = scalar(0);
  ch.G = scalar(0);
  ch.H = scalar(0);
  ch.J = scalar(1);
  ch.W = scalar(0);
  ch.V = scalar(1);
  ch.L = scalar(0);
  return from_isi_channel(ch);
}

// Two parallel AWGN subchannels with gains 1 and 2.
inline LqgSystem parallel_awgn() {
  IsiChannel ch;
  ch.F = Matrix::Zero(1, 1);
  ch.G = Matrix::Zero(1, 2);
  ch.H = Matrix::Zero(2, 1);
  ch.J = Matrix::Zero(2, 2);
  ch.J.diagonal() << 1, 2;
  ch.W = Matrix::Zero(1, 1);
  ch.V = Matrix::Identity(2, 2);
  ch.L = Matrix::Zero(1, 2);
  return from_isi_channel(ch);
}

// Scalar channel with first-order colored noise and no ISI.
inline LqgSystem colored_noise() {
  IsiChannel ch;
  ch.F = scalar(0.5);
  ch.G = scalar(0);
  ch.H = scalar(1);
  ch.J = scalar(1);
  ch.W = scalar(1);
  ch.V = scalar(1);
  ch.L = scalar(0);
  return from_isi_channel(ch);
}

// Unstable two-state plant with one scalar input and output.
inline LqgSystem example_plant(double g, double j) {
  LqgSystem s;
  s.F = Matrix::Zero(2, 2);
  s.F.diagonal() << 1.4, 0.4;
  s.G = g * Matrix::Ones(2, 1);
  s.H = Matrix::Ones(1, 2);
  s.J = scalar(j);
  s.W = Matrix::Identity(2, 2);
  s.V = scalar(1);
  s.L = Matrix::Zero(2, 1);
  s.Q = Matrix::Identity(2, 2);
  s.R = scalar(1);
  return s;
}

// Random plants with r ≤ 3 states, p ≤ 2 inputs, l ≤ 2 outputs, spectral
// radius in [0.3, 1.3), feedthrough zero 30% of the time, Q = I, R = I.
class RandomPlants {
 public:
  explicit RandomPlants(unsigned seed) : rng_(seed) {}

  LqgSystem next() {
    std::uniform_int_distribution<int> dim(1, 3), small(1, 2);
    const int r = dim(rng_), p = small(rng_), l = small(rng_);
    LqgSystem s;
    s.F = gaussian(r, r);
    s.F *= (0.3 + uniform_(rng_)) / spectral_radius(s.F);
    s.G = gaussian(r, p);
    s.H = gaussian(l, r);
    s.J = uniform_(rng_) < 0.3 ? Matrix(Matrix::Zero(l, p)) : gaussian(l, p);
    const Matrix a = gaussian(r, r);
    s.W = 0.5 * a * a.transpose() + 0.05 * Matrix::Identity(r, r);
    const Matrix b = gaussian(l, l);
    s.V = 0.5 * b * b.transpose() + 0.2 * Matrix::Identity(l, l);
    s.L = Matrix::Zero(r, l);
    s.Q = Matrix::Identity(r, r);
    s.R = Matrix::Identity(p, p);
    return s;
  }

  double uniform() { return uniform_(rng_); }

 private:
  Matrix gaussian(int rows, int cols) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = normal_(rng_);
    }
    return m;
  }

  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Hand-derived water-filling for Σ ½log(1 + gᵢ²πᵢ) under Σπᵢ ≤ p with unit
// noise: πᵢ = max(0, ν − 1/gᵢ²).
inline double water_filling(const std::vector<double>& gains, double p) {
  std::vector<double> floors;
  for (double g : gains) floors.push_back(1.0 / (g * g));
  std::sort(floors.begin(), floors.end());
  double level = 0.0;
  for (std::size_t k = floors.size(); k >= 1; --k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += floors[i];
    level = (p + sum) / static_cast<double>(k);
    if (level > floors[k - 1]) break;
  }
  double c = 0.0;
  for (double f : floors) c += 0.5 * std::log(std::max(1.0, level / f));
  return c;
}

}  // namespace icac::test
