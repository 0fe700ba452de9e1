#pragma once

#include <random>
#include <vector>

#include "upiv/datagen.hpp"
#include "upiv/rng.hpp"
#include "upiv/types.hpp"

namespace testing {

using upiv::Index;
using upiv::Matrix;
using upiv::Vector;

inline Matrix gaussian(Index rows, Index cols, upiv::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

inline std::vector<int> random_labels(Index n, int m, upiv::Rng& rng) {
  std::uniform_int_distribution<int> env(0, m - 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = env(rng);
  return labels;
}

inline std::vector<int> balanced_labels(int m, int per_env) {
  std::vector<int> labels;
  for (int e = 0; e < m; ++e) {
    for (int k = 0; k < per_env; ++k) labels.push_back(e);
  }
  return labels;
}

inline upiv::Generated small_categorical(std::uint64_t seed, int m = 20, int d = 2, int r = 10) {
  upiv::GeneratorSpec spec = upiv::GeneratorSpec::preset(upiv::Setting::S2);
  spec.m = m;
  spec.d = d;
  spec.s_star = d;
  spec.r = spec.r_tilde = r;
  spec.seed = seed;
  return upiv::generate(spec);
}

inline upiv::Generated small_continuous(std::uint64_t seed, int m = 5, int d = 2, int r = 200) {
  upiv::GeneratorSpec spec = upiv::GeneratorSpec::preset(upiv::Setting::S2, upiv::GeneratorKind::Continuous);
  spec.m = m;
  spec.d = d;
  spec.s_star = d;
  spec.r = spec.r_tilde = r;
  spec.seed = seed;
  return upiv::generate(spec);
}

}  // namespace testing
