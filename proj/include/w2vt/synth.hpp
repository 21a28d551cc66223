#pragma once

#include <cstdint>

#include "w2vt/corpus.hpp"

namespace w2vt {

/// Items are partitioned into equal-size clusters. Each sequence belongs to a
/// user with two home clusters; consecutive events stay in the current cluster
/// with probability `stay`, switch to the other home cluster otherwise, and are
/// replaced by a globally popular noise item with probability `noise`.
struct PlantedConfig {
  int clusters = 200;
  int cluster_size = 10;
  int sequences = 4000;
  int min_length = 4;
  int max_length = 16;
  double stay = 0.85;
  double noise = 0.15;
  double zipf = 1.0;  // popularity skew of the noise items and within clusters
  std::uint64_t seed = 1;
};

Corpus planted_corpus(const PlantedConfig& cfg);

}  // namespace w2vt
