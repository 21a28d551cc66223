#include "w2vt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "w2vt/sampler.hpp"

namespace w2vt {

Corpus planted_corpus(const PlantedConfig& cfg) {
  if (cfg.clusters < 2 || cfg.cluster_size < 1 || cfg.sequences < 1 || cfg.min_length < 1 ||
      cfg.max_length < cfg.min_length) {
    throw ValidationError("invalid planted corpus configuration");
  }
  const int items = cfg.clusters * cfg.cluster_size;
  std::vector<double> global(static_cast<std::size_t>(items));
  for (int i = 0; i < items; ++i) global[static_cast<std::size_t>(i)] = std::pow(i + 1.0, -cfg.zipf);
  std::vector<double> local(static_cast<std::size_t>(cfg.cluster_size));
  for (int i = 0; i < cfg.cluster_size; ++i) local[static_cast<std::size_t>(i)] = std::pow(i + 1.0, -cfg.zipf);
  const AliasTable noise_items(global);
  const AliasTable within(local);

  // Item ids are scattered so cluster membership does not follow popularity rank.
  std::vector<int> label(static_cast<std::size_t>(items));
  std::iota(label.begin(), label.end(), 0);
  Rng rng = make_rng(cfg.seed, 0x5e17);
  std::shuffle(label.begin(), label.end(), rng);

  std::uniform_int_distribution<int> pick_cluster(0, cfg.clusters - 1);
  std::uniform_int_distribution<int> pick_len(cfg.min_length, cfg.max_length);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<std::string>> seqs(static_cast<std::size_t>(cfg.sequences));
  for (auto& seq : seqs) {
    const int home[2] = {pick_cluster(rng), pick_cluster(rng)};
    int cur = 0;
    const int len = pick_len(rng);
    seq.reserve(static_cast<std::size_t>(len));
    for (int e = 0; e < len; ++e) {
      int item;
      if (unit(rng) < cfg.noise) {
        item = static_cast<int>(noise_items.draw(rng));
      } else {
        if (e > 0 && unit(rng) >= cfg.stay) cur = 1 - cur;
        item = home[cur] * cfg.cluster_size + static_cast<int>(within.draw(rng));
      }
      seq.push_back("i" + std::to_string(label[static_cast<std::size_t>(item)]));
    }
  }
  return Corpus::from_tokens(seqs, {}, 1);
}

}  // namespace w2vt
