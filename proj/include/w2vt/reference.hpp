#pragma once

// Serial reference implementations. They are deliberately plain and are kept
// so the OpenMP kernels can be checked against them (tests) and timed against
// them (bench). Not used on any production path.

#include <vector>

#include "w2vt/corpus.hpp"
#include "w2vt/hyperparams.hpp"
#include "w2vt/trainer.hpp"

namespace w2vt::reference {

/// Single-threaded training with the same random stream layout as `w2vt::train`
/// at workers == 1. Returns the final model and per-epoch mean losses.
EmbeddingModel train_serial(const Corpus& corpus, const HyperParams& hp, std::uint64_t seed,
                            std::vector<double>* epoch_loss = nullptr);

/// Full cosine ranking of every other row against `query`, computed from the
/// raw (unnormalised) rows in double precision. Ties by ascending id.
std::vector<TokenId> brute_force_top_k(const std::vector<float>& matrix, int dim, TokenId query,
                                       std::size_t k);

}  // namespace w2vt::reference
