#pragma once

#include <string>
#include <string_view>

#include "w2vt/common.hpp"

namespace w2vt {

enum class ModelType { kSkipgram, kCbow };

std::string_view model_name(ModelType m);  // "sg" / "cbow"
ModelType parse_model(std::string_view name);

/// One point of the Word2vec search space. Defaults are the usual
/// word2vec.c / gensim values used as the baseline everywhere.
struct HyperParams {
  ModelType model = ModelType::kSkipgram;
  int dim = 100;            // d
  int window = 5;           // L, maximum window
  double ns_exponent = 0.75;  // alpha
  double learning_rate = 0.025;  // lambda
  int negatives = 5;        // N
  int epochs = 5;           // n
  double t_ratio = 1e-5;    // downsampling ratio
  int min_count = 1;

  /// Throws ValidationError naming the first offending field.
  void validate() const;

  bool operator==(const HyperParams&) const = default;
};

inline HyperParams default_hyperparams(ModelType m = ModelType::kSkipgram) {
  HyperParams hp;
  hp.model = m;
  return hp;
}

std::string to_string(const HyperParams& hp);

}  // namespace w2vt
