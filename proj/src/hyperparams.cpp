#include "w2vt/hyperparams.hpp"

#include <cmath>
#include <sstream>

namespace w2vt {

std::string_view model_name(ModelType m) { return m == ModelType::kSkipgram ? "sg" : "cbow"; }

ModelType parse_model(std::string_view name) {
  if (name == "sg" || name == "skipgram") return ModelType::kSkipgram;
  if (name == "cbow") return ModelType::kCbow;
  throw ValidationError("unknown model '" + std::string(name) + "' (expected sg or cbow)");
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid hyperparameter: " + what); };
  if (dim < 1) fail("d must be >= 1");
  if (window < 1) fail("L must be >= 1");
  if (negatives < 1) fail("N must be >= 1");
  if (epochs < 1) fail("n must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("lambda must be > 0");
  if (!(ns_exponent >= -1.0 && ns_exponent <= 1.0)) fail("alpha must be in [-1, 1]");
  if (!(t_ratio >= 0.0)) fail("downsampling ratio must be >= 0");
  if (min_count < 1) fail("min_count must be >= 1");
}

std::string to_string(const HyperParams& hp) {
  std::ostringstream os;
  os << "m=" << model_name(hp.model) << " d=" << hp.dim << " L=" << hp.window
     << " alpha=" << hp.ns_exponent << " lambda=" << hp.learning_rate << " N=" << hp.negatives
     << " n=" << hp.epochs;
  return os.str();
}

}  // namespace w2vt
