#include "falldet/har/policy.hpp"

#include <algorithm>

#include "falldet/error.hpp"

namespace falldet::har {

void DecisionPolicy::validate() const {
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    throw ConfigError("policy threshold must lie in (0, 1)");
  }
  if (consecutive_k < 1) throw ConfigError("policy k must be >= 1");
  if (fall_class < 0) throw ConfigError("policy fall class must be a valid class id");
}

FallDebouncer::FallDebouncer(const DecisionPolicy& policy)
    : threshold_(policy.confidence_threshold), k_(policy.consecutive_k) {
  policy.validate();
}

bool FallDebouncer::feed(double fall_probability) {
  if (fall_probability >= threshold_) {
    ++run_;
  } else {
    run_ = 0;
    fired_ = false;
  }
  if (run_ >= k_ && !fired_) {
    fired_ = true;
    return true;
  }
  return false;
}

void FallDebouncer::reset() noexcept {
  run_ = 0;
  fired_ = false;
}

std::vector<StreamRecord> apply_policy(std::span<const std::vector<double>> probabilities,
                                       const DecisionPolicy& policy) {
  FallDebouncer debounce(policy);
  std::vector<StreamRecord> out;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& p = probabilities[i];
    if (static_cast<std::size_t>(policy.fall_class) >= p.size()) throw ConfigError("fall class outside probability vector");
    StreamRecord r;
    r.window_index = i;
    r.predicted_class = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    r.confidence = p[static_cast<std::size_t>(r.predicted_class)];
    r.fall_probability = p[static_cast<std::size_t>(policy.fall_class)];
    out.push_back(r);
    if (debounce.feed(r.fall_probability)) {
      r.kind = StreamRecord::Kind::kFall;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<StreamRecord> predict_stream(const HarModel& model, std::span<const csi::AmplitudeWindow> windows,
                                         const DecisionPolicy& policy) {
  const auto probs = model.predict_proba(windows);
  return apply_policy(probs, policy);
}

}  // namespace falldet::har
