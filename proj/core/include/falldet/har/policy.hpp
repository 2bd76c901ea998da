#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "falldet/csi/window.hpp"
#include "falldet/har/model.hpp"

namespace falldet::har {

struct DecisionPolicy {
  int fall_class = 0;
  double confidence_threshold = 0.8;
  std::size_t consecutive_k = 3;

  void validate() const;
};

/// Window-to-alarm debounce: fires once when k successive windows reach
/// the threshold, and re-arms after a window below it.
class FallDebouncer {
 public:
  explicit FallDebouncer(const DecisionPolicy& policy);

  /// Returns true when this window completes a new episode.
  bool feed(double fall_probability);
  void reset() noexcept;
  std::size_t run_length() const noexcept { return run_; }

 private:
  double threshold_;
  std::size_t k_;
  std::size_t run_ = 0;
  bool fired_ = false;
};

struct StreamRecord {
  enum class Kind { kPrediction, kFall };
  Kind kind = Kind::kPrediction;
  std::size_t window_index = 0;  // zero-based position in the stream
  int predicted_class = 0;
  double confidence = 0.0;        // probability of predicted_class
  double fall_probability = 0.0;
};

/// Every window yields a PREDICTION record; a FALL record follows the
/// prediction of the window that completes an episode.
std::vector<StreamRecord> apply_policy(std::span<const std::vector<double>> probabilities,
                                       const DecisionPolicy& policy);

std::vector<StreamRecord> predict_stream(const HarModel& model, std::span<const csi::AmplitudeWindow> windows,
                                         const DecisionPolicy& policy);

}  // namespace falldet::har
