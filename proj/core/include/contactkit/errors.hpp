#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace contactkit {

/// Invalid parameters or malformed configuration.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Query time exceeds the horizon of the event log.
struct horizon_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Space-time query with source time after target time.
struct ordering_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated (e.g. origin not in the initial set).
struct precondition_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Replica generation hit the attempt cap before reaching the accepted target.
/// Carries the diagnostics needed to report the failure.
struct acceptance_cap_error : std::runtime_error {
  acceptance_cap_error(std::string msg, std::uint64_t attempts_, std::uint64_t accepted_,
                       std::uint64_t rejected_, std::uint64_t ambiguous_)
      : std::runtime_error(std::move(msg)),
        attempts(attempts_),
        accepted(accepted_),
        rejected(rejected_),
        ambiguous(ambiguous_) {}

  std::uint64_t attempts;
  std::uint64_t accepted;
  std::uint64_t rejected;
  std::uint64_t ambiguous;

  double rejection_rate() const {
    return attempts == 0 ? 0.0 : 1.0 - static_cast<double>(accepted) / static_cast<double>(attempts);
  }
};

/// Tail-exponent regression had no usable grid points.
struct fit_undefined_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace contactkit
