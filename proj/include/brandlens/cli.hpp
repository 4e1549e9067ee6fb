#pragma once

#include <atomic>
#include <ostream>

#include "brandlens/detection_pipeline.hpp"

namespace brandlens {

namespace exit_code {
inline constexpr int kOk = 0;  // also: detect verdict Genuine
inline constexpr int kFailure = 1;
inline constexpr int kUnreadableInput = 2;
inline constexpr int kPhishing = 3;
inline constexpr int kUnknown = 4;
inline constexpr int kInvalid = 5;
inline constexpr int kError = 6;
inline constexpr int kUsage = 64;
inline constexpr int kInterrupted = 130;
}  // namespace exit_code

int verdict_exit_code(VerdictOutcome outcome);

// Set from a signal handler; batch stops starting new work once it is true.
std::atomic<bool>& cli_stop_flag();

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace brandlens
