#pragma once

namespace s2h::cli {

// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitEnvironment = 4;

// Entry point of the `s2h` tool; returns the process exit status.
int run(int argc, const char* const* argv);

}  // namespace s2h::cli
