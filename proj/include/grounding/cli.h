#ifndef GROUNDING_CLI_H_
#define GROUNDING_CLI_H_

#include <iosfwd>

namespace grounding::cli {

inline constexpr const char *kEngineVersion = "1.0.0";
inline constexpr int kScenesFormatVersion = 1;

// Exit codes besides 0 and the generic failure 1.
inline constexpr int kExitMissingFile = 2;
inline constexpr int kExitBadConfig = 3;
inline constexpr int kExitInvariant = 4;

// Runs one invocation. Diagnostics go to `err` as a single line.
int Run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace grounding::cli

#endif  // GROUNDING_CLI_H_
