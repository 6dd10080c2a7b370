#pragma once

namespace gla::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

// Entry point for the glanet tool: synth-data, train, translate, eval, inspect-attention.
int run(int argc, char** argv);

}  // namespace gla::cli
