#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace occworld::checks {

/// Worst finite-difference result of one named case over all its seeds.
struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  int worst_seed = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Gradient checks of every numerics primitive on randomized small shapes
/// (`seeds` draws each, 64-bit), the standard layers, and the end-to-end
/// tiny world model (4x4 base tokens, K=1) under its full training loss.
/// Case names are the primitive they exercise.
std::vector<GradCheckCase> run_gradcheck_suite(int seeds = 3, std::uint64_t base_seed = 0);

/// Index of the case with the largest error.
std::size_t worst_case(const std::vector<GradCheckCase>& cases);

}  // namespace occworld::checks
