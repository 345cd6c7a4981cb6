#pragma once

#include "blowup/solver.hpp"

#include <string>

namespace blowup {

/// Layout: the line "BLOWUP-TRAJECTORY 1", one line of JSON header (model, grid, stride,
/// record count, solver config, initial data, stage corrections), then per record the time s
/// followed by the field samples, all as little-endian IEEE-754 doubles.
void save_trajectory(const std::string& path, const Trajectory& tr);
Trajectory load_trajectory(const std::string& path);

} // namespace blowup
