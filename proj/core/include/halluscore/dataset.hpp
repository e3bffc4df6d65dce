#pragma once

#include <cstdint>
#include <string>

#include "halluscore/types.hpp"

namespace halluscore {

// Reads a dataset file: UTF-8, one JSON object per line with keys id, input,
// response (required) and label, reference_answer, samples (optional).
// Unknown keys are preserved in Example::extras as raw JSON text.
Dataset load_dataset(const std::string& path);

// Writes the line-per-record form load_dataset reads. Loading the result
// yields field-identical examples.
void save_dataset(const Dataset& d, const std::string& path);

// Deterministic shuffle split. calibration gets round(calib_fraction * n)
// examples; both folds keep dataset order. Errors if either fold would be
// empty.
SplitAssignment split_dataset(const Dataset& d, double calib_fraction,
                              std::uint64_t seed);

// Stable identity of a split, recorded in fitted artifacts so that apply-time
// mismatches are detectable.
std::string split_id(const Dataset& d, const SplitAssignment& split,
                     double calib_fraction);

}  // namespace halluscore
