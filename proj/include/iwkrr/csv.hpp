#pragma once

#include "iwkrr/types.hpp"

#include <filesystem>
#include <string>

namespace iwkrr {

/// Reads a data CSV with header `x1,...,xd[,y]`. A last column named `y` is
/// the target. Throws InputError with row/column context on ragged rows or
/// non-numeric cells; `require_target` rejects files without `y`.
SampleSet read_samples_csv(const std::filesystem::path& path, bool require_target = false);
SampleSet parse_samples_csv(const std::string& text, bool require_target = false,
                            const std::string& source = "<string>");

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);

/// Single-column weight file with header `w`, row-aligned with the training data.
Vector read_weights_csv(const std::filesystem::path& path);
void write_weights_csv(const std::filesystem::path& path, VectorRef w);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace iwkrr
