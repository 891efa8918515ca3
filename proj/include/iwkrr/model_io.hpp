#pragma once

#include "iwkrr/estimators.hpp"

#include <filesystem>
#include <string>

namespace iwkrr {

/// Flat JSON record: {"kind", "kernel", "gamma", "lambda", "centers", "coefficients"}.
/// Doubles are printed with round-trip precision, so a reloaded model predicts
/// identically.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

} // namespace iwkrr
