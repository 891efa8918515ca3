#pragma once

#include <stdexcept>
#include <string>

namespace iwkrr {

/// Invalid arguments, malformed files, or inconsistent configuration.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve that could not be resolved even after jitter escalation
/// and the pseudo-inverse fallback.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double final_jitter)
        : std::runtime_error(what), final_jitter_(final_jitter) {}

    double final_jitter() const noexcept { return final_jitter_; }

private:
    double final_jitter_;
};

namespace detail {
inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}
} // namespace detail

} // namespace iwkrr
