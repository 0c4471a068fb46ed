#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cmi {

// Invalid hyperparameters or inconsistent shapes. Raised before any compute.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bad data handed to an operation (non-finite values, out-of-range sizes).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Divergence or overflow during training/evaluation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, std::optional<std::size_t> epoch = std::nullopt)
        : std::runtime_error(epoch ? what + " (epoch " + std::to_string(*epoch) + ")" : what),
          epoch_(epoch) {}

    // 1-based epoch in which training diverged, when raised by the trainer.
    std::optional<std::size_t> epoch() const noexcept { return epoch_; }

private:
    std::optional<std::size_t> epoch_;
};

}  // namespace cmi
