#pragma once

#include <stdexcept>
#include <string>

namespace warpres {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or resolutions disagree with the model configuration.
struct ShapeError : Error {
    using Error::Error;
};

/// A binary or text file does not follow its declared layout.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Missing or ill-typed configuration entry. `key()` is the dotted path.
struct ConfigError : Error {
    ConfigError(std::string key, const std::string& what)
        : Error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// A loss became non-finite during optimization.
struct DivergenceError : Error {
    using Error::Error;
};

} // namespace warpres
