#pragma once

#include <stdexcept>
#include <string>

namespace ktube {

struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotOnBoundary : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotInterior : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StuckPoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& field, const std::string& detail = "")
        : std::runtime_error(detail.empty() ? "config error: " + field
                                            : "config error: " + field + ": " + detail),
          field(field) {}
    std::string field;
};

}  // namespace ktube
