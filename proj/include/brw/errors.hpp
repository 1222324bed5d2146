#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace brw {

// Input that breaks a structural precondition (out-of-range letter, word not
// reduced, table of wrong shape). Distinct from ValidationError so callers can
// tell "bad data fed to an op" from "bad config".
struct MalformedInput : std::runtime_error {
    explicit MalformedInput(const std::string& what) : std::runtime_error(what) {}
};

// Config-level failure. Carries every violation found, each with a witness,
// so a bad config is reported in one pass.
struct ValidationError : std::runtime_error {
    std::vector<std::string> violations;

    explicit ValidationError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}

    static std::string join(const std::vector<std::string>& v) {
        std::string s = "validation failed:";
        for (const auto& x : v) {
            s += "\n  - ";
            s += x;
        }
        return s;
    }
};

// A guard cap was exceeded. count_reached is the size at the moment the cap
// tripped (callers report it; they may retry with a larger cap).
struct CapExceeded : std::runtime_error {
    std::uint64_t count_reached;
    std::string where;

    CapExceeded(std::string where_, std::uint64_t count)
        : std::runtime_error(where_ + ": cap exceeded at count " + std::to_string(count)),
          count_reached(count),
          where(std::move(where_)) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace brw
