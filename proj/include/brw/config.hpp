#pragma once

// Experiment configuration: a single JSON document describing the group, the
// step law, the offspring law, and one experiment's parameters. Loading
// produces either a fully validated config plus its effective (defaults made
// explicit) form, or the complete list of violations.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/brw_process.hpp"
#include "brw/group.hpp"
#include "brw/walk.hpp"

namespace brw {

inline const std::vector<std::string> kExperiments = {
    "validate",       "rw-sim",       "rw-exact",         "ldp-curve",
    "speed-experiment", "multitype-certify", "exit-rate"};

struct ExperimentConfig {
    std::string experiment;
    FreeProduct G;
    StepLaw law;
    bool has_offspring = false;
    OffspringLaw pi;
    nlohmann::json params;    // experiment-specific block, defaults applied
    std::uint64_t master_seed = 0;
    std::string out_dir;      // empty when the file gives none

    nlohmann::json effective; // the full config with every default explicit
    std::string digest;       // hex FNV-1a of effective.dump(); key order free
};

struct LoadResult {
    bool ok = false;
    ExperimentConfig config;
    std::vector<std::string> violations;
    std::vector<std::string> notices; // informational, e.g. symmetrization
};

// Parse + validate from text; `origin` names the source in messages.
LoadResult parse_and_validate(const std::string& text, const std::string& origin);

// Reads the file (IoError if unreadable) and delegates to parse_and_validate.
LoadResult load_and_validate(const std::string& path);

} // namespace brw
