#pragma once

// Experiment orchestration: runs one configured experiment, persists results
// as CSV/JSON artifacts plus a manifest, and renders a markdown report from a
// result directory. Result files are a pure function of (config, master
// seed); the manifest is the only file carrying wall-clock metadata.

#include <string>
#include <vector>

#include "brw/config.hpp"

namespace brw {

struct RunOutcome {
    int exit_code = 0; // 0 ok, 2 caps hit (partial results), 3 I/O failure
    std::vector<std::string> caps_hit;     // human-readable, per module
    std::vector<std::string> failed_cells; // cell id + error; run continued
    std::vector<std::string> files;        // result files written, in order
};

// `out_dir` overrides the config's own `out`; threads affects speed only.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads);

struct ReportOutcome {
    int exit_code = 0; // 0 ok, 3 missing manifest
    std::string text;  // markdown; also written to <dir>/report.md when ok
};

// Formats the artifacts already on disk; never recomputes a statistic.
// Idempotent: depends only on the result files.
ReportOutcome build_report(const std::string& dir);

} // namespace brw
