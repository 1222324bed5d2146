// Command-line driver: validate | run | report over experiment configs.
// Exit codes: 0 success, 1 validation failure, 2 partial results (a cap was
// hit), 3 I/O or internal failure.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "brw/config.hpp"
#include "brw/errors.hpp"
#include "brw/experiment.hpp"
#include "brw/io_util.hpp"
#include "brw/version.hpp"

namespace {

void print_load(const brw::LoadResult& res) {
    for (const auto& n : res.notices) std::printf("notice: %s\n", n.c_str());
    for (const auto& v : res.violations) std::printf("violation: %s\n", v.c_str());
}

// Replace every cap parameter (pop_cap, support_cap, level_cap) in the params
// tree, then refresh the effective config and its digest.
void apply_cap_override(brw::ExperimentConfig& cfg, std::uint64_t cap) {
    std::function<void(nlohmann::json&)> walk = [&](nlohmann::json& node) {
        if (!node.is_object()) return;
        for (auto& [k, v] : node.items()) {
            if (v.is_object())
                walk(v);
            else if (k == "pop_cap" || k == "support_cap" || k == "level_cap")
                v = cap;
        }
    };
    walk(cfg.params);
    cfg.effective["params"] = cfg.params;
    cfg.digest = brw::hex_digest(cfg.effective.dump());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching random walks on free products of finite groups"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(brw::kCodeVersion));

    std::string config_path, out_dir, report_dir;
    std::uint64_t seed = 0;
    int threads = 1;
    std::uint64_t cap_override = 0;
    bool seed_given = false, cap_given = false;

    auto* vcmd = app.add_subcommand("validate", "check a config and print all violations");
    vcmd->add_option("--config", config_path, "config file (JSON)")->required();

    auto* rcmd = app.add_subcommand("run", "run the configured experiment");
    rcmd->add_option("--config", config_path, "config file (JSON)")->required();
    rcmd->add_option("--out", out_dir, "output directory (overrides the config's own)");
    rcmd->add_option("--seed", seed, "master seed override")
        ->each([&](const std::string&) { seed_given = true; });
    rcmd->add_option("--threads", threads, "worker threads; affects speed only, never results");
    rcmd->add_option("--cap-override", cap_override, "replace every cap parameter")
        ->each([&](const std::string&) { cap_given = true; });

    auto* pcmd = app.add_subcommand("report", "render report.md from a result directory");
    pcmd->add_option("--out", report_dir, "result directory holding manifest.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (vcmd->parsed()) {
            auto res = brw::load_and_validate(config_path);
            print_load(res);
            if (res.ok)
                std::printf("ok: %s experiment, digest %s\n", res.config.experiment.c_str(),
                            res.config.digest.c_str());
            return res.ok ? 0 : 1;
        }

        if (rcmd->parsed()) {
            auto res = brw::load_and_validate(config_path);
            print_load(res);
            if (!res.ok) return 1;
            auto& cfg = res.config;
            if (seed_given) {
                cfg.master_seed = seed;
                cfg.effective["master_seed"] = seed;
                cfg.digest = brw::hex_digest(cfg.effective.dump());
            }
            if (cap_given) apply_cap_override(cfg, cap_override);

            auto out = brw::run_experiment(cfg, out_dir, threads);
            for (const auto& f : out.files) std::printf("wrote %s\n", f.c_str());
            for (const auto& c : out.caps_hit) std::printf("cap hit: %s\n", c.c_str());
            for (const auto& c : out.failed_cells) std::printf("cell failed: %s\n", c.c_str());
            if (out.exit_code == 0) std::printf("done\n");
            return out.exit_code;
        }

        auto ro = brw::build_report(report_dir);
        std::fputs(ro.text.c_str(), stdout);
        return ro.exit_code;
    } catch (const brw::ValidationError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const brw::MalformedInput& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const brw::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
}
