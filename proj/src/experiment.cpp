#include "brw/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "brw/errors.hpp"
#include "brw/io_util.hpp"
#include "brw/ldp.hpp"
#include "brw/multitype.hpp"
#include "brw/parallel.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"
#include "brw/version.hpp"

namespace brw {

using nlohmann::json;

namespace {

std::string path_join(const std::string& dir, const std::string& name) {
    return dir + "/" + name;
}

json j_interval(const Interval& iv) { return json{{"lo", iv.lo}, {"hi", iv.hi}}; }

struct Runner {
    const ExperimentConfig& cfg;
    std::string dir;
    int threads = 1;
    RunOutcome out;

    // One independent unit of work: failures are recorded and the run moves
    // on. I/O failures abort the whole run instead.
    void cell(const std::string& name, const std::function<void()>& fn) {
        try {
            fn();
        } catch (const IoError&) {
            throw;
        } catch (const CapExceeded& e) {
            out.caps_hit.push_back(name + ": " + e.what());
            out.failed_cells.push_back(name + ": " + e.what());
        } catch (const std::exception& e) {
            out.failed_cells.push_back(name + ": " + e.what());
        }
    }

    void save_json(const std::string& name, json j) {
        j["schema"] = kSchemaVersion;
        write_text_file(path_join(dir, name), j.dump(2) + "\n");
        out.files.push_back(name);
    }

    void save_csv(const std::string& name, const CsvTable& t) {
        t.save(path_join(dir, name));
        out.files.push_back(name);
    }
};

// ---- rw-sim ----

std::map<long, std::uint64_t> sample_length_hist(const FreeProduct& G, const StepLaw& law, long n,
                                                 std::uint64_t replicas, std::uint64_t master,
                                                 const std::string& tag, int threads) {
    const std::uint64_t chunk = 4096;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    std::vector<std::map<long, std::uint64_t>> parts(jobs);
    parallel_for(jobs, threads, [&](std::uint64_t j) {
        std::map<long, std::uint64_t> h;
        WalkState ws(G);
        std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
        for (std::uint64_t rep = lo; rep < hi; ++rep) {
            Xoshiro256pp rng(stream_seed(master, tag, rep));
            ws.reset();
            for (long k = 0; k < n; ++k) ws.step(sample_step(law, rng));
            ++h[ws.len];
        }
        parts[j] = std::move(h);
    });
    std::map<long, std::uint64_t> hist;
    for (const auto& part : parts)
        for (const auto& [len, c] : part) hist[len] += c;
    return hist;
}

void run_rw_sim(Runner& R) {
    const long n = R.cfg.params.at("n").get<long>();
    const auto replicas = R.cfg.params.at("replicas").get<std::uint64_t>();

    R.cell("drift", [&] {
        auto d = estimate_drift(R.cfg.G, R.cfg.law, n, replicas, R.cfg.master_seed, R.threads,
                                std::min<long>(10, n));
        json j;
        j["n"] = d.n;
        j["replicas"] = d.replicas;
        j["windowed_mean"] = d.mean;
        j["windowed_se"] = d.se;
        j["naive_mean"] = d.naive_mean;
        j["naive_se"] = d.naive_se;
        j["exact_ratio"] = d.exact_ratio;
        R.save_json("drift.json", j);
    });

    R.cell("hist", [&] {
        auto hist = sample_length_hist(R.cfg.G, R.cfg.law, n, replicas, R.cfg.master_seed,
                                       "ysim|n=" + std::to_string(n), R.threads);
        CsvTable t({"len", "count", "freq"});
        for (const auto& [len, c] : hist)
            t.row({std::to_string(len), std::to_string(c),
                   g17(double(c) / double(replicas))});
        R.save_csv("ysim_hist.csv", t);

        json ps;
        ps["title"] = "walk length distribution at n = " + std::to_string(n);
        ps["x_label"] = "len";
        ps["y_label"] = "freq";
        ps["series"] =
            json::array({json{{"file", "ysim_hist.csv"}, {"x", "len"}, {"y", "freq"}, {"label", "empirical"}}});
        ps["reference_lines"] = json::array();
        R.save_json("plotspec_ysim.json", ps);
    });
}

// ---- rw-exact ----

void run_rw_exact(Runner& R) {
    const long n = R.cfg.params.at("n").get<long>();
    const auto cap = R.cfg.params.at("support_cap").get<std::uint64_t>();
    R.cell("exact", [&] {
        auto d = exact_distribution(R.cfg.G, R.cfg.law, n, cap);
        auto pmf = length_pmf(R.cfg.G, d);
        CsvTable t({"len", "prob"});
        Neumaier mean;
        for (const auto& [len, p] : pmf) {
            t.row({std::to_string(len), g17(p)});
            mean.add(double(len) * p);
        }
        R.save_csv("exact_pmf.csv", t);
        json j;
        j["n"] = n;
        j["support_words"] = d.support.size();
        j["mean_len"] = mean.get();
        j["return_mass"] = pmf.count(0) ? pmf.at(0) : 0.0;
        R.save_json("exact.json", j);
    });
}

// ---- shared LDP pipeline ----

struct LdpArtifacts {
    SpectralEstimate spectral;
    LambdaGrid grid;
    RateFunction rate;
    DriftEstimate drift;
    RatePropertyReport props;
    double grid_argmin = 0.0; // rate-function argmin before the drift overwrite
    double r_hat = 0.0;
};

LdpArtifacts run_ldp_pipeline(const ExperimentConfig& cfg, const json& q, int threads) {
    LdpArtifacts A;
    A.spectral = estimate_spectral_radius(cfg.G, cfg.law, q.at("spectral_n_max").get<long>(),
                                          q.at("support_cap").get<std::uint64_t>());
    A.r_hat = A.spectral.estimate;

    LambdaOptions opts;
    opts.t_min = q.at("t_min").get<double>();
    opts.t_max = q.at("t_max").get<double>();
    opts.dt = q.at("dt").get<double>();
    opts.exact_ns = q.at("exact_ns").get<std::vector<long>>();
    opts.mc_ns = q.at("mc_ns").get<std::vector<long>>();
    opts.mc_replicas = q.at("mc_replicas").get<std::uint64_t>();
    opts.support_cap = q.at("support_cap").get<std::uint64_t>();
    opts.threads = threads;
    A.grid = compute_lambda(cfg.G, cfg.law, opts, cfg.master_seed);
    lambda_limit(A.grid, std::log(A.r_hat));

    double xmax = q.at("x_max").get<double>();
    if (xmax <= 0.0) xmax = double(cfg.law.K);
    const double dx = q.at("dx").get<double>();
    std::vector<double> xg;
    for (long i = 0;; ++i) {
        double x = double(i) * dx;
        if (x > xmax + 1e-12) break;
        xg.push_back(x);
    }
    A.rate = legendre_transform(A.grid.t, A.grid.lambda_hat, A.grid.lambda_se, xg,
                                q.at("refine").get<bool>());
    A.grid_argmin = A.rate.ell;

    A.drift = estimate_drift(cfg.G, cfg.law, q.at("drift_n").get<long>(),
                             q.at("drift_replicas").get<std::uint64_t>(), cfg.master_seed,
                             threads);
    A.rate.ell = A.drift.mean;
    A.props = check_rate_properties(A.rate, A.drift.mean, A.r_hat);
    return A;
}

void write_ldp_files(Runner& R, const LdpArtifacts& A) {
    json sj;
    sj["ns"] = A.spectral.ns;
    sj["p2n"] = A.spectral.p2n;
    sj["raw"] = A.spectral.raw;
    sj["last_raw"] = A.spectral.last_raw;
    sj["cauchy_gap"] = A.spectral.cauchy_gap;
    sj["estimate"] = A.spectral.estimate;
    sj["neg_log_estimate"] = -std::log(A.spectral.estimate);
    sj["interval"] = j_interval(A.spectral.interval);
    sj["p2n_monotone"] = A.spectral.p2n_monotone;
    sj["notes"] = A.spectral.notes;
    R.save_json("spectral.json", sj);

    CsvTable lt({"t", "lambda", "se", "extrapolated", "floored"});
    for (std::size_t i = 0; i < A.grid.t.size(); ++i)
        lt.row({g17(A.grid.t[i]), g17(A.grid.lambda_hat[i]), g17(A.grid.lambda_se[i]),
                A.grid.extrapolated[i] ? "1" : "0", A.grid.floored[i] ? "1" : "0"});
    R.save_csv("lambda.csv", lt);

    CsvTable rt({"x", "I", "unc", "tag"});
    for (std::size_t i = 0; i < A.rate.x.size(); ++i)
        rt.row({g17(A.rate.x[i]), g17(A.rate.I[i]), g17(A.rate.unc[i]),
                std::to_string(A.rate.tag[i])});
    R.save_csv("rate.csv", rt);

    json pj;
    json items = json::array();
    for (const auto& it : A.props.items)
        items.push_back(json{{"name", it.name}, {"pass", it.pass}, {"witness", it.witness}});
    pj["items"] = items;
    pj["all_pass"] = A.props.all_pass;
    pj["ell"] = A.rate.ell;
    pj["grid_argmin"] = A.grid_argmin;
    pj["beta_hat"] = A.rate.beta_hat;
    pj["neg_log_r"] = A.rate.neg_log_r;
    pj["slope_lo"] = A.rate.slope_lo;
    pj["slope_hi"] = A.rate.slope_hi;
    pj["drift"] = json{{"mean", A.drift.mean},
                       {"se", A.drift.se},
                       {"naive_mean", A.drift.naive_mean},
                       {"naive_se", A.drift.naive_se},
                       {"n", A.drift.n},
                       {"replicas", A.drift.replicas}};
    pj["rate_notes"] = A.rate.notes;
    pj["lambda_floor_applied"] = A.grid.floor_applied;
    pj["lambda_note_count"] = A.grid.notes.size();
    json ln = json::array();
    for (std::size_t i = 0; i < A.grid.notes.size() && i < 10; ++i) ln.push_back(A.grid.notes[i]);
    pj["lambda_notes_head"] = ln;
    R.save_json("properties.json", pj);

    json ps;
    ps["title"] = "rate function";
    ps["x_label"] = "x";
    ps["y_label"] = "I(x)";
    ps["series"] = json::array(
        {json{{"file", "rate.csv"}, {"x", "x"}, {"y", "I"}, {"label", "I"}}});
    ps["reference_lines"] = json::array(
        {json{{"axis", "x"}, {"value", A.rate.ell}, {"label", "drift"}},
         json{{"axis", "y"}, {"value", A.rate.neg_log_r}, {"label", "I(0)"}}});
    R.save_json("plotspec_rate.json", ps);
}

void run_ldp_curve(Runner& R) {
    R.cell("ldp", [&] {
        auto A = run_ldp_pipeline(R.cfg, R.cfg.params, R.threads);
        write_ldp_files(R, A);
    });
}

// ---- speed-experiment ----

void run_speed(Runner& R) {
    LdpArtifacts A;
    bool have_ldp = false;
    R.cell("ldp", [&] {
        A = run_ldp_pipeline(R.cfg, R.cfg.params.at("ldp"), R.threads);
        write_ldp_files(R, A);
        have_ldp = true;
    });

    SpeedSolution sp;
    bool have_speeds = false;
    if (have_ldp) {
        R.cell("speeds", [&] {
            sp = solve_speeds(A.rate, R.cfg.pi.rho, A.r_hat);
            json j;
            j["rho"] = R.cfg.pi.rho;
            j["log_rho"] = sp.log_rho;
            j["r_hat"] = A.r_hat;
            j["v_max"] = sp.v_max;
            j["v_max_band"] = j_interval(sp.v_max_band);
            j["v_max_tag"] = sp.v_max_tag;
            j["v_min"] = sp.v_min;
            j["v_min_band"] = j_interval(sp.v_min_band);
            j["v_min_tag"] = sp.v_min_tag;
            j["notes"] = sp.notes;
            R.save_json("speeds.json", j);
            have_speeds = true;
        });
    }

    const auto n_grid = R.cfg.params.at("n_grid").get<std::vector<long>>();
    const auto replicas = R.cfg.params.at("replicas").get<std::uint64_t>();
    const auto pop_cap = R.cfg.params.at("pop_cap").get<std::uint64_t>();

    CsvTable reps({"n", "replica", "max_disp", "min_disp", "max_over_n", "min_over_n",
                   "truncated"});
    CsvTable meds({"n", "replicas_used", "median_max_over_n", "median_min_over_n", "v_max",
                   "v_min"});
    struct Rec {
        long max_disp = 0, min_disp = 0;
        bool truncated = false;
    };
    for (long n : n_grid) {
        std::string cname = "speed|n=" + std::to_string(n);
        R.cell(cname, [&] {
            std::vector<Rec> recs(replicas);
            const std::uint64_t chunk = 8;
            const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
            parallel_for(jobs, R.threads, [&](std::uint64_t j) {
                std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
                for (std::uint64_t rep = lo; rep < hi; ++rep) {
                    auto res = simulate_brw(R.cfg.G, R.cfg.law, R.cfg.pi, n, pop_cap,
                                            stream_seed(R.cfg.master_seed, cname, rep));
                    const auto& last = res.gens.back();
                    recs[rep] = {last.max_disp, last.min_disp, res.truncated};
                }
            });
            std::vector<double> mx, mn;
            std::uint64_t truncated = 0;
            for (std::uint64_t rep = 0; rep < replicas; ++rep) {
                const auto& rc = recs[rep];
                reps.row({std::to_string(n), std::to_string(rep), std::to_string(rc.max_disp),
                          std::to_string(rc.min_disp), g17(double(rc.max_disp) / double(n)),
                          g17(double(rc.min_disp) / double(n)), rc.truncated ? "1" : "0"});
                if (rc.truncated) {
                    ++truncated;
                    continue;
                }
                mx.push_back(double(rc.max_disp) / double(n));
                mn.push_back(double(rc.min_disp) / double(n));
            }
            if (truncated)
                R.out.caps_hit.push_back(cname + ": " + std::to_string(truncated) +
                                         " replicas hit pop_cap and were excluded");
            const double nan = std::numeric_limits<double>::quiet_NaN();
            meds.row({std::to_string(n), std::to_string(mx.size()),
                      g17(mx.empty() ? nan : median(mx)), g17(mn.empty() ? nan : median(mn)),
                      g17(have_speeds ? sp.v_max : nan), g17(have_speeds ? sp.v_min : nan)});
        });
    }
    R.save_csv("speed_replicas.csv", reps);
    R.save_csv("speed_medians.csv", meds);

    json ps;
    ps["title"] = "displacement speeds";
    ps["x_label"] = "n";
    ps["y_label"] = "displacement / n";
    ps["series"] = json::array(
        {json{{"file", "speed_medians.csv"}, {"x", "n"}, {"y", "median_max_over_n"}, {"label", "median max/n"}},
         json{{"file", "speed_medians.csv"}, {"x", "n"}, {"y", "median_min_over_n"}, {"label", "median min/n"}}});
    json refs = json::array();
    if (have_speeds) {
        refs.push_back(json{{"axis", "y"}, {"value", sp.v_max}, {"label", "v_max"}});
        refs.push_back(json{{"axis", "y"}, {"value", sp.v_min}, {"label", "v_min"}});
    }
    ps["reference_lines"] = refs;
    R.save_json("plotspec_speed.json", ps);

    const json& m2o = R.cfg.params.at("m2o");
    if (m2o.at("enabled").get<bool>()) {
        R.cell("m2o", [&] {
            const long n = m2o.at("n").get<long>();
            const auto m2o_reps = m2o.at("replicas").get<std::uint64_t>();
            const auto m2o_cap = m2o.at("pop_cap").get<std::uint64_t>();
            std::vector<TestFunction> fs(3);
            fs[0].kind = TestFunction::One;
            fs[1].kind = TestFunction::IndicatorWord; // w defaults to e
            fs[2].kind = TestFunction::IndicatorLenGe;
            fs[2].c = 4;
            json rows = json::array();
            for (const auto& f : fs) {
                auto rep = many_to_one_check(R.cfg.G, R.cfg.law, R.cfg.pi, n, f, m2o_reps,
                                             R.cfg.master_seed, R.threads, m2o_cap);
                rows.push_back(json{{"f", rep.f_desc},
                                    {"lhs_mean", rep.lhs_mean},
                                    {"lhs_se", rep.lhs_se},
                                    {"rhs", rep.rhs},
                                    {"z", rep.z}});
            }
            json j;
            j["n"] = n;
            j["replicas"] = m2o_reps;
            j["rho"] = R.cfg.pi.rho;
            j["rows"] = rows;
            R.save_json("m2o.json", j);
        });
    }
}

// ---- multitype-certify ----

// Level-m extinction probability of the single-type collapse.
double gw_level_extinction(const std::vector<double>& pmf, long m) {
    double s = 0.0;
    for (long lv = 0; lv < m; ++lv) {
        double f = 0.0, pw = 1.0;
        for (std::size_t k = 0; k < pmf.size(); ++k) {
            f += pmf[k] * pw;
            pw *= s;
        }
        s = f;
    }
    return s;
}

void run_multitype(Runner& R) {
    const auto a_grid = R.cfg.params.at("a_grid").get<std::vector<double>>();
    const auto n_grid = R.cfg.params.at("n_grid").get<std::vector<long>>();
    const auto replicas = R.cfg.params.at("replicas").get<std::uint64_t>();
    const auto pop_cap = R.cfg.params.at("pop_cap").get<std::uint64_t>();

    CertificationReport cert;
    bool have_cert = false;
    R.cell("certify", [&] {
        cert = certify_supercritical(R.cfg.G, R.cfg.law, R.cfg.pi, a_grid, n_grid, replicas,
                                     R.cfg.master_seed, R.threads, pop_cap);
        have_cert = true;
    });

    if (have_cert) {
        CsvTable t({"a", "n", "nu_lo", "nu", "nu_hi", "verdict", "converged", "reducible_retry",
                    "excluded_partial", "row_sum_dev"});
        std::uint64_t excluded_total = 0;
        for (const auto& c : cert.cells) {
            std::uint64_t excl = 0;
            double dev = 0.0;
            for (int i = 0; i < c.matrix.r; ++i) {
                excl += c.matrix.excluded_partial[std::size_t(i)];
                Neumaier rs;
                for (int jj = 0; jj < c.matrix.r; ++jj)
                    rs.add(c.matrix.M[std::size_t(i) * std::size_t(c.matrix.r) + std::size_t(jj)]);
                dev = std::max(dev,
                               std::abs(rs.get() - c.matrix.row_mean_census[std::size_t(i)]));
            }
            excluded_total += excl;
            t.row({g17(c.a), std::to_string(c.n), g17(c.nu_lo), g17(c.central.nu), g17(c.nu_hi),
                   c.verdict, c.central.converged ? "1" : "0",
                   c.central.reducible_retry ? "1" : "0", std::to_string(excl), g17(dev)});
        }
        R.save_csv("certificates.csv", t);
        if (excluded_total)
            R.out.caps_hit.push_back("certify: " + std::to_string(excluded_total) +
                                     " censuses hit pop_cap and were excluded");

        json mj;
        json cells = json::array();
        for (const auto& c : cert.cells) {
            json cj;
            cj["a"] = c.a;
            cj["n"] = c.n;
            cj["M"] = c.matrix.M;
            cj["SE"] = c.matrix.SE;
            cj["row_mean_census"] = c.matrix.row_mean_census;
            cj["excluded_partial"] = c.matrix.excluded_partial;
            cj["replicas"] = c.matrix.replicas;
            cj["nu"] = c.central.nu;
            cj["nu_lo"] = c.nu_lo;
            cj["nu_hi"] = c.nu_hi;
            cj["verdict"] = c.verdict;
            cj["left_evec"] = c.central.left_evec;
            cj["residual"] = c.central.residual;
            cj["iterations"] = c.central.iterations;
            cj["converged"] = c.central.converged;
            cj["reducible_retry"] = c.central.reducible_retry;
            cells.push_back(cj);
        }
        mj["cells"] = cells;
        mj["a_grid"] = cert.a_grid;
        mj["n_grid"] = cert.n_grid;
        mj["n0"] = cert.n0;
        json stays = json::array();
        for (bool s : cert.stays) stays.push_back(s);
        mj["stays"] = stays;
        R.save_json("matrices.json", mj);
    }

    const json& sv = R.cfg.params.at("survival");
    if (sv.at("enabled").get<bool>()) {
        R.cell("survival", [&] {
            const int root = sv.at("root_type").get<int>();
            double a = sv.at("a").get<double>();
            if (a <= 0.0) a = a_grid.front();
            const long n = sv.at("n").get<long>();
            const long m = sv.at("m").get<long>();
            const auto sreps = sv.at("replicas").get<std::uint64_t>();
            MultitypeCaps caps;
            caps.pop_cap = sv.at("pop_cap").get<std::uint64_t>();
            caps.level_cap = sv.at("level_cap").get<std::uint64_t>();
            auto res = simulate_multitype_survival(R.cfg.G, R.cfg.law, R.cfg.pi, root, a, n, m,
                                                   sreps, caps, R.cfg.master_seed, R.threads);
            if (res.truncated)
                R.out.caps_hit.push_back("survival: " + std::to_string(res.truncated) +
                                         " replicas stopped at a cap (counted alive)");

            // Single-type reference: empirical census-size pmf from the root
            // type, then the Galton-Watson extinction fixed point. Exact when
            // every type has the same census-size law (symmetric factors).
            char tag[96];
            std::snprintf(tag, sizeof tag, "gwpmf|i=%d|a=%.17g|n=%ld", root, a, n);
            std::map<std::uint64_t, std::uint64_t> sizes;
            std::uint64_t pmf_used = 0;
            for (std::uint64_t rep = 0; rep < sreps; ++rep) {
                auto cen = sample_cone_exit_census(R.cfg.G, R.cfg.law, R.cfg.pi, root, a, n,
                                                   caps.pop_cap,
                                                   stream_seed(R.cfg.master_seed, tag, rep));
                if (cen.truncated) continue;
                ++sizes[cen.recs.size()];
                ++pmf_used;
            }
            json gw;
            if (pmf_used) {
                std::vector<double> pmf(sizes.rbegin()->first + 1, 0.0);
                for (const auto& [k, c] : sizes) pmf[k] = double(c) / double(pmf_used);
                gw["pmf_replicas"] = pmf_used;
                gw["pmf_max_size"] = sizes.rbegin()->first;
                gw["q_inf"] = gw_extinction_prob(pmf);
                gw["q_level_m"] = gw_level_extinction(pmf, m);
                gw["survival_level_m"] = 1.0 - gw_level_extinction(pmf, m);
                gw["note"] = "single-type collapse; exact for symmetric factors";
            }

            json j;
            j["root_type"] = root;
            j["a"] = a;
            j["n"] = n;
            j["m"] = m;
            j["replicas"] = res.replicas;
            j["survival_freq"] = res.survival_freq;
            j["alive"] = res.alive;
            j["truncated"] = res.truncated;
            j["lemma_violations"] = res.lemma_violations;
            j["seam_violations"] = res.seam_violations;
            j["mean_type_counts"] = res.mean_type_counts;
            j["gw"] = gw;
            R.save_json("survival.json", j);
        });
    }
}

// ---- exit-rate ----

void run_exit_rate(Runner& R) {
    const double a = R.cfg.params.at("a").get<double>();
    const int cone = R.cfg.params.at("cone").get<int>();
    const auto n_grid = R.cfg.params.at("n_grid").get<std::vector<long>>();
    const auto replicas = R.cfg.params.at("replicas").get<std::uint64_t>();
    const json& ref = R.cfg.params.at("reference_i_over_a");
    const double reference =
        ref.is_null() ? std::numeric_limits<double>::quiet_NaN() : ref.get<double>();

    R.cell("exit", [&] {
        auto curve = exit_rate_curve(R.cfg.G, R.cfg.law, a, cone, n_grid, replicas,
                                     R.cfg.master_seed, R.threads);
        CsvTable t({"n", "horizon", "replicas", "hits_plain", "rate_plain", "band_plain_lo",
                    "band_plain_hi", "zero_plain", "hits_cone", "rate_cone", "band_cone_lo",
                    "band_cone_hi", "zero_cone", "log_gap", "sandwich_violations",
                    "reference_i_over_a"});
        std::vector<double> gap_n, gap_v;
        std::uint64_t zero_cells = 0, sandwich_total = 0;
        for (const auto& c : curve.cells) {
            double lg = std::numeric_limits<double>::quiet_NaN();
            if (c.hits_plain > 0 && c.hits_cone > 0) {
                lg = std::log(double(c.hits_plain)) - std::log(double(c.hits_cone));
                gap_n.push_back(double(c.n));
                gap_v.push_back(lg);
            }
            if (c.zero_plain || c.zero_cone) ++zero_cells;
            sandwich_total += c.sandwich_violations;
            t.row({std::to_string(c.n), std::to_string(c.horizon), std::to_string(c.replicas),
                   std::to_string(c.hits_plain), g17(c.rate_plain), g17(c.band_plain.lo),
                   g17(c.band_plain.hi), c.zero_plain ? "1" : "0", std::to_string(c.hits_cone),
                   g17(c.rate_cone), g17(c.band_cone.lo), g17(c.band_cone.hi),
                   c.zero_cone ? "1" : "0", g17(lg), std::to_string(c.sandwich_violations),
                   g17(reference)});
        }
        R.save_csv("exit_rate.csv", t);

        json j;
        j["a"] = a;
        j["cone"] = cone;
        j["reference_i_over_a"] = ref;
        j["zero_cells"] = zero_cells;
        j["sandwich_violations"] = sandwich_total;
        if (gap_n.size() >= 2)
            j["gap_slope"] =
                (gap_v.back() - gap_v.front()) / (gap_n.back() - gap_n.front());
        else
            j["gap_slope"] = nullptr;
        R.save_json("exit.json", j);

        json ps;
        ps["title"] = "exit rate vs radius";
        ps["x_label"] = "n";
        ps["y_label"] = "-(1/n) log P(T_n <= n/a)";
        ps["series"] = json::array(
            {json{{"file", "exit_rate.csv"}, {"x", "n"}, {"y", "rate_plain"}, {"label", "unrestricted"}},
             json{{"file", "exit_rate.csv"}, {"x", "n"}, {"y", "rate_cone"}, {"label", "cone"}}});
        json refs = json::array();
        if (!ref.is_null())
            refs.push_back(json{{"axis", "y"}, {"value", reference}, {"label", "I(a)/a"}});
        ps["reference_lines"] = refs;
        R.save_json("plotspec_exit.json", ps);
    });
}

} // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
    Runner R{cfg, out_dir.empty() ? cfg.out_dir : out_dir, threads < 1 ? 1 : threads, {}};
    if (R.dir.empty()) {
        R.out.exit_code = 3;
        R.out.failed_cells.push_back("no output directory: pass --out or set \"out\"");
        return R.out;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ensure_dir(R.dir);
        if (cfg.experiment == "rw-sim")
            run_rw_sim(R);
        else if (cfg.experiment == "rw-exact")
            run_rw_exact(R);
        else if (cfg.experiment == "ldp-curve")
            run_ldp_curve(R);
        else if (cfg.experiment == "speed-experiment")
            run_speed(R);
        else if (cfg.experiment == "multitype-certify")
            run_multitype(R);
        else if (cfg.experiment == "exit-rate")
            run_exit_rate(R);
        // "validate" writes the manifest only.

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json m;
        m["schema"] = kSchemaVersion;
        m["code_version"] = kCodeVersion;
        m["seed_scheme"] = kSeedScheme;
        m["experiment"] = cfg.experiment;
        m["config_digest"] = cfg.digest;
        m["effective_config"] = cfg.effective;
        m["wall_seconds"] = wall; // manifest only: result files stay bit-reproducible
        m["caps_hit"] = R.out.caps_hit;
        m["failed_cells"] = R.out.failed_cells;
        m["files"] = R.out.files;
        write_text_file(path_join(R.dir, "manifest.json"), m.dump(2) + "\n");
    } catch (const IoError& e) {
        R.out.exit_code = 3;
        R.out.failed_cells.push_back(e.what());
        return R.out;
    }
    R.out.exit_code = (R.out.caps_hit.empty() && R.out.failed_cells.empty()) ? 0 : 2;
    return R.out;
}

// ---- report ----

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cell += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                cells.push_back(cell);
                cell.clear();
            } else {
                cell += c;
            }
        }
        cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Markdown table straight from CSV cells; numbers are copied verbatim so the
// report never reinterprets a statistic.
std::string md_table(const std::vector<std::vector<std::string>>& rows, std::size_t max_rows) {
    if (rows.empty()) return "(empty)\n";
    std::string md = "|";
    for (const auto& h : rows[0]) md += " " + h + " |";
    md += "\n|";
    for (std::size_t i = 0; i < rows[0].size(); ++i) md += " --- |";
    md += "\n";
    std::size_t shown = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (shown >= max_rows) {
            md += "\n_(" + std::to_string(rows.size() - 1 - shown) + " more rows)_\n";
            return md;
        }
        md += "|";
        for (const auto& c : rows[i]) md += " " + c + " |";
        md += "\n";
        ++shown;
    }
    return md;
}

std::string num(const json& v) { return v.is_null() ? "null" : v.dump(); }

} // namespace

ReportOutcome build_report(const std::string& dir) {
    ReportOutcome ro;
    const std::string mpath = path_join(dir, "manifest.json");
    if (!file_exists(mpath)) {
        ro.exit_code = 3;
        ro.text = "error: " + dir + " contains no manifest.json\n";
        return ro;
    }
    json man;
    try {
        man = json::parse(read_text_file(mpath));
    } catch (const std::exception& e) {
        ro.exit_code = 3;
        ro.text = std::string("error: manifest.json unreadable: ") + e.what() + "\n";
        return ro;
    }

    std::vector<std::string> issues;
    auto load_json = [&](const char* name, json& out) {
        if (!file_exists(path_join(dir, name))) return false;
        try {
            out = json::parse(read_text_file(path_join(dir, name)));
            return true;
        } catch (const std::exception& e) {
            issues.push_back(std::string(name) + ": " + e.what());
            return false;
        }
    };
    auto load_csv = [&](const char* name, std::vector<std::vector<std::string>>& out) {
        if (!file_exists(path_join(dir, name))) return false;
        try {
            out = parse_csv(read_text_file(path_join(dir, name)));
            return true;
        } catch (const std::exception& e) {
            issues.push_back(std::string(name) + ": " + e.what());
            return false;
        }
    };

    std::string md = "# Experiment report\n\n";
    md += "- experiment: " + man.value("experiment", std::string("?")) + "\n";
    md += "- config digest: `" + man.value("config_digest", std::string("?")) + "`\n";
    md += "- code version: " + man.value("code_version", std::string("?")) + "\n";
    md += "- seed scheme: " + man.value("seed_scheme", std::string("?")) + "\n";
    if (man.contains("caps_hit") && !man["caps_hit"].empty()) {
        md += "- caps hit:\n";
        for (const auto& c : man["caps_hit"]) md += "  - " + c.get<std::string>() + "\n";
    } else {
        md += "- caps hit: none\n";
    }
    if (man.contains("failed_cells") && !man["failed_cells"].empty()) {
        md += "- failed cells:\n";
        for (const auto& c : man["failed_cells"]) md += "  - " + c.get<std::string>() + "\n";
    }
    md += "\n";

    json j;
    std::vector<std::vector<std::string>> csv;

    if (load_json("drift.json", j)) {
        md += "## Random walk drift\n\n";
        md += "- windowed: " + num(j["windowed_mean"]) + " +- " + num(j["windowed_se"]) +
              " (SE), n = " + num(j["n"]) + ", replicas = " + num(j["replicas"]) + "\n";
        md += "- naive |Y_n|/n: " + num(j["naive_mean"]) + " +- " + num(j["naive_se"]) + "\n\n";
    }
    if (load_json("exact.json", j)) {
        md += "## Exact distribution\n\n";
        md += "- n = " + num(j["n"]) + ", support words = " + num(j["support_words"]) +
              ", mean length = " + num(j["mean_len"]) + ", mass at e = " + num(j["return_mass"]) +
              "\n\n";
    }
    if (load_json("spectral.json", j)) {
        md += "## Spectral radius\n\n";
        md += "- estimate: " + num(j["estimate"]) + "  (-log: " + num(j["neg_log_estimate"]) +
              ")\n";
        md += "- heuristic interval: [" + num(j["interval"]["lo"]) + ", " +
              num(j["interval"]["hi"]) + "]\n";
        md += "- raw p_{2n}^{1/2n} at n_max: " + num(j["last_raw"]) +
              ", monotone p_2n: " + num(j["p2n_monotone"]) + "\n\n";
    }
    if (load_json("properties.json", j)) {
        md += "## Rate function properties\n\n";
        md += "| check | pass | witness |\n| --- | --- | --- |\n";
        for (const auto& it : j["items"])
            md += "| " + it["name"].get<std::string>() + " | " +
                  (it["pass"].get<bool>() ? "yes" : "NO") + " | " +
                  it["witness"].get<std::string>() + " |\n";
        md += "\n- all pass: " + std::string(j["all_pass"].get<bool>() ? "yes" : "NO") + "\n";
        md += "- drift ell: " + num(j["ell"]) + ", beta_hat: " + num(j["beta_hat"]) +
              ", I(0): " + num(j["neg_log_r"]) + "\n\n";
    }
    if (load_json("speeds.json", j)) {
        md += "## Speeds\n\n";
        md += "- rho = " + num(j["rho"]) + ", log rho = " + num(j["log_rho"]) +
              ", r_hat = " + num(j["r_hat"]) + "\n";
        md += "- v_max = " + num(j["v_max"]) + " in [" + num(j["v_max_band"]["lo"]) + ", " +
              num(j["v_max_band"]["hi"]) + "] (" + j["v_max_tag"].get<std::string>() + ")\n";
        md += "- v_min = " + num(j["v_min"]) + " in [" + num(j["v_min_band"]["lo"]) + ", " +
              num(j["v_min_band"]["hi"]) + "] (" + j["v_min_tag"].get<std::string>() + ")\n\n";
        if (load_csv("speed_medians.csv", csv)) {
            md += "### Replica medians\n\n" + md_table(csv, 40) + "\n";
        }
    }
    if (load_json("m2o.json", j)) {
        md += "## Many-to-one checks\n\n";
        md += "| f | lhs mean | lhs SE | rhs | z |\n| --- | --- | --- | --- | --- |\n";
        for (const auto& row : j["rows"])
            md += "| " + row["f"].get<std::string>() + " | " + num(row["lhs_mean"]) + " | " +
                  num(row["lhs_se"]) + " | " + num(row["rhs"]) + " | " + num(row["z"]) + " |\n";
        md += "\n";
    }
    if (load_csv("certificates.csv", csv)) {
        md += "## Multitype certificates\n\n" + md_table(csv, 60) + "\n";
        if (load_json("matrices.json", j)) {
            md += "- n0 per a: " + j["n0"].dump() + ", stays supercritical: " +
                  j["stays"].dump() + "\n\n";
        }
    }
    if (load_json("survival.json", j)) {
        md += "## Multitype survival\n\n";
        md += "- survival frequency at level m = " + num(j["m"]) + ": " +
              num(j["survival_freq"]) + " (alive " + num(j["alive"]) + " / " +
              num(j["replicas"]) + ", truncated " + num(j["truncated"]) + ")\n";
        md += "- hard bound violations: lemma " + num(j["lemma_violations"]) + ", seam " +
              num(j["seam_violations"]) + "\n";
        if (j.contains("gw") && j["gw"].is_object() && j["gw"].contains("survival_level_m"))
            md += "- single-type reference survival: " + num(j["gw"]["survival_level_m"]) +
                  " (q_inf = " + num(j["gw"]["q_inf"]) + ")\n";
        md += "\n";
    }
    if (load_csv("exit_rate.csv", csv)) {
        md += "## Exit rates\n\n" + md_table(csv, 40) + "\n";
        if (load_json("exit.json", j))
            md += "- cone gap slope: " + num(j["gap_slope"]) + ", zero cells: " +
                  num(j["zero_cells"]) + ", sandwich violations: " +
                  num(j["sandwich_violations"]) + "\n\n";
    }

    if (!issues.empty()) {
        md += "## Issues\n\n";
        for (const auto& s : issues) md += "- " + s + "\n";
        md += "\n";
    }

    ro.text = md;
    try {
        write_text_file(path_join(dir, "report.md"), md);
    } catch (const IoError& e) {
        ro.exit_code = 3;
        ro.text += std::string("error: ") + e.what() + "\n";
    }
    return ro;
}

} // namespace brw
