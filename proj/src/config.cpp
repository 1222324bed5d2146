#include "brw/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "brw/errors.hpp"
#include "brw/io_util.hpp"
#include "brw/version.hpp"

namespace brw {

using nlohmann::json;

namespace {

bool as_u64(const json& v, std::uint64_t& out) {
    if (v.is_number_unsigned()) {
        out = v.get<std::uint64_t>();
        return true;
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        out = std::uint64_t(v.get<std::int64_t>());
        return true;
    }
    return false;
}

bool as_long(const json& v, long& out) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) return false;
    out = long(v.get<std::int64_t>());
    return true;
}

// line/column of a byte offset, for parse error messages.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

void check_known_keys(const json& obj, const std::vector<std::string>& allowed,
                      const std::string& where, std::vector<std::string>& bad) {
    for (const auto& [k, v] : obj.items()) {
        (void)v;
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            bad.push_back(where + ": unknown key \"" + k + "\"");
    }
}

// Defaults drive both the filling and the type checking: the merged params
// object always has exactly the keys of the default object.
json merge_params(const json& defaults, const json& user, const std::string& path,
                  std::vector<std::string>& bad) {
    json out = json::object();
    for (const auto& [k, dv] : defaults.items()) {
        if (!user.contains(k)) {
            out[k] = dv;
            continue;
        }
        const json& uv = user.at(k);
        std::string where = path + "." + k;
        if (dv.is_object()) {
            if (uv.is_null()) {
                out[k] = dv; // explicit null keeps the defaults
            } else if (!uv.is_object()) {
                bad.push_back(where + ": expected an object");
                out[k] = dv;
            } else {
                out[k] = merge_params(dv, uv, where, bad);
            }
        } else if (dv.is_boolean()) {
            if (!uv.is_boolean()) {
                bad.push_back(where + ": expected a boolean");
                out[k] = dv;
            } else {
                out[k] = uv;
            }
        } else if (dv.is_array()) {
            if (!uv.is_array()) {
                bad.push_back(where + ": expected an array of numbers");
                out[k] = dv;
            } else {
                bool nums = true;
                for (const auto& e : uv)
                    if (!e.is_number()) nums = false;
                if (!nums) {
                    bad.push_back(where + ": expected numeric entries");
                    out[k] = dv;
                } else {
                    out[k] = uv;
                }
            }
        } else if (dv.is_number() || dv.is_null()) {
            if (!uv.is_number() && !uv.is_null()) {
                bad.push_back(where + ": expected a number");
                out[k] = dv;
            } else {
                out[k] = uv;
            }
        } else {
            out[k] = uv;
        }
    }
    for (const auto& [k, uv] : user.items()) {
        (void)uv;
        if (!defaults.contains(k)) bad.push_back(path + ": unknown parameter \"" + k + "\"");
    }
    return out;
}

json ldp_defaults() {
    return json{{"t_min", -30.0},
                {"t_max", 30.0},
                {"dt", 0.01},
                {"exact_ns", json::array({2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14})},
                {"mc_ns", json::array({50, 100, 200})},
                {"mc_replicas", 400000},
                {"support_cap", 10000000},
                {"spectral_n_max", 28},
                {"dx", 0.005},
                {"x_max", 0.0}, // 0 means up to the maximal letter cost
                {"refine", false},
                {"drift_n", 2000},
                {"drift_replicas", 10000}};
}

json params_defaults(const std::string& experiment) {
    if (experiment == "rw-sim") return json{{"n", 100}, {"replicas", 100000}};
    if (experiment == "rw-exact") return json{{"n", 8}, {"support_cap", 10000000}};
    if (experiment == "ldp-curve") return ldp_defaults();
    if (experiment == "speed-experiment")
        return json{{"n_grid", json::array({15, 25, 35})},
                    {"replicas", 200},
                    {"pop_cap", 10000000},
                    {"ldp", ldp_defaults()},
                    {"m2o", json{{"enabled", false},
                                 {"n", 6},
                                 {"replicas", 10000},
                                 {"pop_cap", 10000000}}}};
    if (experiment == "multitype-certify")
        return json{{"a_grid", json::array()},
                    {"n_grid", json::array({10, 20, 40})},
                    {"replicas", 400},
                    {"pop_cap", 10000000},
                    {"survival", json{{"enabled", false},
                                      {"root_type", 1},
                                      {"a", 0.0},
                                      {"n", 20},
                                      {"m", 3},
                                      {"replicas", 200},
                                      {"level_cap", 100000},
                                      {"pop_cap", 10000000}}}};
    if (experiment == "exit-rate")
        return json{{"a", 0.0},
                    {"cone", 1},
                    {"n_grid", json::array({20, 40, 60, 80})},
                    {"replicas", 1000000},
                    {"reference_i_over_a", nullptr}};
    return json::object(); // validate
}

void check_positive_int_array(const json& arr, const std::string& where,
                              std::vector<std::string>& bad) {
    for (const auto& e : arr) {
        long v = 0;
        if (!as_long(e, v) || v < 1) {
            bad.push_back(where + ": entries must be integers >= 1");
            return;
        }
    }
}

// Semantic checks on the merged params of one experiment.
void check_params(const std::string& experiment, const json& p, int r,
                  std::vector<std::string>& bad) {
    auto ldp_checks = [&](const json& q, const std::string& where) {
        if (!(q.at("dt").get<double>() > 0.0)) bad.push_back(where + ".dt must be positive");
        if (!(q.at("t_min").get<double>() < 0.0 && q.at("t_max").get<double>() > 0.0))
            bad.push_back(where + ": need t_min < 0 < t_max");
        if (q.at("exact_ns").empty()) bad.push_back(where + ".exact_ns must be nonempty");
        check_positive_int_array(q.at("exact_ns"), where + ".exact_ns", bad);
        check_positive_int_array(q.at("mc_ns"), where + ".mc_ns", bad);
        std::uint64_t reps = 0;
        if (!as_u64(q.at("mc_replicas"), reps) || (reps < 1000 && !q.at("mc_ns").empty()))
            bad.push_back(where + ".mc_replicas: need >= 1000 (or no mc_ns)");
        long nm = 0;
        if (!as_long(q.at("spectral_n_max"), nm) || nm < 4 || nm % 2 != 0)
            bad.push_back(where + ".spectral_n_max: need an even integer >= 4");
        if (!(q.at("dx").get<double>() > 0.0)) bad.push_back(where + ".dx must be positive");
        if (q.at("x_max").get<double>() < 0.0) bad.push_back(where + ".x_max must be >= 0");
        long dn = 0;
        std::uint64_t dr = 0;
        if (!as_long(q.at("drift_n"), dn) || dn < 2)
            bad.push_back(where + ".drift_n: need an integer >= 2");
        if (!as_u64(q.at("drift_replicas"), dr) || dr < 2)
            bad.push_back(where + ".drift_replicas: need an integer >= 2");
    };

    if (experiment == "rw-sim") {
        long n = 0;
        if (!as_long(p.at("n"), n) || n < 2) bad.push_back("params.n: need an integer >= 2");
        std::uint64_t reps = 0;
        if (!as_u64(p.at("replicas"), reps) || reps < 2)
            bad.push_back("params.replicas: need an integer >= 2");
    } else if (experiment == "rw-exact") {
        long n = 0;
        if (!as_long(p.at("n"), n) || n < 0) bad.push_back("params.n: need an integer >= 0");
    } else if (experiment == "ldp-curve") {
        ldp_checks(p, "params");
    } else if (experiment == "speed-experiment") {
        if (p.at("n_grid").empty()) bad.push_back("params.n_grid must be nonempty");
        check_positive_int_array(p.at("n_grid"), "params.n_grid", bad);
        std::uint64_t v = 0;
        if (!as_u64(p.at("replicas"), v) || v < 1)
            bad.push_back("params.replicas: need an integer >= 1");
        if (!as_u64(p.at("pop_cap"), v) || v < 1)
            bad.push_back("params.pop_cap: need an integer >= 1");
        ldp_checks(p.at("ldp"), "params.ldp");
        const json& m2o = p.at("m2o");
        if (m2o.at("enabled").get<bool>()) {
            long n = 0;
            if (!as_long(m2o.at("n"), n) || n < 1)
                bad.push_back("params.m2o.n: need an integer >= 1");
            if (!as_u64(m2o.at("replicas"), v) || v < 2)
                bad.push_back("params.m2o.replicas: need an integer >= 2");
        }
    } else if (experiment == "multitype-certify") {
        if (p.at("a_grid").empty())
            bad.push_back("params.a_grid: required and must be nonempty");
        for (const auto& e : p.at("a_grid"))
            if (!e.is_number() || !(e.get<double>() > 0.0)) {
                bad.push_back("params.a_grid: entries must be positive numbers");
                break;
            }
        if (p.at("n_grid").empty()) bad.push_back("params.n_grid must be nonempty");
        check_positive_int_array(p.at("n_grid"), "params.n_grid", bad);
        std::uint64_t v = 0;
        if (!as_u64(p.at("replicas"), v) || v < 100)
            bad.push_back("params.replicas: need an integer >= 100");
        const json& sv = p.at("survival");
        if (sv.at("enabled").get<bool>()) {
            long root = 0, n = 0, m = 0;
            if (!as_long(sv.at("root_type"), root) || root < 1 || root > r)
                bad.push_back("params.survival.root_type: need a factor index in 1.." +
                              std::to_string(r));
            if (!as_long(sv.at("n"), n) || n < 1)
                bad.push_back("params.survival.n: need an integer >= 1");
            if (!as_long(sv.at("m"), m) || m < 1)
                bad.push_back("params.survival.m: need an integer >= 1");
            if (!as_u64(sv.at("replicas"), v) || v < 1)
                bad.push_back("params.survival.replicas: need an integer >= 1");
            if (!sv.at("a").is_number() || sv.at("a").get<double>() < 0.0)
                bad.push_back("params.survival.a: need a number >= 0 (0 = first of a_grid)");
        }
    } else if (experiment == "exit-rate") {
        if (!(p.at("a").get<double>() > 0.0))
            bad.push_back("params.a: required and must be positive");
        long cone = 0;
        if (!as_long(p.at("cone"), cone) || cone < 1 || cone > r)
            bad.push_back("params.cone: need a factor index in 1.." + std::to_string(r));
        if (p.at("n_grid").empty()) bad.push_back("params.n_grid must be nonempty");
        check_positive_int_array(p.at("n_grid"), "params.n_grid", bad);
        std::uint64_t v = 0;
        if (!as_u64(p.at("replicas"), v) || v < 2)
            bad.push_back("params.replicas: need an integer >= 2");
        const json& ref = p.at("reference_i_over_a");
        if (!ref.is_null() && !(ref.is_number() && ref.get<double>() > 0.0))
            bad.push_back("params.reference_i_over_a: need a positive number or null");
    }
}

} // namespace

LoadResult parse_and_validate(const std::string& text, const std::string& origin) {
    LoadResult res;
    auto& bad = res.violations;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        bad.push_back(origin + ": parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
        return res;
    }
    if (!j.is_object()) {
        bad.push_back(origin + ": top level must be an object");
        return res;
    }

    check_known_keys(
        j, {"schema", "experiment", "master_seed", "out", "group", "step", "offspring", "params"},
        origin, bad);

    if (j.contains("schema")) {
        if (!j.at("schema").is_string() || j.at("schema").get<std::string>() != kSchemaVersion)
            bad.push_back("schema: expected \"" + std::string(kSchemaVersion) + "\"");
    }

    ExperimentConfig cfg;
    if (!j.contains("experiment") || !j.at("experiment").is_string()) {
        bad.push_back("experiment: required string");
    } else {
        cfg.experiment = j.at("experiment").get<std::string>();
        if (std::find(kExperiments.begin(), kExperiments.end(), cfg.experiment) ==
            kExperiments.end())
            bad.push_back("experiment: unknown selector \"" + cfg.experiment + "\"");
    }

    if (!j.contains("master_seed") || !as_u64(j.at("master_seed"), cfg.master_seed))
        bad.push_back("master_seed: required unsigned 64-bit integer");

    if (j.contains("out")) {
        if (!j.at("out").is_string())
            bad.push_back("out: expected a string path");
        else
            cfg.out_dir = j.at("out").get<std::string>();
    }

    // ---- group ----
    std::vector<FactorGroup> factors;
    json eff_factors = json::array();
    if (!j.contains("group") || !j.at("group").is_object() ||
        !j.at("group").contains("factors") || !j.at("group").at("factors").is_array()) {
        bad.push_back("group.factors: required array of factor specs");
    } else {
        check_known_keys(j.at("group"), {"factors"}, "group", bad);
        int idx = 0;
        for (const auto& f : j.at("group").at("factors")) {
            ++idx;
            std::string where = "group.factors[" + std::to_string(idx) + "]";
            if (!f.is_object()) {
                bad.push_back(where + ": expected an object");
                continue;
            }
            try {
                if (f.contains("cyclic")) {
                    check_known_keys(f, {"cyclic"}, where, bad);
                    long m = 0;
                    if (!as_long(f.at("cyclic"), m) || m < 2 || m > 255) {
                        bad.push_back(where + ".cyclic: need an integer in 2..255");
                        continue;
                    }
                    factors.push_back(FactorGroup::cyclic(idx, int(m)));
                    eff_factors.push_back(json{{"cyclic", m}});
                } else {
                    check_known_keys(f, {"labels", "mul", "generators"}, where, bad);
                    if (!f.contains("labels") || !f.contains("mul") || !f.contains("generators")) {
                        bad.push_back(where + ": need labels, mul, generators (or cyclic)");
                        continue;
                    }
                    auto labels = f.at("labels").get<std::vector<std::string>>();
                    std::vector<std::uint8_t> mul;
                    for (const auto& row : f.at("mul")) {
                        if (!row.is_array()) throw MalformedInput("mul rows must be arrays");
                        for (const auto& e : row) {
                            long v = 0;
                            if (!as_long(e, v) || v < 0 || v > 255)
                                throw MalformedInput("mul entries must be integers in 0..255");
                            mul.push_back(std::uint8_t(v));
                        }
                    }
                    std::vector<std::uint8_t> gens;
                    for (const auto& e : f.at("generators")) {
                        long v = 0;
                        if (!as_long(e, v) || v < 0 || v > 255)
                            throw MalformedInput("generators must be integers in 0..255");
                        gens.push_back(std::uint8_t(v));
                    }
                    factors.push_back(FactorGroup::from_table(idx, labels, mul, gens));
                    json nf;
                    nf["labels"] = labels;
                    json rows = json::array();
                    int ord = int(labels.size());
                    for (int a = 0; a < ord; ++a) {
                        json row = json::array();
                        for (int b = 0; b < ord; ++b)
                            row.push_back(int(mul[std::size_t(a) * std::size_t(ord) + std::size_t(b)]));
                        rows.push_back(row);
                    }
                    nf["mul"] = rows;
                    nf["generators"] = json::array();
                    for (auto g : gens) nf["generators"].push_back(int(g));
                    eff_factors.push_back(nf);
                }
            } catch (const ValidationError& e) {
                for (const auto& v : e.violations) bad.push_back(where + ": " + v);
            } catch (const std::exception& e) {
                bad.push_back(where + ": " + e.what());
            }
        }
    }

    bool group_ok = false;
    if (bad.empty()) {
        try {
            cfg.G = make_free_product(std::move(factors));
            group_ok = true;
            for (int i = 1; i <= cfg.G.r(); ++i)
                if (cfg.G.factor(i).symmetrized)
                    res.notices.push_back("group factor " + std::to_string(i) +
                                          ": generating set completed to its symmetric closure");
        } catch (const std::exception& e) {
            bad.push_back(std::string("group: ") + e.what());
        }
    }

    // ---- step law ----
    if (!j.contains("step") || !j.at("step").is_object() || !j.at("step").contains("type")) {
        bad.push_back("step.type: required (\"srw\" or \"custom\")");
    } else if (group_ok) {
        const json& st = j.at("step");
        check_known_keys(st, {"type", "alphas", "factor_laws"}, "step", bad);
        std::string type = st.at("type").is_string() ? st.at("type").get<std::string>() : "";
        if (type == "srw") {
            cfg.law = srw_on_generators(cfg.G);
        } else if (type == "custom") {
            std::vector<double> alphas;
            std::vector<std::vector<double>> flaws;
            bool shaped = true;
            try {
                alphas = st.at("alphas").get<std::vector<double>>();
                flaws = st.at("factor_laws").get<std::vector<std::vector<double>>>();
            } catch (const std::exception& e) {
                bad.push_back(std::string("step: alphas/factor_laws malformed: ") + e.what());
                shaped = false;
            }
            if (shaped) {
                auto sb = step_law_violations(cfg.G, alphas, flaws);
                for (auto& m : sb) {
                    // The positivity of every alpha_k is standing assumption A3.
                    if (m.rfind("alpha_", 0) == 0 && m.find("must be positive") != std::string::npos)
                        m = "A3: " + m;
                    bad.push_back("step: " + m);
                }
                if (sb.empty()) cfg.law = make_step_law(cfg.G, alphas, flaws);
            }
        } else {
            bad.push_back("step.type: expected \"srw\" or \"custom\"");
        }
        if (!cfg.law.atoms.empty()) {
            for (int k = 1; k <= cfg.G.r(); ++k) {
                const auto& f = cfg.G.factor(k);
                const auto& mu = cfg.law.factor_laws[std::size_t(k) - 1];
                for (int a = 1; a < f.order; ++a)
                    if (std::abs(mu[std::size_t(a)] - mu[f.inv[std::size_t(a)]]) > 1e-15) {
                        res.notices.push_back(
                            "step law on factor " + std::to_string(k) +
                            " is not inversion-symmetric; spectral-radius and rate-function "
                            "estimates assume a symmetric law");
                        break;
                    }
            }
        }
    }

    // ---- offspring law ----
    const bool needs_offspring =
        cfg.experiment == "speed-experiment" || cfg.experiment == "multitype-certify";
    json eff_offspring;
    if (j.contains("offspring")) {
        const json& off = j.at("offspring");
        if (!off.is_object() || !off.contains("pmf") || !off.at("pmf").is_object()) {
            bad.push_back("offspring.pmf: required object mapping child counts to masses");
        } else {
            check_known_keys(off, {"pmf"}, "offspring", bad);
            std::map<int, double> pmf;
            bool shaped = true;
            for (const auto& [k, v] : off.at("pmf").items()) {
                try {
                    std::size_t used = 0;
                    int kk = std::stoi(k, &used);
                    if (used != k.size()) throw std::invalid_argument(k);
                    if (!v.is_number()) throw std::invalid_argument("mass");
                    pmf[kk] = v.get<double>();
                } catch (const std::exception&) {
                    bad.push_back("offspring.pmf: key \"" + k +
                                  "\" must be an integer with a numeric mass");
                    shaped = false;
                }
            }
            if (shaped) {
                auto ob = offspring_law_violations(pmf, true);
                for (auto& m : ob) {
                    // pi(0) = 0 is standing assumption A2; 1 < rho < inf is A1.
                    if (m.find("support must be >= 1") != std::string::npos)
                        m = "A2: " + m;
                    else if (m.find("must exceed 1") != std::string::npos)
                        m = "A1: " + m;
                    bad.push_back("offspring: " + m);
                }
                if (ob.empty()) {
                    cfg.pi = make_offspring_law(pmf, true);
                    cfg.has_offspring = true;
                    eff_offspring = json::object();
                    json pj = json::object();
                    for (const auto& [k, p] : pmf) pj[std::to_string(k)] = p;
                    eff_offspring["pmf"] = pj;
                }
            }
        }
    } else if (needs_offspring) {
        bad.push_back("offspring: required for experiment " + cfg.experiment);
    }

    // ---- params ----
    json user_params = j.contains("params") ? j.at("params") : json::object();
    if (!user_params.is_object()) {
        bad.push_back("params: expected an object");
        user_params = json::object();
    }
    json defaults = params_defaults(cfg.experiment);
    cfg.params = merge_params(defaults, user_params, "params", bad);
    if (bad.empty() && group_ok) check_params(cfg.experiment, cfg.params, cfg.G.r(), bad);

    if (!bad.empty()) return res;

    // ---- effective config + digest ----
    json eff;
    eff["schema"] = kSchemaVersion;
    eff["experiment"] = cfg.experiment;
    eff["master_seed"] = cfg.master_seed;
    eff["out"] = cfg.out_dir;
    eff["group"] = json{{"factors", eff_factors}};
    json step;
    step["type"] = j.at("step").at("type").get<std::string>();
    step["alphas"] = cfg.law.alphas;
    step["factor_laws"] = cfg.law.factor_laws;
    eff["step"] = step;
    if (cfg.has_offspring) eff["offspring"] = eff_offspring;
    eff["params"] = cfg.params;

    cfg.effective = eff;
    cfg.digest = hex_digest(eff.dump());
    res.config = std::move(cfg);
    res.ok = true;
    return res;
}

LoadResult load_and_validate(const std::string& path) {
    return parse_and_validate(read_text_file(path), path);
}

} // namespace brw
