// Command-line front end: reproducible experiments over the simulator, the
// exact solver, the membership checker, and the verification reports.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lbq/analysis.hpp"
#include "lbq/exact.hpp"
#include "lbq/simulate.hpp"

namespace {

constexpr const char *kVersion = "lbq 0.1.0";

struct Options {
    std::string experiment;
    std::string policy = "jsq";
    std::int64_t d = 2;
    std::string sampling = "with";
    std::vector<std::int64_t> n_list{8};
    std::vector<double> alpha_list{0.5};
    std::int64_t b = 3;
    std::int64_t r = 1;
    double horizon = -1.0; // negative = derive defaults
    double warmup = -1.0;
    std::int64_t batches = 20;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::int64_t replicas = 1;
    std::int64_t workers = 2;
    std::string holding = "exponential";
    std::int64_t r_max = 1;
    std::optional<double> lambda_override;
    std::string mode = "auto"; // check-pi: enumerate | analytic | auto
    std::string out;
    std::string format = "csv";
    bool yes = false;
    std::string config_path;
    std::string pi_out;
    std::int64_t cap = 10'000'000;
    std::int64_t exact_cap = 100'000; // max states for exact provenance
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[40];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string join_i64(const std::vector<std::int64_t> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_f(const std::vector<double> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt(v[i]);
    }
    return s;
}

// Resolved config echoed into every output; keys match the CLI flags so the
// block can be fed back through --config.
std::map<std::string, std::string> config_echo(const Options &o) {
    std::map<std::string, std::string> kv;
    kv["experiment"] = o.experiment;
    kv["policy"] = o.policy;
    kv["d"] = std::to_string(o.d);
    kv["sampling"] = o.sampling;
    kv["N"] = join_i64(o.n_list);
    kv["alpha"] = join_f(o.alpha_list);
    kv["b"] = std::to_string(o.b);
    kv["r"] = std::to_string(o.r);
    kv["r-max"] = std::to_string(o.r_max);
    if (o.lambda_override) kv["lambda"] = fmt(*o.lambda_override);
    if (o.experiment == "simulate" || o.experiment == "sweep" ||
        o.experiment == "fig-scaling") {
        kv["horizon"] = fmt(o.horizon);
        kv["warmup"] = fmt(o.warmup);
        kv["batches"] = std::to_string(o.batches);
        kv["seed"] = std::to_string(o.seed);
        kv["replicas"] = std::to_string(o.replicas);
        kv["holding"] = o.holding;
    }
    if (o.experiment == "verify" && o.seed_set) {
        kv["horizon"] = fmt(o.horizon);
        kv["warmup"] = fmt(o.warmup);
        kv["batches"] = std::to_string(o.batches);
        kv["seed"] = std::to_string(o.seed);
        kv["replicas"] = std::to_string(o.replicas);
        kv["holding"] = o.holding;
    }
    if (o.experiment == "check-pi") kv["mode"] = o.mode;
    if (o.yes) kv["yes"] = "";
    kv["workers"] = std::to_string(o.workers);
    kv["format"] = o.format;
    return kv;
}

using Cell = std::variant<std::int64_t, double, std::string>;

std::string cell_csv(const Cell &c) {
    if (std::holds_alternative<std::int64_t>(c))
        return std::to_string(std::get<std::int64_t>(c));
    if (std::holds_alternative<double>(c)) return fmt(std::get<double>(c));
    return std::get<std::string>(c);
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> extra_comments; // e.g. flatness summaries
};

void write_output(const Options &o, const Table &table, double wall_seconds) {
    std::ostringstream body;
    const auto kv = config_echo(o);
    if (o.format == "csv") {
        body << "# " << kVersion << "\n";
        body << "# generated: " << timestamp_utc() << " wall_seconds: " << fmt(wall_seconds)
             << "\n";
        for (const auto &[k, v] : kv) body << "# config: " << k << "=" << v << "\n";
        for (const auto &c : table.extra_comments) body << "# " << c << "\n";
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            if (i) body << ",";
            body << table.columns[i];
        }
        body << "\n";
        for (const auto &row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) body << ",";
                body << cell_csv(row[i]);
            }
            body << "\n";
        }
    } else {
        nlohmann::ordered_json doc;
        doc["version"] = kVersion;
        doc["generated"] = timestamp_utc();
        doc["wall_seconds"] = wall_seconds;
        nlohmann::ordered_json cfg;
        for (const auto &[k, v] : kv) cfg[k] = v;
        doc["config"] = cfg;
        for (const auto &c : table.extra_comments) doc["notes"].push_back(c);
        doc["columns"] = table.columns;
        auto &rows = doc["rows"] = nlohmann::ordered_json::array();
        for (const auto &row : table.rows) {
            nlohmann::ordered_json jrow = nlohmann::ordered_json::array();
            for (const auto &c : row) {
                if (std::holds_alternative<std::int64_t>(c))
                    jrow.push_back(std::get<std::int64_t>(c));
                else if (std::holds_alternative<double>(c))
                    jrow.push_back(std::get<double>(c));
                else
                    jrow.push_back(std::get<std::string>(c));
            }
            rows.push_back(std::move(jrow));
        }
        body << doc.dump(2) << "\n";
    }

    if (o.out.empty()) {
        std::cout << body.str();
        return;
    }
    std::string path = o.out;
    const char *outdir = std::getenv("LBQ_OUTDIR");
    if (outdir && !path.empty() && path.front() != '/')
        path = std::string(outdir) + "/" + path;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file " + path);
    f << body.str();
    std::cerr << "wrote " << path << "\n";
}

lbq::Policy resolve_policy(const Options &o) {
    if (o.policy == "jsq") return lbq::Policy::jsq();
    if (o.policy == "i1f") return lbq::Policy::idle_one_first();
    if (o.policy == "jiq") return lbq::Policy::join_idle_queue();
    if (o.policy == "random") return lbq::Policy::random();
    if (o.policy == "pod")
        return lbq::Policy::power_of_d(o.d, o.sampling == "without"
                                                ? lbq::Sampling::WithoutReplacement
                                                : lbq::Sampling::WithReplacement);
    throw CLI::ValidationError("--policy", "unknown policy " + o.policy);
}

lbq::SimConfig resolve_sim_config(const Options &o, const lbq::Params &p) {
    lbq::SimConfig cfg;
    const double alpha_pow = std::pow(static_cast<double>(p.n_servers), p.alpha);
    cfg.warmup = o.warmup >= 0.0 ? o.warmup : std::max(10.0, 5.0 * alpha_pow);
    cfg.horizon = o.horizon >= 0.0 ? o.horizon : 20.0 * cfg.warmup;
    cfg.batches = o.batches;
    cfg.seed = o.seed;
    cfg.replicas = o.replicas;
    cfg.workers = o.workers;
    cfg.r_max = o.r_max;
    cfg.holding = o.holding == "mean" ? lbq::HoldingTimes::MeanHolding
                                      : lbq::HoldingTimes::Exponential;
    const auto bp = lbq::make_bound_params(std::max<std::int64_t>(o.r, o.r_max), p);
    cfg.kbar = bp.kbar;
    return cfg;
}

std::vector<std::string> result_columns(std::int64_t b, std::int64_t r_max) {
    std::vector<std::string> cols = {"policy", "d",      "sampling", "N",
                                     "alpha",  "b",      "lambda",   "seed",
                                     "provenance", "events"};
    for (std::int64_t i = 1; i <= b; ++i) {
        cols.push_back("es" + std::to_string(i));
        cols.push_back("es" + std::to_string(i) + "_se");
    }
    cols.insert(cols.end(), {"p_wait", "p_wait_se", "p_block", "p_block_se", "ew", "ew_se",
                             "etq", "etq_se"});
    for (std::int64_t r = 1; r <= r_max; ++r) {
        cols.push_back("eh" + std::to_string(r));
        cols.push_back("eh" + std::to_string(r) + "_se");
    }
    cols.insert(cols.end(),
                {"scaled_es2", "scaled_es3", "resid_s3_identity", "resid_work_conservation",
                 "resid_littles_law", "resid_littles_law_waiting"});
    return cols;
}

std::vector<Cell> result_row(const Options &o, const lbq::Params &p,
                             const lbq::MetricsEstimate &m) {
    std::vector<Cell> row;
    row.emplace_back(o.policy);
    row.emplace_back(o.policy == "pod" ? std::to_string(o.d) : std::string("-"));
    row.emplace_back(o.policy == "pod" ? o.sampling : std::string("-"));
    row.emplace_back(p.n_servers);
    row.emplace_back(p.alpha);
    row.emplace_back(p.buffer_levels);
    row.emplace_back(p.lambda);
    row.emplace_back(static_cast<std::int64_t>(o.seed));
    row.emplace_back(std::string(m.provenance == lbq::Provenance::Exact ? "exact" : "simulated"));
    row.emplace_back(m.events);
    for (const auto &e : m.es) {
        row.emplace_back(e.value);
        row.emplace_back(e.se);
    }
    for (const auto *e : {&m.p_wait, &m.p_block, &m.ew, &m.etq}) {
        row.emplace_back(e->value);
        row.emplace_back(e->se);
    }
    for (const auto &e : m.eh) {
        row.emplace_back(e.value);
        row.emplace_back(e.se);
    }
    const double n = static_cast<double>(p.n_servers);
    row.emplace_back(p.buffer_levels >= 2
                         ? std::pow(n, 1.0 - p.alpha) * m.es[1].value
                         : 0.0);
    row.emplace_back(p.buffer_levels >= 3 ? n * m.es[2].value : 0.0);
    const auto identities = lbq::verify_identities(m, p);
    for (const auto &rep : identities) row.emplace_back(rep.lhs - rep.rhs);
    return row;
}

lbq::MetricsEstimate solve_exact_point(const Options &o, const lbq::Policy &policy,
                                       const lbq::Params &p) {
    auto space = lbq::enumerate_states(p, o.cap);
    auto q = lbq::build_generator(space, policy, p);
    auto dist = lbq::stationary_distribution(q);
    const auto bp = lbq::make_bound_params(std::max<std::int64_t>(o.r, o.r_max), p);
    auto m = lbq::exact_metrics(space, dist, policy, p, o.r_max, bp.kbar);
    if (!o.pi_out.empty()) lbq::write_pi_csv(o.pi_out, space, dist);
    return m;
}

lbq::Params params_for(const Options &o, std::int64_t n, double alpha) {
    return lbq::make_params(n, alpha, o.b, o.lambda_override);
}

int run_exact(const Options &o) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!o.pi_out.empty() && o.n_list.size() * o.alpha_list.size() != 1)
        throw CLI::ValidationError("--pi-out", "stationary export needs a single grid point");
    Table table;
    table.columns = result_columns(o.b, o.r_max);
    const auto policy = resolve_policy(o);
    for (double alpha : o.alpha_list)
        for (std::int64_t n : o.n_list) {
            const auto p = params_for(o, n, alpha);
            table.rows.push_back(result_row(o, p, solve_exact_point(o, policy, p)));
        }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(o, table, wall);
    return 0;
}

int run_simulate(const Options &o, bool grid) {
    if (!o.seed_set) throw CLI::ValidationError("--seed", "simulation requires a seed");
    if (!grid && (o.n_list.size() != 1 || o.alpha_list.size() != 1))
        throw CLI::ValidationError("--N/--alpha",
                                   "simulate takes a single point; use sweep for grids");
    const auto t0 = std::chrono::steady_clock::now();
    const auto policy = resolve_policy(o);

    std::vector<lbq::SweepPoint> points;
    std::vector<lbq::Params> params;
    for (double alpha : o.alpha_list)
        for (std::int64_t n : o.n_list) {
            const auto p = params_for(o, n, alpha);
            points.push_back({policy, p, resolve_sim_config(o, p)});
            params.push_back(p);
        }
    auto results = lbq::simulate_sweep(points, grid ? o.workers : 1);

    Table table;
    table.columns = result_columns(o.b, o.r_max);
    bool any_error = false;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].metrics) {
            table.rows.push_back(result_row(o, params[i], *results[i].metrics));
        } else {
            any_error = true;
            std::cerr << "point " << i << " failed: " << results[i].error << "\n";
        }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(o, table, wall);
    return any_error ? 2 : 0;
}

int run_check_pi(const Options &o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto policy = resolve_policy(o);
    Table table;
    table.columns = {"policy",       "d",            "sampling",      "N",
                     "alpha",        "b",            "r",             "mode",
                     "member",       "cond1_holds",  "cond1_margin",  "cond1_witness",
                     "cond2_holds",  "cond2_margin", "cond2_witness", "cond3_holds",
                     "cond3_margin", "cond3_witness"};
    for (double alpha : o.alpha_list)
        for (std::int64_t n : o.n_list) {
            const auto p = params_for(o, n, alpha);
            lbq::PiCheckMode mode;
            if (o.mode == "enumerate") {
                mode = lbq::PiCheckMode::Enumerate;
            } else if (o.mode == "analytic") {
                mode = lbq::PiCheckMode::Analytic;
            } else {
                mode = lbq::state_space_size(n, o.b) <= o.cap ? lbq::PiCheckMode::Enumerate
                                                              : lbq::PiCheckMode::Analytic;
            }
            const auto rep = lbq::check_pi_membership(policy, p, o.r, mode, o.cap);
            auto witness = [](const lbq::PiCondition &c) {
                return c.witness ? lbq::to_string(*c.witness) : std::string("-");
            };
            table.rows.push_back(
                {o.policy, o.policy == "pod" ? std::to_string(o.d) : std::string("-"),
                 o.policy == "pod" ? o.sampling : std::string("-"), n, alpha, o.b, o.r,
                 std::string(mode == lbq::PiCheckMode::Enumerate ? "enumerate" : "analytic"),
                 std::string(rep.member ? "true" : "false"),
                 std::string(rep.cond1.holds ? "true" : "false"), rep.cond1.margin,
                 witness(rep.cond1), std::string(rep.cond2.holds ? "true" : "false"),
                 rep.cond2.margin, witness(rep.cond2),
                 std::string(rep.cond3.holds ? "true" : "false"), rep.cond3.margin,
                 witness(rep.cond3)});
        }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(o, table, wall);
    return 0;
}

int run_verify(const Options &o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto policy = resolve_policy(o);
    Table table;
    table.columns = {"policy", "d",   "sampling",      "N",   "alpha", "b",
                     "lambda", "r",   "claim",         "provenance",   "premise_holds",
                     "lhs",    "lhs_se", "rhs",        "satisfied",    "note"};
    bool any_failed = false;

    for (double alpha : o.alpha_list)
        for (std::int64_t n : o.n_list) {
            const auto p = params_for(o, n, alpha);
            const auto bp = lbq::make_bound_params(o.r, p);
            std::vector<lbq::VerificationReport> reports;
            const bool exact_feasible = lbq::state_space_size(n, o.b) <= o.exact_cap;
            if (exact_feasible) {
                auto space = lbq::enumerate_states(p, o.exact_cap);
                auto dist = lbq::stationary_distribution(lbq::build_generator(space, policy, p));
                auto m = lbq::exact_metrics(space, dist, policy, p, o.r, bp.kbar);
                for (auto &rep : lbq::verify_identities(m, p)) reports.push_back(rep);
                reports.push_back(lbq::ssc_tail(space, dist, bp, p));
                reports.push_back(lbq::verify_moment_bound(m, p, bp));
                for (auto &rep : lbq::verify_scaling_bounds(m, p, bp)) reports.push_back(rep);
                auto scan = lbq::drift_bound_scan(policy, p, bp, o.exact_cap);
                reports.push_back(scan.report);
            } else {
                if (!o.seed_set)
                    throw CLI::ValidationError(
                        "--seed", "state space too large for exact verify; provide a seed");
                lbq::SimConfig cfg = resolve_sim_config(o, p);
                cfg.r_max = o.r;
                cfg.kbar = bp.kbar;
                auto m = lbq::simulate(policy, p, cfg);
                for (auto &rep : lbq::verify_identities(m, p)) reports.push_back(rep);
                reports.push_back(lbq::verify_moment_bound(m, p, bp));
                for (auto &rep : lbq::verify_scaling_bounds(m, p, bp)) reports.push_back(rep);
            }
            for (const auto &rep : reports) {
                if (rep.satisfied.has_value() && !*rep.satisfied) any_failed = true;
                table.rows.push_back(
                    {o.policy, o.policy == "pod" ? std::to_string(o.d) : std::string("-"),
                     o.policy == "pod" ? o.sampling : std::string("-"), n, alpha, o.b,
                     p.lambda, o.r, rep.claim,
                     std::string(rep.provenance == lbq::Provenance::Exact ? "exact"
                                                                          : "simulated"),
                     std::string(rep.premise_holds ? "true" : "false"), rep.lhs, rep.lhs_se,
                     rep.rhs,
                     rep.satisfied ? std::string(*rep.satisfied ? "true" : "false")
                                   : std::string("-"),
                     rep.note.empty() ? std::string("-") : rep.note});
            }
        }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(o, table, wall);
    if (any_failed) {
        std::cerr << "verification failures present\n";
        return 1;
    }
    return 0;
}

// Mixing-aware defaults for the scaling experiment: the slow component of
// the chain relaxes on a timescale tau ~ 0.4 N^(2 alpha - 1) (measured), so
// warmup and measurement windows scale with it.
lbq::SimConfig fig_config(const Options &o, const lbq::Params &p) {
    lbq::SimConfig cfg;
    const double tau =
        std::max(1.0, 0.4 * std::pow(static_cast<double>(p.n_servers), 2.0 * p.alpha - 1.0));
    cfg.warmup = o.warmup >= 0.0 ? o.warmup : std::max(50.0, 2.5 * tau);
    cfg.horizon = o.horizon >= 0.0 ? o.horizon : cfg.warmup + std::max(10'000.0, 5.0 * tau);
    cfg.batches = o.batches;
    cfg.seed = o.seed;
    cfg.replicas = o.replicas > 1 ? o.replicas : 2;
    cfg.workers = o.workers;
    cfg.r_max = o.r_max;
    cfg.holding = o.holding == "exponential" ? lbq::HoldingTimes::Exponential
                                             : lbq::HoldingTimes::MeanHolding;
    const auto bp = lbq::make_bound_params(std::max<std::int64_t>(o.r, o.r_max), p);
    cfg.kbar = bp.kbar;
    return cfg;
}

int run_fig_scaling(Options o) {
    if (!o.seed_set) throw CLI::ValidationError("--seed", "fig-scaling requires a seed");
    if (o.n_list.empty() || o.alpha_list.empty())
        throw CLI::ValidationError("--N/--alpha", "grids must be nonempty");
    if (o.holding.empty() || o.holding == "exponential") o.holding = "mean";
    const auto t0 = std::chrono::steady_clock::now();
    const auto policy = resolve_policy(o);

    std::vector<lbq::SweepPoint> points;
    std::vector<lbq::Params> params;
    double est_events = 0.0;
    for (double alpha : o.alpha_list)
        for (std::int64_t n : o.n_list) {
            const auto p = params_for(o, n, alpha);
            const auto cfg = fig_config(o, p);
            est_events += static_cast<double>(cfg.replicas) * 2.0 *
                          static_cast<double>(n) * cfg.horizon;
            points.push_back({policy, p, cfg});
            params.push_back(p);
        }
    std::cerr << "estimated events: " << fmt(est_events) << "\n";
    if (est_events > 1e10 && !o.yes) {
        std::cerr << "budget above 1e10 events; rerun with --yes to proceed\n";
        return 2;
    }

    auto results = lbq::simulate_sweep(points, 1); // replicas already use both workers
    Table table;
    table.columns = result_columns(o.b, o.r_max);
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].metrics) throw std::runtime_error(results[i].error);
        table.rows.push_back(result_row(o, params[i], *results[i].metrics));
    }
    // flatness of N^(1-alpha) E[S_2] across N, one statistic per alpha
    std::size_t idx = 0;
    for (double alpha : o.alpha_list) {
        double lo = 1e300, hi = 0.0;
        for (std::size_t j = 0; j < o.n_list.size(); ++j, ++idx) {
            const auto &m = *results[idx].metrics;
            const double scaled =
                std::pow(static_cast<double>(o.n_list[j]), 1.0 - alpha) * m.es[1].value;
            lo = std::min(lo, scaled);
            hi = std::max(hi, scaled);
        }
        std::ostringstream line;
        line << "flatness alpha=" << fmt(alpha) << ": max/min=" << fmt(hi / lo);
        table.extra_comments.push_back(line.str());
        std::cerr << line.str() << "\n";
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_output(o, table, wall);
    return 0;
}

CLI::Option *last_opt(CLI::App *cmd) {
    return cmd->get_options().back()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

void add_common(CLI::App *cmd, Options &o) {
    cmd->add_option("--config", o.config_path,
                    "key=value file; command-line flags take precedence");
    last_opt(cmd);
    cmd->add_option("--experiment", o.experiment)
        ->check(CLI::IsMember({"simulate", "exact", "check-pi", "verify", "sweep",
                               "fig-scaling"}))
        ->group(""); // config-file key; must match the subcommand
    last_opt(cmd);
    cmd->add_option("--policy", o.policy)
        ->check(CLI::IsMember({"jsq", "i1f", "pod", "jiq", "random"}));
    last_opt(cmd);
    cmd->add_option("--d", o.d)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--sampling", o.sampling)->check(CLI::IsMember({"with", "without"}));
    last_opt(cmd);
    cmd->add_option("--N", o.n_list)->delimiter(',')->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--alpha", o.alpha_list)->delimiter(',');
    last_opt(cmd);
    cmd->add_option("--b", o.b)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--r", o.r)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--r-max", o.r_max)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--lambda", o.lambda_override);
    last_opt(cmd);
    cmd->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--out", o.out);
    last_opt(cmd);
    cmd->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));
    last_opt(cmd);
    cmd->add_option("--cap", o.cap)->check(CLI::PositiveNumber);
    last_opt(cmd);
}

void add_sim_flags(CLI::App *cmd, Options &o, std::vector<CLI::Option *> &seed_opts) {
    cmd->add_option("--horizon", o.horizon);
    last_opt(cmd);
    cmd->add_option("--warmup", o.warmup);
    last_opt(cmd);
    cmd->add_option("--batches", o.batches)->check(CLI::PositiveNumber);
    last_opt(cmd);
    seed_opts.push_back(cmd->add_option("--seed", o.seed));
    last_opt(cmd);
    cmd->add_option("--replicas", o.replicas)->check(CLI::PositiveNumber);
    last_opt(cmd);
    cmd->add_option("--holding", o.holding)->check(CLI::IsMember({"exponential", "mean"}));
    last_opt(cmd);
    cmd->add_flag("--yes", o.yes);
}

// Turns a flat key=value file into command-line tokens, inserted right after
// the subcommand so explicit flags override the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot read config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#' || line[first] == ';') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--config", "bad config line: " + line);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw CLI::ValidationError("--config", "bad config line: " + line);
        tokens.push_back("--" + key);
        if (!value.empty()) tokens.push_back(value);
    }
    if (args.empty()) return tokens;
    args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    return args;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"load-balanced many-server queues: simulator, exact solver, verifier"};
    app.require_subcommand(1);
    Options o;
    std::vector<CLI::Option *> seed_opts;

    auto *sim = app.add_subcommand("simulate", "event-driven simulation of one point");
    add_common(sim, o);
    add_sim_flags(sim, o, seed_opts);
    auto *sweep = app.add_subcommand("sweep", "simulation over an N x alpha grid");
    add_common(sweep, o);
    add_sim_flags(sweep, o, seed_opts);
    auto *fig = app.add_subcommand("fig-scaling", "scaling experiment over N and alpha grids");
    add_common(fig, o);
    add_sim_flags(fig, o, seed_opts);
    auto *exact = app.add_subcommand("exact", "stationary distribution and exact metrics");
    add_common(exact, o);
    exact->add_option("--pi-out", o.pi_out);
    auto *checkpi = app.add_subcommand("check-pi", "three-condition policy class membership");
    add_common(checkpi, o);
    checkpi->add_option("--mode", o.mode)
        ->check(CLI::IsMember({"auto", "enumerate", "analytic"}));
    auto *verify = app.add_subcommand("verify", "bound and identity verification reports");
    add_common(verify, o);
    add_sim_flags(verify, o, seed_opts);
    verify->add_option("--exact-cap", o.exact_cap)->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> args =
            expand_config(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end()); // CLI11 consumes from the back
        app.parse(args);
        for (const auto *opt : seed_opts)
            if (opt->count() > 0) o.seed_set = true;
        CLI::App *cmd = app.get_subcommands().front();
        const std::string name = cmd->get_name();
        if (!o.experiment.empty() && o.experiment != name)
            throw CLI::ValidationError("--experiment",
                                       "config file experiment=" + o.experiment +
                                           " does not match subcommand " + name);
        o.experiment = name;
        if (name == "exact") return run_exact(o);
        if (name == "simulate") return run_simulate(o, false);
        if (name == "sweep") return run_simulate(o, true);
        if (name == "fig-scaling") return run_fig_scaling(o);
        if (name == "check-pi") return run_check_pi(o);
        if (name == "verify") return run_verify(o);
        std::cerr << "unknown experiment\n";
        return 2;
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
