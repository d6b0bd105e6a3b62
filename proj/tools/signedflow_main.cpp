// Command-line front end: analyze scenario topology/connectivity, simulate the
// protocols, and verify theorem-based predictions against simulation.

#include <atomic>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "signedflow/signedflow.hpp"

namespace sf = signedflow;
namespace fs = std::filesystem;

namespace {

struct RunOptions {
    std::optional<double> t_end, step, tol, window_T, epsilon;
};

void apply_overrides(sf::Scenario& sc, const RunOptions& opt) {
    if (opt.t_end) sc.t_end = opt.t_end;
    if (opt.step) sc.step = opt.step;
    if (opt.tol) sc.tol = opt.tol;
}

struct RunArtifacts {
    sf::Trajectory trajectory;
    std::optional<sf::Schedule> gain_trace;
};

RunArtifacts run_protocol(const sf::Scenario& sc, double t_end) {
    if (!sc.x0) throw sf::ScenarioError("scenario '" + sc.name + "' has no x0");
    sf::IntegratorConfig cfg;
    cfg.step = sc.step_or_default();
    switch (sc.protocol) {
        case sf::Protocol::Linear: {
            RunArtifacts out{sf::integrate(sc.schedule, *sc.x0, t_end, cfg), {}};
            out.trajectory.meta.scenario_hash = sf::scenario_hash(sc);
            return out;
        }
        case sf::Protocol::NonlinearAdditiveNode:
        case sf::Protocol::NonlinearAdditiveEdge: {
            const auto variant = sc.protocol == sf::Protocol::NonlinearAdditiveNode
                                     ? sf::AdditiveVariant::NodeEvaluated
                                     : sf::AdditiveVariant::EdgeEvaluated;
            sf::NonlinearRun run =
                sf::integrate_nonlinear_additive(sc.schedule, *sc.nonlinearity, *sc.x0, t_end, cfg, variant);
            run.trajectory.meta.scenario_hash = sf::scenario_hash(sc);
            return {std::move(run.trajectory), std::move(run.gain_trace)};
        }
        case sf::Protocol::GainFlow: {
            sf::NonlinearRun run = sf::integrate_gain_flow(*sc.gain, *sc.x0, t_end, cfg);
            run.trajectory.meta.scenario_hash = sf::scenario_hash(sc);
            return {std::move(run.trajectory), std::move(run.gain_trace)};
        }
    }
    throw std::logic_error("unreachable protocol");
}

/// Prediction appropriate for the protocol: the linear predictors apply
/// directly; for the nonlinear protocols only the modulus-consensus
/// sufficient conditions carry over (USC with bounded weights, or essential
/// connectivity under cut balance), the type staying unresolved.
sf::Outcome predict_for(const sf::Scenario& sc, const sf::ScheduleAnalysis& an) {
    if (sc.protocol == sf::Protocol::Linear) return an.predicted;
    sf::Outcome out;
    if (an.connectivity.usc.holds) {
        out.kind = sf::OutcomeKind::ModulusConsensus;
        out.note = "nonlinear protocol over a USC bounded schedule";
    } else if (an.connectivity.esc && an.connectivity.cut_balance_K) {
        out.kind = sf::OutcomeKind::ModulusConsensus;
        out.note = "nonlinear protocol over an ESC cut-balanced schedule";
    } else {
        out.kind = sf::OutcomeKind::Inconclusive;
        out.note = "no sufficient condition applies to this nonlinear run";
    }
    return out;
}

struct VerifyResult {
    sf::Reconciliation rec;
    nlohmann::json report;
};

VerifyResult verify_scenario(sf::Scenario sc, const RunOptions& opt) {
    apply_overrides(sc, opt);
    const double t_end = sf::default_horizon(sc);
    RunArtifacts run = run_protocol(sc, t_end);

    // Gain-flow runs are predicted from the recorded gain trace (the schedule
    // the trajectory actually experienced); everything else from the schedule.
    const bool post_hoc = sc.protocol == sf::Protocol::GainFlow && run.gain_trace.has_value();
    const sf::Schedule& analyzed = post_hoc ? *run.gain_trace : sc.schedule;
    const sf::ScheduleAnalysis an = sf::analyze(analyzed, opt.window_T, opt.epsilon);
    sf::Outcome predicted = predict_for(sc, an);
    // static bipartite cases predict a concrete limit level |v^T x0|
    if (sc.protocol == sf::Protocol::Linear && an.static_prediction && an.static_prediction->v) {
        double proj = 0.0;
        for (size_t i = 0; i < sc.x0->size(); ++i) proj += (*an.static_prediction->v)[i] * (*sc.x0)[i];
        predicted.x_star = std::abs(proj);
    }
    const sf::Outcome observed = sf::classify(run.trajectory, sc.tol_or_default(), sc.tail_or_default());
    VerifyResult out{sf::reconcile(predicted, observed), {}};
    out.report = sf::reconciliation_json(out.rec);
    out.report["scenario"] = sc.name;
    out.report["t_end"] = t_end;
    if (post_hoc) out.report["analysis_source"] = "recorded gain trace";
    return out;
}

int do_analyze(const std::string& ref, const RunOptions& opt, const std::string& out_path) {
    sf::Scenario sc = sf::resolve_scenario(ref);
    const sf::ScheduleAnalysis an = sf::analyze(sc.schedule, opt.window_T, opt.epsilon);
    nlohmann::json rep = sf::analysis_report_json(sc, an);
    rep["protocol"] = sf::to_string(sc.protocol);
    const std::string text = rep.dump(2) + "\n";
    if (out_path.empty()) std::cout << text;
    else sf::write_text_file(out_path, text);
    return 0;
}

int do_simulate(const std::string& ref, const RunOptions& opt, std::string out_prefix,
                const std::string& format) {
    sf::Scenario sc = sf::resolve_scenario(ref);
    apply_overrides(sc, opt);
    const double t_end = sf::default_horizon(sc);
    const RunArtifacts run = run_protocol(sc, t_end);
    if (out_prefix.empty()) out_prefix = sc.name + "_traj";
    if (format == "csv" || format == "both") {
        sf::write_text_file(out_prefix + ".csv", sf::trajectory_csv(run.trajectory));
        std::cout << out_prefix + ".csv" << '\n';
    }
    if (format == "json" || format == "both") {
        sf::write_text_file(out_prefix + ".json", sf::trajectory_json(run.trajectory).dump(2) + "\n");
        std::cout << out_prefix + ".json" << '\n';
    }
    if (run.gain_trace) {
        sf::write_text_file(out_prefix + "_gains.json",
                            sf::schedule_to_json(*run.gain_trace).dump(2) + "\n");
        std::cout << out_prefix + "_gains.json" << '\n';
    }
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const sf::ScenarioError*>(&e)) return 2;
    if (dynamic_cast<const sf::CapExceeded*>(&e)) return 3;
    if (dynamic_cast<const sf::IntegratorError*>(&e)) return 4;
    return 1;
}

int do_verify(const std::string& ref, const RunOptions& opt, int jobs) {
    std::vector<std::string> files;
    if (fs::is_directory(ref)) {
        for (const auto& entry : fs::directory_iterator(ref))
            if (entry.path().extension() == ".json") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw sf::ScenarioError("no scenario files in '" + ref + "'");
    } else {
        files.push_back(ref);
    }

    struct Row {
        std::string name;
        int code = 0;
        std::string text;
    };
    std::vector<Row> rows(files.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (size_t i; (i = next.fetch_add(1)) < files.size();) {
            Row& row = rows[i];
            row.name = files[i];
            try {
                VerifyResult res = verify_scenario(sf::resolve_scenario(files[i]), opt);
                row.code = res.rec.verdict == sf::Verdict::Conflict ? 5 : 0;
                row.text = res.report.dump(2) + "\n";
            } catch (const std::exception& e) {
                row.code = exit_code_for(e);
                row.text = std::string("error: ") + e.what() + "\n";
            }
        }
    };
    if (jobs > 1 && files.size() > 1) {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    } else {
        work();
    }

    int rc = 0;
    for (const Row& row : rows) {
        if (files.size() > 1) std::cout << "== " << row.name << "\n";
        std::cout << row.text;
        if (row.code == 5) rc = 5;
        else if (row.code != 0 && rc == 0) rc = row.code;
    }
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"signedflow: outcome prediction and simulation of opinion dynamics over signed graphs"};
    app.require_subcommand(1);

    RunOptions opt;
    std::string ref, out_path, format = "both";
    int jobs = 1;
    double a31 = 1.0, a32 = 1.0;
    std::function<int()> action;

    auto add_window_flags = [&](CLI::App* cmd) {
        cmd->add_option("--window-T", opt.window_T, "window length for the USC/UQSC checks");
        cmd->add_option("--epsilon", opt.epsilon, "skeleton threshold for the USC/UQSC checks");
    };
    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--t-end", opt.t_end, "simulation horizon");
        cmd->add_option("--step", opt.step, "integrator step");
        cmd->add_option("--tol", opt.tol, "classifier tolerance");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "topology + connectivity report (JSON)");
    analyze->add_option("scenario", ref, "scenario file or builtin name")->required();
    analyze->add_option("--out", out_path, "write the report to a file");
    add_window_flags(analyze);
    analyze->callback([&]() { action = [&]() { return do_analyze(ref, opt, out_path); }; });

    CLI::App* simulate = app.add_subcommand("simulate", "integrate and export the trajectory");
    simulate->add_option("scenario", ref, "scenario file or builtin name")->required();
    simulate->add_option("--out", out_path, "output path prefix");
    simulate->add_option("--format", format, "csv|json|both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    add_run_flags(simulate);
    simulate->callback([&]() { action = [&]() { return do_simulate(ref, opt, out_path, format); }; });

    CLI::App* verify = app.add_subcommand("verify", "predict, simulate, classify, reconcile");
    verify->add_option("scenario", ref, "scenario file, builtin name, or directory")->required();
    verify->add_option("--jobs", jobs, "parallel workers for directory verification")
        ->check(CLI::PositiveNumber);
    add_run_flags(verify);
    add_window_flags(verify);
    verify->callback([&]() { action = [&]() { return do_verify(ref, opt, jobs); }; });

    CLI::App* examples = app.add_subcommand("examples", "built-in scenarios");
    examples->require_subcommand(1);
    CLI::App* ex_list = examples->add_subcommand("list", "list built-in scenarios");
    ex_list->callback([&]() {
        action = []() {
            for (const std::string& n : sf::builtin_names()) std::cout << n << '\n';
            return 0;
        };
    });
    CLI::App* ex_run = examples->add_subcommand("run", "verify a built-in scenario");
    ex_run->add_option("name", ref, "builtin name")->required();
    ex_run->add_option("--a31", a31, "weight of the (3<-1) arc (example1)");
    ex_run->add_option("--a32", a32, "weight of the (3<-2) arc (example1)");
    ex_run->add_option("--out", out_path, "also export the scenario JSON");
    add_run_flags(ex_run);
    ex_run->callback([&]() {
        action = [&]() {
            std::optional<sf::Scenario> sc =
                ref == "example1" ? std::optional(sf::builtin_example1(a31, a32))
                                  : sf::builtin_scenario(ref);
            if (!sc) throw sf::ScenarioError("unknown builtin '" + ref + "'");
            if (!out_path.empty())
                sf::write_text_file(out_path, sf::scenario_to_json(*sc).dump(2) + "\n");
            VerifyResult res = verify_scenario(*sc, opt);
            std::cout << res.report.dump(2) << "\n";
            return res.rec.verdict == sf::Verdict::Conflict ? 5 : 0;
        };
    });

    CLI11_PARSE(app, argc, argv);
    try {
        return action ? action() : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}
