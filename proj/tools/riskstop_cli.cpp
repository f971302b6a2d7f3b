// SPDX-License-Identifier: MIT
//
// riskstop: lower/upper bounds for optimal stopping under divergence risk
// measures, plus an exact-lattice oracle suite and a path exporter.
//
// Exit codes: 0 success, 1 bad input or config, 2 numeric failure
// (bracketing, rank, LP), 3 oracle-suite failure.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "riskstop/config.hpp"
#include "riskstop/errors.hpp"
#include "riskstop/report.hpp"

namespace {

using namespace riskstop;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> risks;
    int paths = 0;
    int inner = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool fast = false;
    bool no_timing = false;
    std::string out_path;
    std::string format;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool many_risks) {
    cmd->add_option("--config", o.config_path, "Config file (TOML or JSON)")
        ->check(CLI::ExistingFile);
    auto* risk = cmd->add_option(
        "--risk", o.risks,
        "Risk measure: avar:A, entropic:G, power:P or neutral");
    if (!many_risks) risk->expected(0, 1);
    cmd->add_option("--paths", o.paths,
                    "Training and testing path count (overrides config)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--inner", o.inner,
                    "Inner resimulation count for the upper bound")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Master seed")
        ->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_flag("--fast", o.fast,
                  "CI profile: 5000 training/testing paths, 200 inner");
    cmd->add_flag("--no-timing", o.no_timing,
                  "Report seconds as 0 so reruns are byte-identical");
    cmd->add_option("--out", o.out_path, "Write the report here, not stdout");
    cmd->add_option("--format", o.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}));
}

RunConfig load_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty())
        cfg = RunConfig::from_json(parse_config_file(o.config_path));
    if (o.fast) {
        cfg.n_training = 5000;
        cfg.n_testing = 5000;
        cfg.n_inner = 200;
    }
    if (o.paths > 0) {
        cfg.n_training = o.paths;
        cfg.n_testing = o.paths;
    }
    if (o.inner > 0) cfg.n_inner = o.inner;
    if (o.seed_given) cfg.seed = o.seed;
    if (!o.format.empty()) cfg.format = o.format;
    if (!o.risks.empty()) {
        cfg.risks.clear();
        for (const auto& text : o.risks) cfg.risks.push_back(parse_risk(text));
    }
    cfg.validate();
    return cfg;
}

void emit_report(const std::vector<ReportRow>& rows, const RunConfig& cfg,
                 const CommonOpts& o) {
    std::string text;
    if (cfg.format == "json") {
        text = report_json(rows, !o.no_timing).dump(2);
        text += '\n';
    } else {
        text = report_csv(rows, !o.no_timing);
    }
    if (o.out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(o.out_path, std::ios::binary);
        if (!out)
            throw ValidationError("cannot open output file " + o.out_path);
        out << text;
    }
}

int cmd_price(const CommonOpts& o) {
    const RunConfig cfg = load_config(o);
    if (cfg.risks.empty())
        throw ValidationError(
            "price: no risk measure; pass --risk or list one in the config");
    const std::vector<ReportRow> rows{price_row(cfg, cfg.risks.front())};
    emit_report(rows, cfg, o);
    return 0;
}

int cmd_table(const CommonOpts& o) {
    const RunConfig cfg = load_config(o);
    emit_report(price_table(cfg), cfg, o);
    return 0;
}

int cmd_simulate(const CommonOpts& o) {
    const RunConfig cfg = load_config(o);
    const GbmModel model(cfg.market, cfg.grid);
    const PathSet paths = model.sample(cfg.n_training, cfg.seed);
    if (o.out_path.empty()) {
        write_paths_csv(paths, std::cout);
    } else {
        std::ofstream out(o.out_path, std::ios::binary);
        if (!out)
            throw ValidationError("cannot open output file " + o.out_path);
        write_paths_csv(paths, out);
    }
    return 0;
}

int cmd_oracle(const std::vector<std::string>& fixture_args) {
    std::vector<NamedFixture> fixtures;
    for (const auto& arg : fixture_args) {
        if (arg == "builtin") {
            for (auto& f : builtin_fixtures()) fixtures.push_back(std::move(f));
            continue;
        }
        std::ifstream in(arg);
        if (!in) throw ValidationError("cannot open fixture file " + arg);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("fixture " + arg + ": " + e.what());
        }
        fixtures.push_back(
            {std::filesystem::path(arg).stem().string(), lattice_from_json(doc)});
    }
    const OracleOutcome oc = run_oracle_suite(fixtures, std::cout);
    std::cout << oc.passed << " passed, " << oc.failed << " failed, "
              << oc.skipped << " skipped\n";
    return oc.ok() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Optimal stopping bounds under divergence risk measures: "
        "regression lower bounds, nested-simulation upper bounds, and an "
        "exact scenario-tree oracle suite."};
    app.require_subcommand(1);

    CommonOpts price_opts, table_opts, sim_opts;
    std::vector<std::string> fixture_args{"builtin"};

    auto* price = app.add_subcommand(
        "price", "Lower and upper bound for a single risk measure");
    add_common(price, price_opts, false);

    auto* table = app.add_subcommand(
        "table", "One report row per configured risk measure");
    add_common(table, table_opts, true);

    auto* oracle = app.add_subcommand(
        "oracle", "Run the exact-lattice identity checks");
    oracle
        ->add_option("fixtures", fixture_args,
                     "'builtin' or paths to lattice JSON files")
        ->expected(0, 64);

    auto* simulate = app.add_subcommand(
        "simulate", "Write simulated price paths as CSV");
    add_common(simulate, sim_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (price->parsed()) return cmd_price(price_opts);
        if (table->parsed()) return cmd_table(table_opts);
        if (simulate->parsed()) return cmd_simulate(sim_opts);
        if (oracle->parsed()) return cmd_oracle(fixture_args);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
