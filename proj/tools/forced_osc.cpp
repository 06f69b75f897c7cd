// forced-osc: scenario-driven front end for the forced-oscillations toolkit.
//
//   forced-osc run scenarios/pendulum_forced.scn --out out/pf --jobs 2
//   forced-osc list-gallery
//
// Exit codes: 0 every stage passed, 1 a stage failed, 2 the scenario did not
// parse or validate, 3 anything else.

#include "forced_osc/errors.hpp"
#include "forced_osc/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace forced_osc;

void print_record(const std::string& stage, const std::string& kind, const std::string& message) {
    const nlohmann::ordered_json j{{"stage", stage}, {"kind", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

int execute(const std::string& file, const std::string& stage, const RunOptions& opt, bool strict) {
    Scenario sc;
    try {
        sc = parse_scenario(file, strict);
    } catch (const Error& e) {
        print_record("parse", std::string(to_string(e.kind())), e.what());
        return 2;
    }
    for (const auto& w : sc.warnings) std::cerr << "warning: " << w << '\n';
    if (!stage.empty()) sc.pipeline = {stage};
    try {
        const auto res = run_scenario(std::move(sc), opt);
        for (const auto& f : res.failures) print_record(f.stage, f.kind, f.message);
        std::cout << (res.exit_code == 0 ? "PASS " : "FAIL ") << file << " -> " << res.out_dir << '\n';
        return res.exit_code;
    } catch (const std::exception& e) {
        print_record("run", "InternalError", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic segments, cutoffs and periodic orbits of forced mechanical systems"};
    app.set_version_flag("--version", std::string(FORCED_OSC_VERSION));
    app.require_subcommand(1);

    std::string file;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    int jobs = 1;
    bool strict = false;
    bool no_contradiction_check = false;

    auto with_flags = [&](CLI::App* sub) {
        sub->add_option("file", file, "Scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (default: the scenario's output_dir)");
        sub->add_option("--seed", seed, "Override the scenario seed");
        sub->add_option("--tol", tol, "Shooting residual tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--jobs", jobs, "Worker threads for the multistart search")->check(CLI::Range(1, 256));
        sub->add_flag("--strict", strict, "Reject unknown scenario keys");
        sub->add_flag("--no-contradiction-check", no_contradiction_check,
                      "Do not fail when a verified segment yields no orbit");
        return sub;
    };
    auto* run = with_flags(app.add_subcommand("run", "Run the scenario's whole pipeline"));
    auto* verify = with_flags(app.add_subcommand("verify-segment", "Verify the segment's exit faces and index"));
    auto* find = with_flags(app.add_subcommand("find-orbits", "Search the segment for periodic orbits"));
    auto* lemma = with_flags(app.add_subcommand("lemma-demo", "Tabulate the geodesic-tracking deviation"));
    auto* gallery = app.add_subcommand("list-gallery", "List the gallery systems and pipeline stages");

    CLI11_PARSE(app, argc, argv);

    if (gallery->parsed()) {
        std::cout << "systems:";
        for (const auto& g : gallery_names()) std::cout << ' ' << g;
        std::cout << "\nstages:";
        for (const auto& s : stage_names()) std::cout << ' ' << s;
        std::cout << '\n';
        return 0;
    }
    RunOptions opt;
    opt.out_dir = out;
    opt.seed = seed;
    opt.tol = tol;
    opt.jobs = jobs;
    opt.contradiction_check = !no_contradiction_check;
    if (run->parsed()) return execute(file, "", opt, strict);
    if (verify->parsed()) return execute(file, "verify-segment", opt, strict);
    if (find->parsed()) return execute(file, "find-orbits", opt, strict);
    if (lemma->parsed()) return execute(file, "lemma-demo", opt, strict);
    return 3;
}
