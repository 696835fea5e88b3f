#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ladder/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string output_dir;
    int workers = 0;
    std::uint64_t root_seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-c,--config", flags.config_path, "experiment config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--output-dir", flags.output_dir, "override the config output directory");
    cmd->add_option("-w,--workers", flags.workers, "override the config worker count")
        ->check(CLI::PositiveNumber);
    cmd->add_option_function<std::uint64_t>(
           "-s,--seed",
           [&flags](std::uint64_t v) {
               flags.root_seed = v;
               flags.seed_given = true;
           },
           "override the config root seed");
}

int run_config_kind(const CommonFlags& flags, ladder::ExperimentKind expected) {
    ladder::ExperimentConfig config = ladder::ExperimentConfig::from_file(flags.config_path);
    if (config.kind != expected) {
        std::cerr << "config kind '" << ladder::to_string(config.kind)
                  << "' does not match the subcommand (expected '"
                  << ladder::to_string(expected) << "')\n";
        return 2;
    }
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    if (flags.workers > 0) config.workers = flags.workers;
    if (flags.seed_given) config.root_seed = flags.root_seed;

    const ladder::ExperimentResult result = ladder::run_experiment(config);
    for (const auto& file : result.files) std::cout << "wrote " << file.string() << "\n";
    std::cout << "report: " << result.report_path.string() << "\n";
    return 0;
}

int run_align(const std::vector<std::string>& files, const std::string& out_path) {
    std::vector<ladder::ObservableTrace> traces;
    traces.reserve(files.size());
    for (const std::string& f : files) traces.push_back(ladder::read_trace_csv(f));

    const double dt = traces.front().times.size() > 1
                          ? traces.front().times[1] - traces.front().times[0]
                          : 0.0;
    for (const auto& trace : traces) {
        if (trace.times.size() != traces.front().times.size()) {
            std::cerr << "traces are not on a common grid\n";
            return 2;
        }
    }
    std::vector<std::vector<double>> means;
    for (const auto& trace : traces) means.push_back(trace.mean_x);
    const std::vector<double> shifts = ladder::time_shift_align(means, dt);

    nlohmann::json j;
    j["software"] = {{"name", ladder::software_name}, {"version", ladder::software_version}};
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
        rows.push_back({{"trace", files[i]}, {"shift", shifts[i]}});
        std::cout << files[i] << "  shift " << shifts[i] << "\n";
    }
    j["shifts"] = rows;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot open " << out_path << " for writing\n";
            return 2;
        }
        out << j.dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum spin-ladder relaxation experiments"};
    app.set_version_flag("--version", std::string(ladder::software_version));
    app.require_subcommand(1);

    struct KindCommand {
        const char* name;
        const char* help;
        ladder::ExperimentKind kind;
        CommonFlags flags;
        CLI::App* cmd = nullptr;
    };
    std::vector<KindCommand> kinds = {
        {"trace", "evolve prepared states and record observable traces",
         ladder::ExperimentKind::trace, {}, nullptr},
        {"typicality", "variance of unrestricted filtered random states",
         ladder::ExperimentKind::typicality, {}, nullptr},
        {"wmatrix", "measure the transition matrix w_XY(tau)",
         ladder::ExperimentKind::transition_matrix, {}, nullptr},
        {"driftdiff", "force and diffusion coefficients from both models",
         ladder::ExperimentKind::drift_diffusion, {}, nullptr},
        {"scaling", "variance scaling study over system sizes",
         ladder::ExperimentKind::scaling, {}, nullptr},
    };
    for (KindCommand& k : kinds) {
        k.cmd = app.add_subcommand(k.name, k.help);
        add_common(k.cmd, k.flags);
    }

    std::vector<std::string> align_files;
    std::string align_out;
    CLI::App* align_cmd =
        app.add_subcommand("align", "least-squares time shifts between trace CSVs");
    align_cmd->add_option("traces", align_files, "trace CSV files (first is the reference)")
        ->required()
        ->expected(2, -1)
        ->check(CLI::ExistingFile);
    align_cmd->add_option("-o,--output", align_out, "write shifts JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        for (const KindCommand& k : kinds) {
            if (k.cmd->parsed()) return run_config_kind(k.flags, k.kind);
        }
        if (align_cmd->parsed()) return run_align(align_files, align_out);
    } catch (const ladder::schema_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ladder::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
