#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ladder/stochastic.hpp"

namespace ladder {

inline constexpr const char* software_name = "spinladder";
inline constexpr const char* software_version = "1.0.0";

enum class ExperimentKind { trace, typicality, transition_matrix, drift_diffusion, scaling };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from(const std::string& name);

struct RunSpec {
    std::optional<int> x_target; // nullopt: unrestricted
    std::uint64_t seed_salt = 0; // folded with the root seed per run
};

// One experiment description, parsed strictly from a versioned JSON file:
// unknown fields are rejected with their path.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::trace;
    int n_spins = 16;
    Couplings couplings;
    double e0 = 0.0;
    double sigma_h_target = 0.37;
    std::vector<RunSpec> runs;
    double t_max = 150.0;
    double dt_out = 0.5;
    double tau = 15.0;
    int seeds_per_column = 5;
    bool calibrate_gamma = true;
    int typicality_seeds = 10;
    std::vector<int> scaling_sizes = {12, 16, 20};
    std::uint64_t root_seed = 1;
    int workers = 1;
    std::filesystem::path output_dir = "out";
    double memory_limit_gb = 8.0;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);
    std::string to_json_text() const;
};

struct ExperimentResult {
    std::vector<std::filesystem::path> files; // everything written
    std::filesystem::path report_path;        // top-level report JSON
};

// Dispatches on config.kind, writes CSV artifacts plus a JSON manifest per
// run and one report per experiment. Every output is reproducible from the
// manifest alone.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Per-trace time shifts (first trace pinned at 0) minimizing the mean squared
// pairwise deviation over the overlapping window; grid search over integer
// multiples of dt_out followed by interpolated refinement. A positive shift
// advances the trace. Throws if fewer than 10 time units overlap.
std::vector<double> time_shift_align(const std::vector<std::vector<double>>& mean_series,
                                     double dt_out, double max_shift = 0.0);

struct EarlyMaximum {
    bool distinct = false; // max exceeds the plateau by more than 2%
    double t_star = 0.0;
    double var_star = 0.0;
    double plateau = 0.0;
};

// Global maximum of var_x before the equilibration time, compared against
// the late-time plateau. Throws not_equilibrated_error when the mean never
// settles.
EarlyMaximum detect_early_maximum(const ObservableTrace& trace);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_std_error = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingRow {
    int n_spins = 0;
    double mean_final_variance = 0.0;
    double typical_variance = 0.0;
    double typical_variance_se = 0.0;
    double largest_early_maximum = 0.0;
    bool early_maximum_distinct = false;
    double most_off_equilibrium_final_variance = 0.0;
    double shift = 0.0; // largest early maximum minus mean final variance
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    std::vector<std::string> errors; // "N=<size>: <what>" for failed sizes
    LinearFit typical_fit;
    LinearFit early_max_fit;
};

// Variance scaling over system sizes: final variances, typical variances and
// early maxima per size plus linear fits. Runs the trace set for every size.
ScalingReport scaling_study(const ExperimentConfig& config);

// Trace CSV helpers shared by run_experiment and the align subcommand.
void write_trace_csv(const std::filesystem::path& path, const ObservableTrace& trace);
ObservableTrace read_trace_csv(const std::filesystem::path& path);

} // namespace ladder
