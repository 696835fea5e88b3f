#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ladder/experiment.hpp"

using namespace ladder;
namespace fs = std::filesystem;

namespace {

std::string minimal_config(const std::string& kind, int n_spins, const std::string& extra = "") {
    std::ostringstream out;
    out << R"({"config_version": 1, "kind": ")" << kind << R"(", )"
        << R"("geometry": {"n_spins": )" << n_spins << "}";
    if (!extra.empty()) out << ", " << extra;
    out << "}";
    return out.str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("config parsing accepts a full document and round-trips") {
    const std::string text = R"({
        "config_version": 1,
        "kind": "trace",
        "geometry": {"n_spins": 8},
        "couplings": {"beam": 1.0, "rung": 0.2, "anisotropy": 0.6},
        "window": {"e0": 0.0, "sigma_h": 0.37},
        "runs": [{"x_target": 2, "seed": 0}, {"x_target": "unrestricted", "seed": 1}],
        "time_grid": {"t_max": 10.0, "dt_out": 0.5},
        "stochastic": {"tau": 15.0, "seeds_per_column": 5, "fit_gamma": true},
        "typicality": {"n_seeds": 10},
        "scaling": {"sizes": [12, 16, 20]},
        "root_seed": 7,
        "workers": 2,
        "output_dir": "out",
        "memory_limit_gb": 4.0
    })";
    const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
    CHECK(cfg.kind == ExperimentKind::trace);
    CHECK(cfg.n_spins == 8);
    CHECK(cfg.runs.size() == 2);
    CHECK(cfg.runs[0].x_target == 2);
    CHECK(!cfg.runs[1].x_target.has_value());
    CHECK(cfg.root_seed == 7);

    const ExperimentConfig again = ExperimentConfig::from_json_text(cfg.to_json_text());
    CHECK(again.to_json_text() == cfg.to_json_text());
}

TEST_CASE("schema violations carry the field path") {
    auto path_of = [](const std::string& text) {
        try {
            (void)ExperimentConfig::from_json_text(text);
        } catch (const schema_error& e) {
            return e.path;
        }
        return std::string("NO ERROR");
    };

    CHECK(path_of(R"({"kind": "trace"})") == "config_version");
    CHECK(path_of(minimal_config("nope", 8)) == "kind");
    CHECK(path_of(minimal_config("typicality", 8, R"("bogus": 1)")) == "bogus");
    CHECK(path_of(minimal_config("typicality", 8, R"("window": {"sigma": 0.4})")) ==
          "window.sigma");
    CHECK(path_of(minimal_config("typicality", 7)) == "geometry.n_spins");
    CHECK(path_of(minimal_config("trace", 8)) == "runs"); // empty run set
    CHECK(path_of(minimal_config("trace", 8, R"("runs": [{"x_target": 3}])")) ==
          "runs[0].x_target");
    CHECK(path_of(minimal_config("trace", 8,
                                 R"("runs": [{"x_target": 2}], "time_grid": {"t_max": 10.0, "dt_out": 0.3})")) ==
          "time_grid.t_max");
    CHECK(path_of(minimal_config("scaling", 8, R"("scaling": {"sizes": [12, 16]})")) ==
          "scaling.sizes");
    CHECK(path_of(minimal_config("typicality", 8, R"("stochastic": {"tau": -2.0})")) ==
          "stochastic.tau");
    CHECK(path_of("not json at all") == "");
}

TEST_CASE("trace experiment writes the documented CSV shape and manifest") {
    const fs::path dir = fresh_dir("ladder_trace_shape");
    ExperimentConfig cfg = ExperimentConfig::from_json_text(minimal_config(
        "trace", 8,
        R"("runs": [{"x_target": 2, "seed": 0}], "time_grid": {"t_max": 5.0, "dt_out": 0.5},)"
        R"( "window": {"sigma_h": 0.5}, "root_seed": 11)"));
    cfg.output_dir = dir;
    const ExperimentResult result = run_experiment(cfg);

    const fs::path csv = dir / "trace_N8_X2_s0.csv";
    REQUIRE(fs::exists(csv));
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    // 1 + 4 + (N/2 + 1) columns
    CHECK(std::count(header.begin(), header.end(), ',') == 1 + 4 + 5 - 1);
    std::size_t data_rows = 0;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) ++data_rows;
    }
    CHECK(data_rows == 11); // t_max/dt_out + 1

    const ObservableTrace trace = read_trace_csv(csv);
    CHECK(trace.rows() == 11);
    CHECK(trace.x_values == std::vector<int>{-4, -2, 0, 2, 4});
    CHECK(trace.mean_x.front() == doctest::Approx(2.0).epsilon(0.2));

    REQUIRE(fs::exists(dir / "trace_N8_X2_s0.manifest.json"));
    const std::string manifest = slurp(dir / "trace_N8_X2_s0.manifest.json");
    CHECK(manifest.find("derived_seed") != std::string::npos);
    CHECK(manifest.find("alpha") != std::string::npos);
    CHECK(fs::exists(result.report_path));
}

TEST_CASE("rerunning a config reproduces every artifact byte for byte") {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(minimal_config(
        "trace", 8,
        R"("runs": [{"x_target": 2, "seed": 0}, {"x_target": -2, "seed": 1}],)"
        R"( "time_grid": {"t_max": 4.0, "dt_out": 0.5}, "window": {"sigma_h": 0.5},)"
        R"( "root_seed": 3, "workers": 2)"));

    const fs::path dir_a = fresh_dir("ladder_repro_a");
    const fs::path dir_b = fresh_dir("ladder_repro_b");
    const fs::path dir_c = fresh_dir("ladder_repro_c");
    cfg.output_dir = dir_a;
    const ExperimentResult first = run_experiment(cfg);
    cfg.output_dir = dir_b;
    const ExperimentResult second = run_experiment(cfg);
    cfg.output_dir = dir_c;
    cfg.workers = 1; // worker count must not leak into the numbers
    const ExperimentResult third = run_experiment(cfg);
    REQUIRE(first.files.size() == second.files.size());
    for (std::size_t i = 0; i < first.files.size(); ++i) {
        CHECK(slurp(first.files[i]) == slurp(second.files[i]));
    }
    REQUIRE(first.files.size() == third.files.size());
    for (std::size_t i = 0; i < first.files.size(); ++i) {
        CHECK(slurp(first.files[i]) == slurp(third.files[i]));
    }
}

TEST_CASE("typicality experiment reports the variance statistics") {
    const fs::path dir = fresh_dir("ladder_typ");
    ExperimentConfig cfg = ExperimentConfig::from_json_text(minimal_config(
        "typicality", 8, R"("typicality": {"n_seeds": 4}, "window": {"sigma_h": 0.5})"));
    cfg.output_dir = dir;
    const ExperimentResult result = run_experiment(cfg);
    const std::string report = slurp(result.report_path);
    CHECK(report.find("typical_variance") != std::string::npos);
    CHECK(fs::exists(dir / "typicality_N8.csv"));
}

TEST_CASE("preflight rejects sizes over the memory budget") {
    ExperimentConfig cfg = ExperimentConfig::from_json_text(minimal_config(
        "typicality", 24, R"("memory_limit_gb": 0.001)"));
    cfg.output_dir = fresh_dir("ladder_preflight");
    CHECK_THROWS_AS((void)run_experiment(cfg), capacity_error);
    try {
        (void)run_experiment(cfg);
    } catch (const capacity_error& e) {
        CHECK(std::string(e.what()).find("GB") != std::string::npos);
    }
}

TEST_CASE("alignment recovers constructed shifts") {
    const double dt = 0.5;
    const std::size_t len = 241;
    auto curve = [](double t) { return 6.0 * std::exp(-t / 12.0); };
    std::vector<double> reference(len), delayed(len);
    for (std::size_t k = 0; k < len; ++k) {
        const double t = dt * static_cast<double>(k);
        reference[k] = curve(t);
        delayed[k] = t < 3.0 ? curve(0.0) : curve(t - 3.0);
    }

    const std::vector<double> zero_shifts = time_shift_align({reference, reference}, dt);
    CHECK(zero_shifts[0] == 0.0);
    CHECK(std::abs(zero_shifts[1]) <= dt / 2.0);

    const std::vector<double> shifts = time_shift_align({reference, delayed}, dt);
    CHECK(shifts[0] == 0.0);
    CHECK(std::abs(shifts[1] - 3.0) <= dt / 2.0);

    // three traces, pairwise objective
    std::vector<double> more_delayed(len);
    for (std::size_t k = 0; k < len; ++k) {
        const double t = dt * static_cast<double>(k);
        more_delayed[k] = t < 7.0 ? curve(0.0) : curve(t - 7.0);
    }
    const std::vector<double> three = time_shift_align({reference, delayed, more_delayed}, dt);
    CHECK(std::abs(three[1] - 3.0) <= dt / 2.0);
    CHECK(std::abs(three[2] - 7.0) <= dt / 2.0);
}

TEST_CASE("aligned relaxation curves collapse onto each other at N=16") {
    const auto basis = std::make_shared<const SectorBasis>(SectorBasis::build(16));
    const auto h = std::make_shared<const LadderHamiltonian>(basis);
    const SpectralBounds bounds = spectral_bounds(*h);
    const ChebyshevPlan plan = plan_propagator(h, bounds, 0.5);
    const double dt = 0.5;

    std::vector<std::vector<double>> means;
    for (int x0 : {2, 4, 6}) {
        const double alpha = tune_alpha(606, x0, 0.37, h, bounds);
        PrepRecipe recipe;
        recipe.seed = derive_seed(606, 0xa119, static_cast<std::uint64_t>(x0));
        recipe.x_target = x0;
        recipe.alpha = alpha;
        const StateVector omega = prepare_omega(recipe, h, bounds);
        means.push_back(evolve_and_trace(omega, *h, plan, 100.0, dt).mean_x);
    }
    const std::vector<double> shifts = time_shift_align(means, dt);
    CHECK(shifts[0] == 0.0);
    CHECK(shifts[1] > 0.0); // farther starts need advancing onto the reference
    CHECK(shifts[2] > shifts[1]);

    auto value = [&](std::size_t i, double t) {
        const double pos = (t + shifts[i]) / dt;
        const std::size_t k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        return (1.0 - frac) * means[i][k] + frac * means[i][std::min(k + 1, means[i].size() - 1)];
    };
    double start = 0.0, end = (static_cast<double>(means[0].size()) - 1.0) * dt;
    for (double s : shifts) {
        start = std::max(start, -s);
        end = std::min(end, (static_cast<double>(means[0].size()) - 1.0) * dt - s);
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (double t = std::ceil(start / dt) * dt; t <= end + 1e-9; t += dt) {
        const double mean = (value(0, t) + value(1, t) + value(2, t)) / 3.0;
        for (std::size_t i = 0; i < 3; ++i) {
            acc += (value(i, t) - mean) * (value(i, t) - mean);
            ++count;
        }
    }
    const double residual_rms = std::sqrt(acc / static_cast<double>(count));
    CHECK(residual_rms < 0.1 * (6.0 - 2.0)); // 10% of the initial-value spread
}

TEST_CASE("alignment needs ten time units of overlap") {
    const double dt = 0.5;
    std::vector<double> shorty(12, 1.0); // 5.5 time units
    CHECK_THROWS_AS((void)time_shift_align({shorty, shorty}, dt), insufficient_overlap_error);
    CHECK_THROWS_AS((void)time_shift_align({shorty}, dt), invalid_argument_error);
}

TEST_CASE("early maximum detection") {
    ObservableTrace trace;
    trace.x_values = {-2, 0, 2};
    auto push = [&](double t, double mean, double var) {
        trace.times.push_back(t);
        trace.mean_x.push_back(mean);
        trace.var_x.push_back(var);
        trace.mean_h.push_back(0.0);
        trace.var_h.push_back(0.0);
        trace.px.push_back({0.0, 1.0, 0.0});
    };
    // mean decays; variance overshoots to 3 near t=6 then settles at 2
    for (int i = 0; i <= 200; ++i) {
        const double t = 0.5 * i;
        const double mean = 2.0 * std::exp(-t / 5.0);
        const double var = 2.0 + 1.0 * std::exp(-(t - 6.0) * (t - 6.0) / 8.0);
        push(t, mean, var);
    }
    const EarlyMaximum bump = detect_early_maximum(trace);
    CHECK(bump.distinct);
    CHECK(bump.t_star == doctest::Approx(6.0).epsilon(0.2));
    CHECK(bump.var_star == doctest::Approx(3.0).epsilon(0.01));
    CHECK(bump.plateau == doctest::Approx(2.0).epsilon(0.01));

    // monotone rise to the plateau: no distinct maximum
    ObservableTrace monotone;
    monotone.x_values = trace.x_values;
    for (int i = 0; i <= 200; ++i) {
        const double t = 0.5 * i;
        monotone.times.push_back(t);
        monotone.mean_x.push_back(2.0 * std::exp(-t / 5.0));
        monotone.var_x.push_back(2.0 * (1.0 - std::exp(-t / 5.0)));
        monotone.mean_h.push_back(0.0);
        monotone.var_h.push_back(0.0);
        monotone.px.push_back({0.0, 1.0, 0.0});
    }
    CHECK(!detect_early_maximum(monotone).distinct);

    ObservableTrace stuck = trace;
    for (double& m : stuck.mean_x) m = 5.0;
    CHECK_THROWS_AS((void)detect_early_maximum(stuck), not_equilibrated_error);
}

TEST_CASE("linear fit statistics") {
    const LinearFit exact = linear_fit({12, 16, 20}, {5.0, 7.0, 9.0});
    CHECK(exact.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(exact.intercept == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(exact.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    const LinearFit noisy = linear_fit({1, 2, 3, 4}, {1.1, 1.9, 3.2, 3.8});
    CHECK(noisy.r_squared > 0.97);
    CHECK(noisy.slope_std_error > 0.0);
    CHECK_THROWS_AS((void)linear_fit({1.0}, {2.0}), invalid_argument_error);
}

TEST_CASE("kind names round trip") {
    for (ExperimentKind kind :
         {ExperimentKind::trace, ExperimentKind::typicality, ExperimentKind::transition_matrix,
          ExperimentKind::drift_diffusion, ExperimentKind::scaling}) {
        CHECK(experiment_kind_from(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS((void)experiment_kind_from("w-matrix"), schema_error);
}
