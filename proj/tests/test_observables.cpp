#include <doctest.h>

#include <cmath>
#include <memory>

#include "ladder/observables.hpp"

using namespace ladder;

namespace {

struct Setup {
    std::shared_ptr<const SectorBasis> basis;
    std::shared_ptr<const LadderHamiltonian> h;
    SpectralBounds bounds;
    explicit Setup(int n)
        : basis(std::make_shared<const SectorBasis>(SectorBasis::build(n))),
          h(std::make_shared<const LadderHamiltonian>(basis)),
          bounds(spectral_bounds(*h)) {}
};

} // namespace

TEST_CASE("point mass distributions") {
    const auto basis = std::make_shared<const SectorBasis>(SectorBasis::build(4));
    StateVector point(basis);
    point[basis->index_of(0b0011)] = 1.0;
    const std::vector<double> px = measure_px(point);
    CHECK(px.size() == 3);
    CHECK(px[basis->x_slot(2)] == 1.0);
    CHECK(px[basis->x_slot(0)] == 0.0);
    const auto [mean, var] = moments_x(px, basis->x_values());
    CHECK(mean == 2.0);
    CHECK(var == 0.0);
}

TEST_CASE("one configuration per block gives the flat distribution") {
    const auto basis = std::make_shared<const SectorBasis>(SectorBasis::build(4));
    StateVector psi(basis);
    const double amp = 1.0 / std::sqrt(3.0);
    for (int x : basis->x_values()) {
        psi[basis->block_indices(x).front()] = amp;
    }
    const std::vector<double> px = measure_px(psi);
    for (double p : px) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("measure_px rejects unnormalized input") {
    const auto basis = std::make_shared<const SectorBasis>(SectorBasis::build(4));
    StateVector psi(basis);
    psi[0] = 0.5;
    CHECK_THROWS_AS((void)measure_px(psi), unnormalized_input_error);
}

TEST_CASE("moments of simple distributions") {
    const std::vector<int> xs = {-2, 0, 2};
    const auto [mean, var] = moments_x({0.5, 0.0, 0.5}, xs);
    CHECK(mean == 0.0);
    CHECK(var == 4.0);
    CHECK_THROWS_AS((void)moments_x({0.5, 0.0, 0.1}, xs), unnormalized_input_error);
}

TEST_CASE("variance of the multiplicity-weighted uniform state at N=8") {
    const auto basis = std::make_shared<const SectorBasis>(SectorBasis::build(8));
    StateVector uniform(basis);
    const double amp = 1.0 / std::sqrt(static_cast<double>(basis->dimension()));
    for (cplx& a : uniform.amplitudes()) a = amp;
    const auto [mean, var] = moments_x(measure_px(uniform), basis->x_values());
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(var == doctest::Approx(160.0 / 70.0).epsilon(1e-13));
}

TEST_CASE("mean from P_X equals the direct diagonal expectation") {
    const Setup s(8);
    const StateVector psi = random_sector_state(17, s.basis);
    const auto [mean, var] = moments_x(measure_px(psi), s.basis->x_values());
    (void)var;
    CHECK(std::abs(mean - mean_x_direct(psi)) < 1e-12);
}

TEST_CASE("zero-length evolution returns the initial measurement") {
    const Setup s(8);
    const StateVector psi = random_sector_state(19, s.basis);
    const ChebyshevPlan plan = plan_propagator(s.h, s.bounds, 0.5);
    const ObservableTrace trace = evolve_and_trace(psi, *s.h, plan, 0.0, 0.5);
    CHECK(trace.rows() == 1);
    CHECK(trace.times[0] == 0.0);
    CHECK(trace.mean_x[0] == doctest::Approx(mean_x_direct(psi)).epsilon(1e-13));
}

TEST_CASE("probability is conserved along a trace") {
    const Setup s(8);
    PrepRecipe recipe;
    recipe.seed = 23;
    recipe.x_target = 2;
    recipe.alpha = tune_alpha(23, 2, 0.5, s.h, s.bounds);
    const StateVector omega = prepare_omega(recipe, s.h, s.bounds);
    const ChebyshevPlan plan = plan_propagator(s.h, s.bounds, 0.5);
    const ObservableTrace trace = evolve_and_trace(omega, *s.h, plan, 30.0, 0.5);
    CHECK(trace.rows() == 61);
    for (std::size_t i = 0; i < trace.rows(); ++i) {
        double total = 0.0;
        for (double p : trace.px[i]) total += p;
        CHECK(std::abs(total - 1.0) < 1e-12);
        CHECK(trace.var_x[i] >= 0.0);
        CHECK(trace.var_x[i] <= 16.0 + 1e-12); // (N/2)^2
        CHECK(std::abs(trace.mean_x[i]) <= 4.0 + 1e-12);
    }
}

TEST_CASE("mirrored initial state produces the mirrored trace") {
    const Setup s(8);
    PrepRecipe recipe;
    recipe.seed = 29;
    recipe.x_target = 2;
    recipe.alpha = 1.0;
    const StateVector omega = prepare_omega(recipe, s.h, s.bounds);

    StateVector mirrored(s.basis);
    for (std::size_t k = 0; k < omega.dimension(); ++k) {
        const std::size_t mk = s.basis->index_of(s.basis->mirror_config(s.basis->config_at(k)));
        mirrored[mk] = omega[k];
    }

    const ChebyshevPlan plan = plan_propagator(s.h, s.bounds, 0.5);
    const ObservableTrace a = evolve_and_trace(omega, *s.h, plan, 20.0, 0.5);
    const ObservableTrace b = evolve_and_trace(mirrored, *s.h, plan, 20.0, 0.5);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        CHECK(std::abs(a.mean_x[i] + b.mean_x[i]) < 1e-10);
    }
}

TEST_CASE("evolve_and_trace validates its inputs") {
    const Setup s(4);
    const StateVector psi = random_sector_state(1, s.basis);
    const ChebyshevPlan plan = plan_propagator(s.h, s.bounds, 0.5);
    CHECK_THROWS_AS((void)evolve_and_trace(psi, *s.h, plan, 10.0, 0.0),
                    invalid_argument_error);
    CHECK_THROWS_AS((void)evolve_and_trace(psi, *s.h, plan, 10.3, 0.5),
                    invalid_argument_error);
    CHECK_THROWS_AS((void)evolve_and_trace(psi, *s.h, plan, 10.0, 0.25),
                    invalid_argument_error);
}

TEST_CASE("typical variance statistics") {
    const Setup s(12);
    const double alpha = tune_alpha(55, std::nullopt, 0.37, s.h, s.bounds);
    const TypicalVariance tv = typical_variance(alpha, s.h, s.bounds, 6, 99);
    CHECK(tv.per_seed.size() == 6);
    CHECK(tv.value > 0.5);
    CHECK(tv.value < 144.0 / 16.0);
    CHECK(tv.std_error > 0.0);
    CHECK_THROWS_AS((void)typical_variance(alpha, s.h, s.bounds, 1, 99),
                    invalid_argument_error);
    // deterministic in the root seed
    const TypicalVariance again = typical_variance(alpha, s.h, s.bounds, 6, 99);
    CHECK(again.value == tv.value);
}

TEST_CASE("equilibration detector on synthetic traces") {
    ObservableTrace trace;
    trace.x_values = {-2, 0, 2};
    for (int i = 0; i <= 200; ++i) {
        const double t = 0.5 * i;
        trace.times.push_back(t);
        trace.mean_x.push_back(2.0 * std::exp(-t / 7.0));
        trace.var_x.push_back(1.0);
        trace.mean_h.push_back(0.0);
        trace.var_h.push_back(0.1);
        trace.px.push_back({0.0, 1.0, 0.0});
    }
    const auto t_eq = equilibration_time(trace);
    REQUIRE(t_eq.has_value());
    // |mean| < 0.2 from t = 7 ln(10) ~ 16.1
    CHECK(*t_eq >= 16.0);
    CHECK(*t_eq <= 17.0);

    ObservableTrace never = trace;
    for (double& m : never.mean_x) m = 1.0;
    CHECK(!equilibration_time(never).has_value());
}

TEST_CASE("late time average covers the final fifth") {
    std::vector<double> times, series;
    for (int i = 0; i <= 100; ++i) {
        times.push_back(static_cast<double>(i));
        series.push_back(i < 80 ? 0.0 : 1.0);
    }
    CHECK(late_time_average(times, series) == doctest::Approx(1.0));
    CHECK(late_time_average(times, series, 0.5) == doctest::Approx(21.0 / 51.0));
}
