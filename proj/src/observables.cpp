#include "ladder/observables.hpp"

#include <cmath>
#include <string>

namespace ladder {

std::vector<double> measure_px(const StateVector& state) {
    const SectorBasis& basis = state.basis();
    std::vector<double> px(basis.x_values().size(), 0.0);
    const int half = basis.geometry().rungs();
    double total = 0.0;
    for (std::size_t k = 0; k < state.dimension(); ++k) {
        const double w = std::norm(state[k]);
        px[static_cast<std::size_t>((basis.x_of_index(k) + half) / 2)] += w;
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw unnormalized_input_error("state norm^2 = " + std::to_string(total) +
                                       " is too far from 1 for a probability measurement");
    }
    return px;
}

std::pair<double, double> moments_x(const std::vector<double>& px,
                                    const std::vector<int>& x_values) {
    if (px.size() != x_values.size()) {
        throw dimension_error("P_X and X grids differ in length");
    }
    double total = 0.0, mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        total += px[i];
        mean += x_values[i] * px[i];
        second += static_cast<double>(x_values[i]) * x_values[i] * px[i];
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw unnormalized_input_error("P_X sums to " + std::to_string(total));
    }
    double variance = second - mean * mean;
    if (variance < -1e-12) {
        throw numeric_error("variance " + std::to_string(variance) + " below -1e-12");
    }
    if (variance < 0.0) variance = 0.0;
    return {mean, variance};
}

double mean_x_direct(const StateVector& state) {
    const SectorBasis& basis = state.basis();
    double acc = 0.0;
    for (std::size_t k = 0; k < state.dimension(); ++k) {
        acc += basis.x_of_index(k) * std::norm(state[k]);
    }
    return acc;
}

namespace {

void append_measurement(ObservableTrace& trace, double t, const StateVector& state,
                        const LadderHamiltonian& h) {
    trace.times.push_back(t);
    std::vector<double> px = measure_px(state);
    const auto [mx, vx] = moments_x(px, trace.x_values);
    trace.px.push_back(std::move(px));
    trace.mean_x.push_back(mx);
    trace.var_x.push_back(vx);
    const auto [mh, h2] = h.energy_moments(state);
    trace.mean_h.push_back(mh);
    trace.var_h.push_back(std::max(0.0, h2 - mh * mh));
}

} // namespace

ObservableTrace evolve_and_trace(const StateVector& initial, const LadderHamiltonian& h,
                                 const ChebyshevPlan& step_plan, double t_max, double dt_out) {
    if (dt_out <= 0.0 || t_max < 0.0) {
        throw invalid_argument_error("need dt_out > 0 and t_max >= 0");
    }
    const double steps_exact = t_max / dt_out;
    const long long n_steps = std::llround(steps_exact);
    if (std::abs(steps_exact - static_cast<double>(n_steps)) > 1e-9) {
        throw invalid_argument_error("t_max must be an integer multiple of dt_out");
    }
    if (n_steps > 0 &&
        (step_plan.kind != PlanKind::propagator || step_plan.time != dt_out)) {
        throw invalid_argument_error("step plan was not built as a propagator for dt_out");
    }

    ObservableTrace trace;
    trace.x_values = initial.basis().x_values();
    trace.meta.n_spins = initial.basis().geometry().n_spins;
    trace.meta.couplings = h.couplings();
    trace.meta.dt_out = dt_out;
    trace.meta.t_max = t_max;
    trace.meta.plan_order = step_plan.order();
    trace.meta.bounds = step_plan.bounds;
    append_measurement(trace, 0.0, initial, h);

    StateVector state = initial;
    for (long long i = 1; i <= n_steps; ++i) {
        state = apply_plan(step_plan, state);
        append_measurement(trace, static_cast<double>(i) * dt_out, state, h);
    }
    return trace;
}

TypicalVariance typical_variance(double alpha, std::shared_ptr<const LadderHamiltonian> h,
                                 const SpectralBounds& bounds, int n_seeds,
                                 std::uint64_t root_seed, double e0) {
    if (n_seeds < 2) throw invalid_argument_error("typical variance needs n_seeds >= 2");
    TypicalVariance result;
    result.per_seed.reserve(static_cast<std::size_t>(n_seeds));
    const std::vector<int>& xs = h->basis().x_values();
    for (int s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = derive_seed(root_seed, 0x7f9ca1, static_cast<std::uint64_t>(s));
        const StateVector state = prepare_typical(seed, alpha, h, bounds, e0);
        const auto [mean, variance] = moments_x(measure_px(state), xs);
        (void)mean;
        result.per_seed.push_back(variance);
    }
    double sum = 0.0;
    for (double v : result.per_seed) sum += v;
    result.value = sum / n_seeds;
    double ss = 0.0;
    for (double v : result.per_seed) ss += (v - result.value) * (v - result.value);
    result.std_error = std::sqrt(ss / (n_seeds - 1) / n_seeds);
    return result;
}

std::optional<double> equilibration_time(const ObservableTrace& trace) {
    if (trace.rows() == 0) return std::nullopt;
    constexpr double window = 10.0;
    const double threshold = std::max(0.05 * std::abs(trace.mean_x.front()), 0.2);
    const double t_end = trace.times.back();
    for (std::size_t i = 0; i < trace.rows(); ++i) {
        const double t0 = trace.times[i];
        if (t0 + window > t_end + 1e-9) break;
        bool sustained = true;
        for (std::size_t j = i; j < trace.rows() && trace.times[j] <= t0 + window + 1e-9; ++j) {
            if (std::abs(trace.mean_x[j]) >= threshold) {
                sustained = false;
                break;
            }
        }
        if (sustained) return t0;
    }
    return std::nullopt;
}

double late_time_average(const std::vector<double>& times, const std::vector<double>& series,
                         double final_fraction) {
    if (times.empty() || times.size() != series.size()) {
        throw dimension_error("time grid and series differ in length");
    }
    const double t_start = times.back() - final_fraction * (times.back() - times.front());
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= t_start - 1e-9) {
            acc += series[i];
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

} // namespace ladder
