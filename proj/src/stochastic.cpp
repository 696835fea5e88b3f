#include "ladder/stochastic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ladder/parallel.hpp"

namespace ladder {

namespace {

int slot_count(const SpinFlipModel& model) { return model.n_spins / 2 + 1; }

std::vector<int> model_x_values(const SpinFlipModel& model) {
    std::vector<int> xs(static_cast<std::size_t>(slot_count(model)));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = 2 * static_cast<int>(i) - model.n_spins / 2;
    }
    return xs;
}

void check_model(const SpinFlipModel& model) {
    if (model.n_spins < 4 || model.n_spins % 2 != 0) {
        throw invalid_argument_error("spin-flip model needs even N >= 4");
    }
}

// exp(G t) in factored form: G = D S D^{-1} with S symmetric, via detailed
// balance; columns of exp(G t) are D V exp(L t) V^T D^{-1} e_j.
struct GeneratorEig {
    Eigen::VectorXd sqrt_pi;
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;

    Eigen::VectorXd propagate(const Eigen::VectorXd& p0, double t) const {
        const Eigen::VectorXd y = vectors.transpose() * (p0.array() / sqrt_pi.array()).matrix();
        const Eigen::VectorXd scaled =
            (y.array() * (values.array() * t).exp()).matrix();
        return (sqrt_pi.array() * (vectors * scaled).array()).matrix();
    }
};

GeneratorEig eigens_of(const SpinFlipModel& model) {
    check_model(model);
    const int n = slot_count(model);
    const std::vector<int> xs = model_x_values(model);
    const std::vector<double> pi = spinflip_stationary(model);

    Eigen::MatrixXd sym = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        const double up = spinflip_rate(model, xs[static_cast<std::size_t>(j)], FlipDirection::up);
        const double down =
            spinflip_rate(model, xs[static_cast<std::size_t>(j)], FlipDirection::down);
        sym(j, j) = -(up + down);
        if (j + 1 < n) {
            // S(j+1, j) = R_up(x_j) sqrt(pi_j / pi_{j+1}) == S(j, j+1)
            const double coupling = up * std::sqrt(pi[static_cast<std::size_t>(j)] /
                                                   pi[static_cast<std::size_t>(j + 1)]);
            sym(j + 1, j) = coupling;
            sym(j, j + 1) = coupling;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    GeneratorEig eig;
    eig.sqrt_pi = Eigen::VectorXd(n);
    for (int j = 0; j < n; ++j) eig.sqrt_pi(j) = std::sqrt(pi[static_cast<std::size_t>(j)]);
    eig.vectors = solver.eigenvectors();
    eig.values = solver.eigenvalues();
    return eig;
}

} // namespace

double spinflip_rate(const SpinFlipModel& model, int x, FlipDirection direction) {
    check_model(model);
    const int half = model.n_spins / 2;
    if (x < -half || x > half || (x + half) % 2 != 0) {
        throw invalid_argument_error("inadmissible x value " + std::to_string(x));
    }
    const double sign = direction == FlipDirection::up ? -1.0 : 1.0;
    const double base = 0.5 + sign * static_cast<double>(x) / model.n_spins;
    return 0.5 * model.gamma * model.kappa * model.kappa * model.n_spins * base * base;
}

std::vector<double> spinflip_generator(const SpinFlipModel& model) {
    check_model(model);
    const int n = slot_count(model);
    const std::vector<int> xs = model_x_values(model);
    std::vector<double> g(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        const double up = spinflip_rate(model, xs[static_cast<std::size_t>(j)], FlipDirection::up);
        const double down =
            spinflip_rate(model, xs[static_cast<std::size_t>(j)], FlipDirection::down);
        if (up < -1e-12 || down < -1e-12) {
            throw numeric_error("negative spin-flip rate");
        }
        g[static_cast<std::size_t>(j) * n + j] = -(up + down);
        if (j + 1 < n) g[static_cast<std::size_t>(j + 1) * n + j] = up;
        if (j - 1 >= 0) g[static_cast<std::size_t>(j - 1) * n + j] = down;
    }
    return g;
}

std::vector<double> spinflip_stationary(const SpinFlipModel& model) {
    check_model(model);
    const int n = slot_count(model);
    const std::vector<int> xs = model_x_values(model);
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0);
    pi[0] = 1.0;
    for (int j = 0; j + 1 < n; ++j) {
        const double up = spinflip_rate(model, xs[static_cast<std::size_t>(j)], FlipDirection::up);
        const double down_next =
            spinflip_rate(model, xs[static_cast<std::size_t>(j + 1)], FlipDirection::down);
        pi[static_cast<std::size_t>(j + 1)] = pi[static_cast<std::size_t>(j)] * up / down_next;
    }
    double total = 0.0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;
    return pi;
}

std::vector<double> master_evolve(const SpinFlipModel& model, const std::vector<double>& p0,
                                  double t) {
    const int n = slot_count(model);
    if (p0.size() != static_cast<std::size_t>(n)) {
        throw dimension_error("initial distribution has wrong length");
    }
    const GeneratorEig eig = eigens_of(model);
    Eigen::VectorXd p0_vec(n);
    for (int j = 0; j < n; ++j) p0_vec(j) = p0[static_cast<std::size_t>(j)];
    const Eigen::VectorXd pt = eig.propagate(p0_vec, t);
    return {pt.data(), pt.data() + n};
}

TransitionMatrix finite_time_matrix(const SpinFlipModel& model, double tau) {
    if (tau < 0.0) throw invalid_argument_error("lag must be non-negative");
    const int n = slot_count(model);
    const GeneratorEig eig = eigens_of(model);

    TransitionMatrix u;
    u.tau = tau;
    u.x_values = model_x_values(model);
    u.w.assign(static_cast<std::size_t>(n) * n, 0.0);
    u.std_err.assign(u.w.size(), 0.0);
    u.min_entry_before_clamp = 0.0;

    for (int from = 0; from < n; ++from) {
        Eigen::VectorXd point = Eigen::VectorXd::Zero(n);
        point(from) = 1.0;
        Eigen::VectorXd col = eig.propagate(point, tau);
        double total = 0.0;
        for (int to = 0; to < n; ++to) {
            double v = col(to);
            u.min_entry_before_clamp = std::min(u.min_entry_before_clamp, v);
            if (v < -1e-12) {
                throw numeric_error("finite-time matrix entry " + std::to_string(v) +
                                    " below -1e-12");
            }
            v = std::max(v, 0.0);
            u.w[static_cast<std::size_t>(to) * n + from] = v;
            total += v;
        }
        for (int to = 0; to < n; ++to) {
            u.w[static_cast<std::size_t>(to) * n + from] /= total;
        }
    }
    return u;
}

TransitionMatrix measure_transition_matrix(std::shared_ptr<const LadderHamiltonian> h,
                                           const SpectralBounds& bounds,
                                           const WMeasureParams& params,
                                           std::vector<double>* alpha_per_column) {
    if (params.tau <= 0.0) throw invalid_argument_error("lag must be positive");
    if (params.seeds_per_column < 1) {
        throw invalid_argument_error("need at least one seed per column");
    }
    const std::vector<int>& xs = h->basis().x_values();
    const std::size_t n = xs.size();

    TransitionMatrix w;
    w.tau = params.tau;
    w.x_values = xs;
    w.w.assign(n * n, 0.0);
    w.std_err.assign(n * n, 0.0);
    w.seeds_per_column = params.seeds_per_column;

    std::vector<double> alphas(n, 0.0);
    const ChebyshevPlan lag_plan = plan_propagator(h, bounds, params.tau);

    parallel_for(n, params.workers, [&](std::size_t col) {
        const int x_target = xs[col];
        const std::uint64_t tune_seed = derive_seed(params.root_seed, col, 0);
        const double alpha = tune_alpha_clamped(tune_seed, x_target, params.sigma_h_target, h,
                                                bounds, params.e0);
        alphas[col] = alpha;

        std::vector<double> mean(n, 0.0);
        std::vector<double> sq(n, 0.0);
        for (int s = 0; s < params.seeds_per_column; ++s) {
            PrepRecipe recipe;
            recipe.seed = derive_seed(params.root_seed, col, static_cast<std::uint64_t>(s));
            recipe.x_target = x_target;
            recipe.alpha = alpha;
            recipe.e0 = params.e0;
            recipe.sigma_h_target = params.sigma_h_target;
            const StateVector omega = prepare_omega(recipe, h, bounds);
            const StateVector evolved = apply_plan(lag_plan, omega);
            const std::vector<double> px = measure_px(evolved);
            for (std::size_t to = 0; to < n; ++to) {
                mean[to] += px[to];
                sq[to] += px[to] * px[to];
            }
        }
        const double inv_seeds = 1.0 / params.seeds_per_column;
        for (std::size_t to = 0; to < n; ++to) {
            mean[to] *= inv_seeds;
            w.w[to * n + col] = mean[to];
            if (params.seeds_per_column > 1) {
                const double var =
                    std::max(0.0, (sq[to] * inv_seeds - mean[to] * mean[to]) *
                                      params.seeds_per_column / (params.seeds_per_column - 1));
                w.std_err[to * n + col] = std::sqrt(var * inv_seeds);
            }
        }
    });

    if (alpha_per_column) *alpha_per_column = std::move(alphas);
    return w;
}

std::vector<std::vector<double>> markov_iterate(const TransitionMatrix& w,
                                                const std::vector<double>& p0, int n_steps) {
    const std::size_t n = w.size();
    if (p0.size() != n) throw dimension_error("distribution length does not match the matrix");
    if (n_steps < 0) throw invalid_argument_error("need n_steps >= 0");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(p0);
    for (int step = 0; step < n_steps; ++step) {
        const std::vector<double>& prev = out.back();
        std::vector<double> next(n, 0.0);
        for (std::size_t to = 0; to < n; ++to) {
            double acc = 0.0;
            for (std::size_t from = 0; from < n; ++from) {
                acc += w.w[to * n + from] * prev[from];
            }
            next[to] = acc;
        }
        out.push_back(std::move(next));
    }
    return out;
}

std::vector<double> stationary_of(const TransitionMatrix& w) {
    const std::size_t n = w.size();
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    for (int iter = 0; iter < 100000; ++iter) {
        std::vector<double> next(n, 0.0);
        for (std::size_t to = 0; to < n; ++to) {
            double acc = 0.0;
            for (std::size_t from = 0; from < n; ++from) {
                acc += w.w[to * n + from] * p[from];
            }
            next[to] = acc;
        }
        double delta = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            delta += std::abs(next[i] - p[i]);
            total += next[i];
        }
        for (double& v : next) v /= total;
        p = std::move(next);
        if (delta < 1e-14) break;
    }
    return p;
}

namespace {

DriftDiffusion drift_diffusion_of(const TransitionMatrix& w) {
    const std::size_t n = w.size();
    DriftDiffusion out;
    out.tau = w.tau;
    out.x_values = w.x_values;
    out.f.resize(n);
    out.d.resize(n);
    for (std::size_t from = 0; from < n; ++from) {
        double mean = 0.0, second = 0.0, total = 0.0;
        for (std::size_t to = 0; to < n; ++to) {
            const double p = w.at(to, from);
            total += p;
            mean += w.x_values[to] * p;
            second += static_cast<double>(w.x_values[to]) * w.x_values[to] * p;
        }
        mean /= total;
        second /= total;
        out.f[from] = mean - w.x_values[from];
        out.d[from] = std::max(0.0, second - mean * mean);
    }
    return out;
}

} // namespace

DriftDiffusion extract_drift_diffusion(const TransitionMatrix& w) {
    return drift_diffusion_of(w);
}

DriftDiffusion extract_drift_diffusion(const SpinFlipModel& model, double tau) {
    return drift_diffusion_of(finite_time_matrix(model, tau));
}

double fit_gamma(const ObservableTrace& quantum_trace, const SpinFlipModel& model) {
    if (quantum_trace.rows() < 3) {
        throw invalid_argument_error("trace too short to calibrate gamma");
    }
    if (std::abs(quantum_trace.mean_x.front()) > 2.1) {
        throw invalid_argument_error("gamma calibration expects a trace starting near "
                                     "equilibrium (|mean_x(0)| <= 2)");
    }
    SpinFlipModel unit = model;
    unit.gamma = 1.0;
    const GeneratorEig eig = eigens_of(unit);
    const int n = slot_count(unit);
    if (quantum_trace.x_values.size() != static_cast<std::size_t>(n)) {
        throw dimension_error("trace x grid does not match the model");
    }

    // relaxation window: start through equilibration (full trace otherwise)
    std::size_t window_end = quantum_trace.rows();
    if (const auto t_eq = equilibration_time(quantum_trace)) {
        for (std::size_t i = 0; i < quantum_trace.rows(); ++i) {
            if (quantum_trace.times[i] >= *t_eq - 1e-9) {
                window_end = i + 1;
                break;
            }
        }
    }
    window_end = std::max(window_end, std::min(quantum_trace.rows(), std::size_t{5}));

    Eigen::VectorXd p0(n);
    for (int j = 0; j < n; ++j) p0(j) = quantum_trace.px.front()[static_cast<std::size_t>(j)];
    Eigen::VectorXd x_grid(n);
    for (int j = 0; j < n; ++j) x_grid(j) = quantum_trace.x_values[static_cast<std::size_t>(j)];

    // gamma only rescales time: model mean at (t, gamma) = unit-mean(gamma t)
    auto sse = [&](double gamma) {
        double acc = 0.0;
        for (std::size_t i = 0; i < window_end; ++i) {
            const Eigen::VectorXd pt = eig.propagate(p0, gamma * quantum_trace.times[i]);
            const double m = x_grid.dot(pt);
            const double diff = m - quantum_trace.mean_x[i];
            acc += diff * diff;
        }
        return acc;
    };

    // coarse log-space scan, then golden-section refinement
    double best_gamma = 1.0;
    double best_sse = std::numeric_limits<double>::infinity();
    constexpr int scan_points = 61;
    for (int i = 0; i < scan_points; ++i) {
        const double gamma = std::pow(10.0, -3.0 + 6.0 * i / (scan_points - 1));
        const double value = sse(gamma);
        if (value < best_sse) {
            best_sse = value;
            best_gamma = gamma;
        }
    }
    double lo = best_gamma / std::pow(10.0, 6.0 / (scan_points - 1));
    double hi = best_gamma * std::pow(10.0, 6.0 / (scan_points - 1));
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - golden * (b - a);
    double d = a + golden * (b - a);
    double fc = sse(c), fd = sse(d);
    for (int iter = 0; iter < 200 && (b - a) > 1e-8 * b; ++iter) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = sse(d);
        }
    }
    const double gamma = 0.5 * (a + b);
    if (!std::isfinite(gamma) || gamma <= 0.0) {
        throw fit_error("gamma calibration did not converge", best_sse);
    }
    return gamma;
}

} // namespace ladder
