#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ladder/observables.hpp"

namespace ladder {

// Stochastic spin-flip model: nearest-neighbour rates between x-subspaces,
// R(X -> X+-2) = (gamma kappa^2 N / 2) (1/2 -+ X/N)^2.
struct SpinFlipModel {
    int n_spins = 0;
    double gamma = 1.0; // overall time constant, calibrated by fit_gamma
    double kappa = 0.2;
};

enum class FlipDirection { up, down }; // X -> X+2 / X -> X-2

double spinflip_rate(const SpinFlipModel& model, int x, FlipDirection direction);

// Column-stochastic transition probabilities between x-subspaces at lag tau.
// Layout: w[to_slot * n + from_slot] with slots following x_values ascending.
struct TransitionMatrix {
    double tau = 0.0;
    std::vector<int> x_values;
    std::vector<double> w;
    std::vector<double> std_err;      // zero for model-derived matrices
    int seeds_per_column = 0;
    double min_entry_before_clamp = 0.0;

    std::size_t size() const { return x_values.size(); }
    double at(std::size_t to_slot, std::size_t from_slot) const {
        return w[to_slot * size() + from_slot];
    }
};

// Lag-tau change of the mean (f) and growth of the variance (D) starting
// from a point mass at each X.
struct DriftDiffusion {
    double tau = 0.0;
    std::vector<int> x_values;
    std::vector<double> f;
    std::vector<double> d;
};

// Generator of the spin-flip chain, row-major (N/2+1 square), columns sum to 0.
std::vector<double> spinflip_generator(const SpinFlipModel& model);

// Detailed-balance stationary distribution of the spin-flip chain.
std::vector<double> spinflip_stationary(const SpinFlipModel& model);

// P(t) = exp(G t) P0, exact through the symmetrized eigendecomposition of
// the tridiagonal generator.
std::vector<double> master_evolve(const SpinFlipModel& model, const std::vector<double>& p0,
                                  double t);

// u(tau): master_evolve of every point mass; entries clamped to [0,1] with
// the worst pre-clamp value recorded.
TransitionMatrix finite_time_matrix(const SpinFlipModel& model, double tau);

struct WMeasureParams {
    double tau = 15.0;
    int seeds_per_column = 5;
    std::uint64_t root_seed = 1;
    double sigma_h_target = 0.37;
    double e0 = 0.0;
    int workers = 1;
};

// w_XY(tau) = |P_X e^{-i tau H} |omega_Y>|^2, measured column by column and
// averaged over seeds; alpha is tuned per column against sigma_h_target with
// the column's first seed. Optionally reports the tuned alphas.
TransitionMatrix measure_transition_matrix(std::shared_ptr<const LadderHamiltonian> h,
                                           const SpectralBounds& bounds,
                                           const WMeasureParams& params,
                                           std::vector<double>* alpha_per_column = nullptr);

// P(n tau) for n = 0..n_steps via repeated application of W.
std::vector<std::vector<double>> markov_iterate(const TransitionMatrix& w,
                                                const std::vector<double>& p0, int n_steps);

// Stationary distribution of a column-stochastic matrix by power iteration.
std::vector<double> stationary_of(const TransitionMatrix& w);

DriftDiffusion extract_drift_diffusion(const TransitionMatrix& w);
DriftDiffusion extract_drift_diffusion(const SpinFlipModel& model, double tau);

// Least-squares calibration of gamma against a quantum mean_x trace that
// starts near equilibrium (|mean_x(0)| <= 2). The master equation is started
// from the trace's measured initial P_X and compared over the relaxation
// window (start to equilibration, full trace if it never equilibrates).
double fit_gamma(const ObservableTrace& quantum_trace, const SpinFlipModel& model);

} // namespace ladder
