// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "riskstop/errors.hpp"
#include "riskstop/rng.hpp"

namespace riskstop {

/// Geometric Brownian motion with d independent assets sharing one
/// parameter set: dX^i/X^i = (r - delta) dt + sigma dW^i.
struct GbmParams {
    double s0 = 90.0;      // initial price per asset
    double r = 0.05;       // risk-free rate, per year
    double delta = 0.10;   // dividend yield, per year
    double sigma = 0.20;   // volatility, per sqrt-year
    int d = 2;             // asset count

    void validate() const;
};

/// Exercise dates t_0 < t_1 < ... < t_J in years, t_0 = 0.
struct ExerciseGrid {
    std::vector<double> dates;

    /// {0, T/steps, 2T/steps, ..., T}.
    static ExerciseGrid equidistant(double maturity, int steps);

    int steps() const { return static_cast<int>(dates.size()) - 1; }
    double maturity() const { return dates.back(); }
    void validate() const;
};

/// Discounted max-call payoff: Y_t = e^{-r t} (max_i X^i_t - K)+.
struct PayoffSpec {
    double strike = 100.0;

    void validate() const;
};

/// Simulated price trajectories on an exercise grid: n_paths x (J+1) dates
/// x d assets, flat row-major storage. Immutable after construction and
/// safe to share across threads.
struct PathSet {
    int n_paths = 0;
    int n_dates = 0;
    int n_assets = 0;
    std::uint64_t seed = 0;
    StreamPurpose purpose = StreamPurpose::Generic;
    GbmParams params;
    ExerciseGrid grid;
    std::vector<double> prices;

    double price(int path, int date, int asset) const {
        return prices[(static_cast<std::size_t>(path) * n_dates + date) * n_assets +
                      asset];
    }
    std::span<const double> state(int path, int date) const {
        return {&prices[(static_cast<std::size_t>(path) * n_dates + date) * n_assets],
                static_cast<std::size_t>(n_assets)};
    }
};

/// A simulatable market model on an exercise grid. Two implementations:
/// GbmModel here and BinomialModel in lattice.hpp (the d = 1 cross-check).
/// step() advances one grid interval using draws from the given stream,
/// which is what the nested-simulation dual uses to branch sub-paths off
/// an outer state.
class PathModel {
public:
    virtual ~PathModel() = default;

    virtual int assets() const = 0;
    virtual const ExerciseGrid& grid() const = 0;
    virtual const GbmParams& params() const = 0;
    virtual void initial_state(std::span<double> out) const = 0;
    virtual void step(std::span<double> state, int from_date,
                      SubstreamRng& rng) const = 0;

    /// Simulates n full paths. Path i consumes only the substream
    /// (seed, purpose, i), so the result is identical for identical
    /// arguments regardless of thread count, and a longer run extends a
    /// shorter one path-for-path.
    PathSet sample(int n, std::uint64_t seed,
                   StreamPurpose purpose = StreamPurpose::Generic) const;
};

class GbmModel final : public PathModel {
public:
    GbmModel(GbmParams params, ExerciseGrid grid);

    int assets() const override { return params_.d; }
    const ExerciseGrid& grid() const override { return grid_; }
    const GbmParams& params() const override { return params_; }
    void initial_state(std::span<double> out) const override;
    void step(std::span<double> state, int from_date,
              SubstreamRng& rng) const override;

private:
    GbmParams params_;
    ExerciseGrid grid_;
    std::vector<double> drift_;  // (r - delta - sigma^2/2) * dt_j per interval
    std::vector<double> vol_;    // sigma * sqrt(dt_j)
};

/// Exact lognormal stepping X_{t+dt} = X_t exp((r - delta - sigma^2/2) dt
/// + sigma sqrt(dt) Z); no Euler bias.
PathSet simulate_paths(const GbmParams& params, const ExerciseGrid& grid, int n,
                       std::uint64_t seed,
                       StreamPurpose purpose = StreamPurpose::Generic);

/// e^{-r t_j} (max_i X^i_{t_j} - K)+ for one path and date.
double payoff(const PayoffSpec& spec, const PathSet& paths, int path, int date);

/// All payoffs at once, n_paths x n_dates.
Eigen::MatrixXd payoff_matrix(const PayoffSpec& spec, const PathSet& paths);

/// CSV layout: one header line "n,dates,assets,seed" then one row per
/// (path, date) with the asset prices. Round-trips bit-exactly through
/// hex float formatting.
void write_paths_csv(const PathSet& paths, std::ostream& out);
PathSet read_paths_csv(std::istream& in);

}  // namespace riskstop
