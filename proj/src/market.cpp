// SPDX-License-Identifier: MIT
#include "riskstop/market.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "riskstop/parallel.hpp"

namespace riskstop {

void GbmParams::validate() const {
    if (!(s0 > 0.0)) throw ValidationError("gbm: s0 must be positive");
    if (!(sigma >= 0.0)) throw ValidationError("gbm: sigma must be nonnegative");
    if (d < 1) throw ValidationError("gbm: need at least one asset");
    if (!std::isfinite(r) || !std::isfinite(delta))
        throw ValidationError("gbm: rates must be finite");
}

ExerciseGrid ExerciseGrid::equidistant(double maturity, int steps) {
    if (!(maturity > 0.0) || steps < 1)
        throw ValidationError("grid: maturity must be positive and steps >= 1");
    ExerciseGrid g;
    g.dates.resize(steps + 1);
    for (int j = 0; j <= steps; ++j)
        g.dates[j] = maturity * static_cast<double>(j) / steps;
    return g;
}

void ExerciseGrid::validate() const {
    if (dates.empty()) throw ValidationError("grid: no dates");
    if (dates.front() != 0.0) throw ValidationError("grid: first date must be 0");
    for (std::size_t j = 1; j < dates.size(); ++j)
        if (!(dates[j] > dates[j - 1]))
            throw ValidationError("grid: dates must be strictly increasing");
}

void PayoffSpec::validate() const {
    if (!(strike >= 0.0)) throw ValidationError("payoff: strike must be nonnegative");
}

GbmModel::GbmModel(GbmParams params, ExerciseGrid grid)
    : params_(params), grid_(std::move(grid)) {
    params_.validate();
    grid_.validate();
    const int J = grid_.steps();
    drift_.resize(J);
    vol_.resize(J);
    for (int j = 0; j < J; ++j) {
        const double dt = grid_.dates[j + 1] - grid_.dates[j];
        drift_[j] = (params_.r - params_.delta - 0.5 * params_.sigma * params_.sigma) * dt;
        vol_[j] = params_.sigma * std::sqrt(dt);
    }
}

void GbmModel::initial_state(std::span<double> out) const {
    for (int i = 0; i < params_.d; ++i) out[i] = params_.s0;
}

void GbmModel::step(std::span<double> state, int from_date,
                    SubstreamRng& rng) const {
    for (int i = 0; i < params_.d; ++i)
        state[i] *= std::exp(drift_[from_date] + vol_[from_date] * rng.normal());
}

PathSet PathModel::sample(int n, std::uint64_t seed, StreamPurpose purpose) const {
    if (n < 1) throw ValidationError("sample: need at least one path");
    const int d = assets();
    const int n_dates = grid().steps() + 1;
    PathSet out;
    out.n_paths = n;
    out.n_dates = n_dates;
    out.n_assets = d;
    out.seed = seed;
    out.purpose = purpose;
    out.params = params();
    out.grid = grid();
    out.prices.resize(static_cast<std::size_t>(n) * n_dates * d);
    parallel_for(n, [&](long i) {
        SubstreamRng rng(seed, purpose, static_cast<std::uint64_t>(i));
        double* row = &out.prices[static_cast<std::size_t>(i) * n_dates * d];
        initial_state({row, static_cast<std::size_t>(d)});
        for (int j = 0; j + 1 < n_dates; ++j) {
            double* cur = row + static_cast<std::size_t>(j) * d;
            double* nxt = cur + d;
            for (int k = 0; k < d; ++k) nxt[k] = cur[k];
            step({nxt, static_cast<std::size_t>(d)}, j, rng);
        }
    });
    return out;
}

PathSet simulate_paths(const GbmParams& params, const ExerciseGrid& grid, int n,
                       std::uint64_t seed, StreamPurpose purpose) {
    return GbmModel(params, grid).sample(n, seed, purpose);
}

double payoff(const PayoffSpec& spec, const PathSet& paths, int path, int date) {
    if (path < 0 || path >= paths.n_paths || date < 0 || date >= paths.n_dates)
        throw ValidationError("payoff: path or date index out of range");
    double best = 0.0;
    const auto s = paths.state(path, date);
    for (double v : s) best = std::max(best, v);
    const double intrinsic = best - spec.strike;
    if (intrinsic <= 0.0) return 0.0;
    return std::exp(-paths.params.r * paths.grid.dates[date]) * intrinsic;
}

Eigen::MatrixXd payoff_matrix(const PayoffSpec& spec, const PathSet& paths) {
    Eigen::MatrixXd y(paths.n_paths, paths.n_dates);
    std::vector<double> disc(paths.n_dates);
    for (int j = 0; j < paths.n_dates; ++j)
        disc[j] = std::exp(-paths.params.r * paths.grid.dates[j]);
    parallel_for(paths.n_paths, [&](long i) {
        for (int j = 0; j < paths.n_dates; ++j) {
            double best = 0.0;
            for (double v : paths.state(static_cast<int>(i), j))
                best = std::max(best, v);
            const double intrinsic = best - spec.strike;
            y(i, j) = intrinsic > 0.0 ? disc[j] * intrinsic : 0.0;
        }
    });
    return y;
}

void write_paths_csv(const PathSet& paths, std::ostream& out) {
    out << paths.n_paths << ',' << paths.n_dates << ',' << paths.n_assets << ','
        << paths.seed << '\n';
    char buf[40];
    for (int i = 0; i < paths.n_paths; ++i) {
        for (int j = 0; j < paths.n_dates; ++j) {
            for (int k = 0; k < paths.n_assets; ++k) {
                std::snprintf(buf, sizeof buf, "%a", paths.price(i, j, k));
                out << buf << (k + 1 < paths.n_assets ? "," : "");
            }
            out << '\n';
        }
    }
}

PathSet read_paths_csv(std::istream& in) {
    PathSet p;
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("paths csv: missing header");
    if (std::sscanf(line.c_str(), "%d,%d,%d,%llu", &p.n_paths, &p.n_dates,
                    &p.n_assets,
                    reinterpret_cast<unsigned long long*>(&p.seed)) != 4)
        throw ValidationError("paths csv: bad header: " + line);
    if (p.n_paths < 1 || p.n_dates < 1 || p.n_assets < 1)
        throw ValidationError("paths csv: nonpositive dimensions");
    p.prices.reserve(static_cast<std::size_t>(p.n_paths) * p.n_dates * p.n_assets);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ','))
            p.prices.push_back(std::strtod(cell.c_str(), nullptr));
    }
    if (p.prices.size() !=
        static_cast<std::size_t>(p.n_paths) * p.n_dates * p.n_assets)
        throw ValidationError("paths csv: row count does not match header");
    return p;
}

}  // namespace riskstop
