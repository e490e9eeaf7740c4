#pragma once

#include <array>
#include <fstream>
#include <sstream>

#include "bifurcation.hpp"

namespace hopfval {

// Floating-point starting data for the pipelines.  Nothing here is rigorous;
// every seed is refined by Newton and then validated.

struct SeedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fourier coefficients of one period sampled on a uniform grid.
inline PointState orbit_from_samples(const std::vector<std::vector<double>>& samples, double period, double mu, int K) {
    const int N = static_cast<int>(samples.size());
    if (N < 2 * K + 2) throw SeedError("need at least 2K+2 samples per period, got " + std::to_string(N));
    if (!(period > 0.0)) throw SeedError("period must be positive");
    const int n = static_cast<int>(samples[0].size());
    PointState x(n, 2, K);
    for (int i = 0; i < n; ++i)
        for (int k = -K; k <= K; ++k) {
            cplx c = 0.0;
            for (int j = 0; j < N; ++j) c += samples[j].at(i) * std::polar(1.0, -2.0 * M_PI * k * j / N);
            x.seqs[i][k] = c / static_cast<double>(N);
        }
    x.params[0] = period / (2.0 * M_PI);
    x.params[1] = mu;
    x.labels = {"tau", "mu"};
    return conj_sym_project(x);
}

struct IntegrateOptions {
    double dt = 1e-3;
    double transient = 200.0;
    int samples = 512;
    double max_period = 1e3;
};

// RK4 onto an attracting cycle, period from successive upward crossings of
// the section u_0 = mean(u_0), then one resampled period.
inline PointState integrate_orbit(const PolyField& f, std::vector<double> u, double mu, int K, const IntegrateOptions& opt = {}) {
    if (f.n_param() != 1) throw SeedError("integration seed expects exactly one parameter");
    const int n = f.n_state();
    if (static_cast<int>(u.size()) != n) throw SeedError("initial point has wrong dimension");
    auto rhs = [&](const std::vector<double>& v) { return eval_point(f, v, {mu}); };
    auto rk4 = [&](std::vector<double>& v, double h) {
        auto k1 = rhs(v);
        std::vector<double> t(n);
        for (int i = 0; i < n; ++i) t[i] = v[i] + 0.5 * h * k1[i];
        auto k2 = rhs(t);
        for (int i = 0; i < n; ++i) t[i] = v[i] + 0.5 * h * k2[i];
        auto k3 = rhs(t);
        for (int i = 0; i < n; ++i) t[i] = v[i] + h * k3[i];
        auto k4 = rhs(t);
        for (int i = 0; i < n; ++i) v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    };
    for (double t = 0.0; t < opt.transient; t += opt.dt) rk4(u, opt.dt);
    for (double v : u)
        if (!std::isfinite(v)) throw SeedError("trajectory diverged during the transient");
    // section level: midpoint of the range of u_0 over a long window
    double lo = u[0], hi = u[0];
    {
        auto v = u;
        for (double t = 0.0; t < 50.0; t += opt.dt) {
            rk4(v, opt.dt);
            lo = std::min(lo, v[0]);
            hi = std::max(hi, v[0]);
        }
    }
    if (!(hi - lo > 1e-8)) throw SeedError("trajectory converged to an equilibrium");
    const double level = 0.5 * (lo + hi);
    // time to the next upward crossing, located by bisection on the RK4 step
    auto next_crossing = [&](std::vector<double>& v) {
        double t = 0.0;
        while (t < opt.max_period) {
            auto w = v;
            rk4(v, opt.dt);
            t += opt.dt;
            if (w[0] < level && v[0] >= level) {
                double a = 0.0, b = opt.dt;
                for (int it = 0; it < 60; ++it) {
                    double m = 0.5 * (a + b);
                    auto z = w;
                    rk4(z, m);
                    (z[0] < level ? a : b) = m;
                }
                // land just past the section so the next search sees a full turn
                v = w;
                rk4(v, b);
                return t - opt.dt + b;
            }
        }
        throw SeedError("no section crossing within max_period");
    };
    next_crossing(u);
    double period = next_crossing(u);
    std::vector<std::vector<double>> samp(opt.samples);
    const int sub = std::max(1, static_cast<int>(std::ceil(period / opt.samples / opt.dt)));
    const double hs = period / opt.samples / sub;
    for (int j = 0; j < opt.samples; ++j) {
        samp[j] = u;
        for (int s = 0; s < sub; ++s) rk4(u, hs);
    }
    return orbit_from_samples(samp, period, mu, K);
}

// CSV with a header row and columns t,u1..un covering one period on a
// uniform grid (the closing sample at t0 + period is optional).
inline std::vector<std::vector<double>> read_time_series(const std::string& path, int n, double period) {
    std::ifstream in(path);
    if (!in) throw SeedError("cannot open time series '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::vector<double> ts;
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw SeedError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
        }
        if (static_cast<int>(v.size()) != n + 1)
            throw SeedError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(n + 1) + " columns");
        ts.push_back(v[0]);
        rows.emplace_back(v.begin() + 1, v.end());
    }
    if (rows.size() < 4) throw SeedError("time series has too few rows");
    if (std::fabs(ts.back() - ts.front() - period) < 1e-9 * std::max(1.0, period)) {
        ts.pop_back();
        rows.pop_back();
    }
    const double dt = period / static_cast<double>(rows.size());
    for (size_t j = 0; j < ts.size(); ++j)
        if (std::fabs(ts[j] - ts[0] - dt * static_cast<double>(j)) > 1e-6 * dt)
            throw SeedError("time series is not uniformly sampled over one period (row " + std::to_string(j + 2) + ")");
    return rows;
}

// Hopf-kind point at a = 0 from an eigenvector: ubar = Re(w e^{it}) so that
// v_1 = w / 2, v_{-1} = conj(w) / 2, tau = 1 / beta.
inline PointState hopf_seed_state(const HopfPoint& hp, int K) {
    const int n = static_cast<int>(hp.y.size());
    PointState x(n, 3 + n, K);
    for (int i = 0; i < n; ++i) {
        cplx w(hp.y1(i), hp.y2(i));
        x.seqs[i][1] = w / 2.0;
        x.seqs[i][-1] = std::conj(w) / 2.0;
        x.params[2 + i] = hp.y(i);
    }
    x.params[0] = 1.0 / hp.beta;
    x.params[1] = 0.0;
    x.params[2 + n] = hp.mu;
    x.labels = hopf_param_names(n, {"mu"});
    return conj_sym_project(x);
}

}  // namespace hopfval
