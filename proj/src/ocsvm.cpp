#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mannerist/errors.hpp"
#include "mannerist/ocsvm.hpp"

namespace mannerist {

namespace {

enum class Bound : unsigned char { Lower, Free, Upper };

// Curvature floor for duplicate points, where k_ii + k_jj - 2 k_ij = 0.
constexpr double kMinCurvature = 1e-12;

} // namespace

DualSolution solve_dual(KernelCache& kernel, double nu, const SolverOptions& options) {
    const std::size_t n = kernel.size();
    if (n == 0) throw InsufficientDataError("cannot train on an empty set");
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("nu must be in (0, 1]");

    const double upper = 1.0 / (nu * static_cast<double>(n));
    DualSolution sol;
    auto& alpha = sol.alphas;
    alpha.assign(n, 0.0);
    std::vector<Bound> status(n, Bound::Lower);

    auto set_status = [&](std::size_t i) {
        if (alpha[i] >= upper) {
            alpha[i] = upper;
            status[i] = Bound::Upper;
        } else if (alpha[i] <= 0.0) {
            alpha[i] = 0.0;
            status[i] = Bound::Lower;
        } else {
            status[i] = Bound::Free;
        }
    };

    // Feasible start: fill the first floor(1/upper) variables to the bound and
    // put the remainder on the next one.
    {
        double remaining = 1.0;
        for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
            alpha[i] = std::min(upper, remaining);
            remaining -= alpha[i];
            if (remaining < 1e-15) remaining = 0.0;
            set_status(i);
        }
    }

    auto& grad = sol.gradient;
    grad.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] == 0.0) continue;
        const auto row = kernel.row(i);
        for (std::size_t k = 0; k < n; ++k) grad[k] += alpha[i] * (*row)[k];
    }

    for (;;) {
        // i: can grow (a_i < upper), smallest gradient.
        // j: can shrink (a_j > 0), largest gradient.
        std::size_t up = n;
        std::size_t down = n;
        double g_min = std::numeric_limits<double>::infinity();
        double g_max = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            if (status[k] != Bound::Upper && grad[k] < g_min) {
                g_min = grad[k];
                up = k;
            }
            if (status[k] != Bound::Lower && grad[k] > g_max) {
                g_max = grad[k];
                down = k;
            }
        }
        sol.max_violation = (up == n || down == n) ? 0.0 : std::max(0.0, g_max - g_min);
        if (sol.max_violation <= options.tolerance) break;
        if (sol.iterations >= options.max_iterations) {
            throw ConvergenceError("one-class SVM solver did not converge in " +
                                       std::to_string(options.max_iterations) +
                                       " iterations (max KKT violation " +
                                       std::to_string(sol.max_violation) + ")",
                                   sol.max_violation);
        }
        ++sol.iterations;

        const auto row_up = kernel.row(up);
        const auto row_down = kernel.row(down);
        const double curvature = std::max((*row_up)[up] + (*row_down)[down] - 2.0 * (*row_up)[down],
                                          kMinCurvature);
        double step = (g_max - g_min) / curvature;
        step = std::min({step, upper - alpha[up], alpha[down]});

        const double old_up = alpha[up];
        const double old_down = alpha[down];
        alpha[up] += step;
        alpha[down] -= step;
        set_status(up);
        set_status(down);
        const double delta_up = alpha[up] - old_up;
        const double delta_down = alpha[down] - old_down;
        for (std::size_t k = 0; k < n; ++k) {
            grad[k] += delta_up * (*row_up)[k] + delta_down * (*row_down)[k];
        }
    }

    double free_sum = 0.0;
    std::size_t free_count = 0;
    double lower_side = -std::numeric_limits<double>::infinity();  // max gradient at the upper bound
    double upper_side = std::numeric_limits<double>::infinity();   // min gradient at zero
    for (std::size_t k = 0; k < n; ++k) {
        switch (status[k]) {
        case Bound::Free:
            free_sum += grad[k];
            ++free_count;
            break;
        case Bound::Upper:
            lower_side = std::max(lower_side, grad[k]);
            break;
        case Bound::Lower:
            upper_side = std::min(upper_side, grad[k]);
            break;
        }
    }
    if (free_count > 0) {
        sol.rho = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(lower_side) && std::isfinite(upper_side)) {
        sol.rho = 0.5 * (lower_side + upper_side);
    } else {
        sol.rho = std::isfinite(lower_side) ? lower_side : upper_side;
    }
    return sol;
}

SvmModel train(const Matrix& samples, double gamma, double nu, const SolverOptions& options) {
    if (samples.rows() == 0) throw InsufficientDataError("cannot train on an empty set");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");

    KernelCache kernel(samples, gamma, options.cache_bytes);
    const auto sol = solve_dual(kernel, nu, options);

    SvmModel model;
    model.gamma = gamma;
    model.nu = nu;
    model.rho = sol.rho;
    model.feature_order_hash = feature_order_hash();
    model.metadata.training_size = static_cast<std::size_t>(samples.rows());

    std::vector<Eigen::Index> support;
    for (std::size_t i = 0; i < sol.alphas.size(); ++i) {
        if (sol.alphas[i] > 0.0) support.push_back(static_cast<Eigen::Index>(i));
    }
    model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), samples.cols());
    model.alphas.reserve(support.size());
    for (std::size_t s = 0; s < support.size(); ++s) {
        model.support_vectors.row(static_cast<Eigen::Index>(s)) = samples.row(support[s]);
        model.alphas.push_back(sol.alphas[static_cast<std::size_t>(support[s])]);
    }
    return model;
}

double SvmModel::decision(std::span<const double> x) const {
    const auto dim = dimension();
    if (x.size() != dim) {
        throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                    ", model expects " + std::to_string(dim));
    }
    double sum = 0.0;
    for (Eigen::Index s = 0; s < support_vectors.rows(); ++s) {
        sum += alphas[static_cast<std::size_t>(s)] *
               rbf_kernel({support_vectors.row(s).data(), dim}, x, gamma);
    }
    return sum - rho;
}

double score(const SvmModel& model, const CorrelationVector& x) {
    if (model.feature_order_hash != x.feature_order_hash) {
        throw IncompatibleError("model feature order " + model.feature_order_hash +
                                " does not match vector feature order " + x.feature_order_hash);
    }
    if (x.values.size() != kPairCount) {
        throw std::invalid_argument("correlation vector must have 496 entries");
    }
    if (model.feature_subset.empty()) return model.decision(x.values);
    std::vector<double> projected;
    projected.reserve(model.feature_subset.size());
    for (const auto k : model.feature_subset) projected.push_back(x.values.at(k));
    return model.decision(projected);
}

std::vector<double> decision_values(const SvmModel& model, const Matrix& samples) {
    std::vector<double> out(static_cast<std::size_t>(samples.rows()));
    const auto dim = static_cast<std::size_t>(samples.cols());
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = model.decision({samples.row(r).data(), dim});
    }
    return out;
}

double calibrate_threshold(std::span<const double> scores, double target) {
    if (scores.empty()) throw std::invalid_argument("cannot calibrate on an empty score set");
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("target must be in (0, 1)");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    // The small slack keeps e.g. (1 - 0.95) * 100 from landing a hair below 5.
    auto k = static_cast<std::size_t>(std::floor((1.0 - target) * n + 1e-9));
    k = std::min(k, sorted.size() - 1);
    return sorted[k];
}

double acceptance_rate(std::span<const double> scores, double threshold) {
    if (scores.empty()) return 0.0;
    const auto accepted = std::count_if(scores.begin(), scores.end(),
                                        [threshold](double s) { return s >= threshold; });
    return static_cast<double>(accepted) / static_cast<double>(scores.size());
}

} // namespace mannerist
