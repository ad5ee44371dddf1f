#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "mannerist/errors.hpp"
#include "mannerist/ocsvm.hpp"
#include "mannerist/parallel.hpp"
#include "mannerist/rng.hpp"

namespace mannerist {

HyperGrid HyperGrid::defaults() {
    HyperGrid grid;
    for (int e = -12; e <= 2; e += 2) grid.gammas.push_back(std::ldexp(1.0, e));
    grid.nus = {0.01, 0.05, 0.1, 0.2};
    return grid;
}

void HyperGrid::validate() const {
    if (gammas.empty() || nus.empty()) throw std::invalid_argument("hyperparameter grid is empty");
    for (const double g : gammas) {
        if (!(g > 0.0)) throw std::invalid_argument("grid gamma must be positive");
    }
    for (const double v : nus) {
        if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("grid nu must be in (0, 1)");
    }
}

namespace {

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

double rejection_rate(std::span<const double> scores, double threshold) {
    return scores.empty() ? 0.0 : 1.0 - acceptance_rate(scores, threshold);
}

// Strict improvement, or equal objective with (gamma, nu) lexicographically smaller.
bool better(const GridCell& a, const GridCell& b) {
    if (a.objective != b.objective) return a.objective > b.objective;
    if (a.gamma != b.gamma) return a.gamma < b.gamma;
    return a.nu < b.nu;
}

} // namespace

GridSearchResult grid_search(const Matrix& real, const Matrix* decoys, const HyperGrid& grid,
                             double target, const GridSearchOptions& options) {
    grid.validate();
    if (real.rows() == 0) throw InsufficientDataError("grid search needs real training clips");
    const bool use_decoys = decoys != nullptr && decoys->rows() > 0;

    // Inner split of the real rows: cells are fit on `fit_rows` and their TPR
    // is measured on `check_rows`.
    const auto n = static_cast<std::size_t>(real.rows());
    auto n_check = static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(n)));
    Matrix fit_rows;
    Matrix check_rows;
    const bool held_out = n_check >= 1 && n_check < n;
    if (held_out) {
        Rng rng(options.seed);
        const auto order = rng.permutation(n);
        fit_rows = select_rows(real, std::span(order).subspan(n_check));
        check_rows = select_rows(real, std::span(order).first(n_check));
    }
    const Matrix& fit_set = held_out ? fit_rows : real;
    const Matrix& check_set = held_out ? check_rows : real;

    std::vector<GridCell> cells;
    for (const double g : grid.gammas) {
        for (const double v : grid.nus) cells.push_back({g, v});
    }

    parallel_for(cells.size(), options.jobs, [&](std::size_t c) {
        auto& cell = cells[c];
        try {
            const auto model = train(fit_set, cell.gamma, cell.nu, options.solver);
            const auto fit_scores = decision_values(model, fit_set);
            const double t = calibrate_threshold(fit_scores, target);
            cell.true_positive_rate =
                held_out ? acceptance_rate(decision_values(model, check_set), t) : acceptance_rate(fit_scores, t);
            if (use_decoys) {
                cell.true_negative_rate = rejection_rate(decision_values(model, *decoys), t);
                cell.objective = 0.5 * (cell.true_positive_rate + cell.true_negative_rate);
            } else {
                cell.objective = cell.true_positive_rate;
            }
        } catch (const ConvergenceError&) {
            cell.failed = true;
            cell.objective = -std::numeric_limits<double>::infinity();
        }
    });

    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].failed) continue;
        if (!best || better(cells[c], cells[*best])) best = c;
    }
    if (!best) throw ConvergenceError("no grid cell converged", std::numeric_limits<double>::infinity());

    GridSearchResult result;
    result.gamma = cells[*best].gamma;
    result.nu = cells[*best].nu;
    result.objective = cells[*best].objective;
    result.used_decoys = use_decoys;
    result.model = train(real, result.gamma, result.nu, options.solver);
    result.model.threshold = calibrate_threshold(decision_values(result.model, real), target);
    result.model.metadata.calibration_target = target;
    result.cells = std::move(cells);
    return result;
}

} // namespace mannerist
