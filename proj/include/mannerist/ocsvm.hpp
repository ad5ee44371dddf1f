#pragma once

#include <cstddef>
#include <cstdint>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "mannerist/correlation.hpp"

namespace mannerist {

/// Row-major sample matrix: one row per clip.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// exp(-gamma * |x - y|^2), floored at the smallest normal double so the
/// value stays strictly positive. Throws std::invalid_argument on a dimension
/// mismatch or non-positive gamma.
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// Least-recently-used cache of Gaussian kernel rows over a fixed data set.
/// Rows are handed out as shared pointers so eviction never invalidates a
/// row a caller still holds. Values do not depend on the budget.
class KernelCache {
public:
    KernelCache(const Matrix& data, double gamma, std::size_t budget_bytes);

    std::size_t size() const { return static_cast<std::size_t>(data_.rows()); }
    double gamma() const { return gamma_; }
    std::size_t capacity_rows() const { return capacity_rows_; }

    std::shared_ptr<const std::vector<double>> row(std::size_t i);

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    std::vector<double> compute_row(std::size_t i) const;

    const Matrix& data_;
    double gamma_;
    std::size_t capacity_rows_;
    std::list<std::size_t> lru_;  // front = most recent
    struct Entry {
        std::shared_ptr<const std::vector<double>> values;
        std::list<std::size_t>::iterator position;
    };
    std::unordered_map<std::size_t, Entry> entries_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

struct SolverOptions {
    double tolerance = 1e-6;             // stop when the maximal KKT violation is at most this
    std::size_t max_iterations = 1'000'000;
    std::size_t cache_bytes = 64u << 20;
};

struct DualSolution {
    std::vector<double> alphas;    // one per training row, zeros included
    std::vector<double> gradient;  // K * alphas
    double rho = 0.0;
    std::size_t iterations = 0;
    double max_violation = 0.0;
};

/// Solves the one-class dual
///     min 1/2 a'Ka  s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1
/// by SMO: each step moves mass between the maximal violating pair chosen by
/// first-order (gradient) selection. rho is the mean gradient over unbounded
/// support vectors, or the midpoint of the feasible interval if there are
/// none. Throws ConvergenceError after options.max_iterations.
DualSolution solve_dual(KernelCache& kernel, double nu, const SolverOptions& options = {});

struct ModelMetadata {
    std::size_t training_size = 0;
    std::string training_date;
    std::string persona_label;
    std::string family;
    double calibration_target = 0.0;
};

struct SvmModel {
    Matrix support_vectors;
    std::vector<double> alphas;
    double rho = 0.0;
    double gamma = 1.0;
    double nu = 0.5;
    double threshold = 0.0;
    std::string feature_order_hash;
    /// Pair indices (ascending) the model was trained on. Empty means all 496.
    std::vector<std::size_t> feature_subset;
    ModelMetadata metadata;

    std::size_t dimension() const { return static_cast<std::size_t>(support_vectors.cols()); }

    /// Decision value g(x) = sum_i alpha_i k(sv_i, x) - rho on an input
    /// already restricted to the model's feature subset.
    double decision(std::span<const double> x) const;
};

/// Trains on the rows of `samples`. The returned model's feature subset is
/// empty; callers training on a projection set it themselves.
SvmModel train(const Matrix& samples, double gamma, double nu, const SolverOptions& options = {});

/// g(x) for a full correlation vector. Throws IncompatibleError when the
/// feature-order hashes of model and vector differ.
double score(const SvmModel& model, const CorrelationVector& x);

/// Decision values for every row of an already-projected matrix.
std::vector<double> decision_values(const SvmModel& model, const Matrix& samples);

/// Threshold t = s[floor((1 - target) n)] of the ascending-sorted scores, so
/// that at least target * n scores are >= t. Throws std::invalid_argument on
/// empty input or target outside (0, 1).
double calibrate_threshold(std::span<const double> scores, double target);

/// Fraction of scores >= threshold.
double acceptance_rate(std::span<const double> scores, double threshold);

// ---------------------------------------------------------------------------

struct HyperGrid {
    std::vector<double> gammas;
    std::vector<double> nus;

    /// gamma in {2^-12, 2^-10, ..., 2^2}, nu in {0.01, 0.05, 0.1, 0.2}.
    static HyperGrid defaults();
    void validate() const;
};

struct GridSearchOptions {
    /// Fraction of the real training rows held out to score each cell. Zero
    /// scores cells on the rows they were trained on.
    double validation_fraction = 0.25;
    std::uint64_t seed = 0;
    SolverOptions solver;
    unsigned jobs = 1;
};

struct GridCell {
    double gamma = 0.0;
    double nu = 0.0;
    double objective = 0.0;
    double true_positive_rate = 0.0;
    double true_negative_rate = 0.0;
    bool failed = false;
};

struct GridSearchResult {
    double gamma = 0.0;
    double nu = 0.0;
    double objective = 0.0;
    bool used_decoys = false;
    SvmModel model;
    std::vector<GridCell> cells;  // gamma-major order
};

/// Scores every (gamma, nu) cell and keeps the best: balanced accuracy
/// (TPR on real + TNR on decoys) / 2 when decoys are given, TPR otherwise,
/// each at the threshold calibrated to `target`. Ties go to the smaller gamma,
/// then the smaller nu. The winning cell is retrained on all of `real` and
/// calibrated there.
GridSearchResult grid_search(const Matrix& real, const Matrix* decoys, const HyperGrid& grid,
                             double target, const GridSearchOptions& options = {});

// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelSchemaVersion = "mannerist-model/1";

std::string save_model(const SvmModel& model);

/// Throws SchemaError on malformed or truncated input and IncompatibleError
/// on a schema version mismatch.
SvmModel load_model(std::string_view text);

} // namespace mannerist
