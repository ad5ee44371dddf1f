#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mannerist/correlation.hpp"
#include "mannerist/ocsvm.hpp"

namespace mannerist {

enum class Label { Target, NonTarget };

/// Clips of one provenance, all sharing one label. `vectors` has one
/// 496-column row per clip.
struct LabeledClipSet {
    std::string name;
    Label label = Label::NonTarget;
    Matrix vectors;
};

Matrix to_matrix(std::span<const ClipFeatures> clips);
Matrix project_columns(const Matrix& m, std::span<const std::size_t> columns);

enum class Family { Facial, Gestural, Combined };

std::string_view family_name(Family family);
std::optional<Family> parse_family(std::string_view name);

/// Pair indices of a family: facial = pairs within features 0-19 (190),
/// gestural = pairs within 20-31 (66), combined = all 496.
std::vector<std::size_t> family_pairs(Family family);

/// Calibration target: 0.95 for a single family, 0.99 for combined.
double default_target(Family family);

/// Fraction of scores on the correct side of the threshold: >= for target
/// sets, < for non-target sets.
double set_accuracy(std::span<const double> scores, double threshold, Label label);

struct EvalOptions {
    std::size_t repeats = 100;
    double train_fraction = 0.8;
    HyperGrid grid = HyperGrid::defaults();
    double target = 0.99;
    std::uint64_t seed = 0;
    /// Pair indices to train on; empty = all 496.
    std::vector<std::size_t> feature_subset;
    /// Cell scoring inside each grid search (validation fraction, solver).
    GridSearchOptions grid_options;
    /// Concurrent repeats / subset samples.
    unsigned jobs = 1;
    std::string real_name = "real";
};

struct SetAccuracy {
    std::string name;
    Label label = Label::Target;
    std::size_t n_clips = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::vector<double> per_repeat;
};

struct RepeatChoice {
    double gamma = 0.0;
    double nu = 0.0;
    double threshold = 0.0;
};

struct DatasetReport {
    std::string protocol = "repeated-split";
    std::uint64_t seed = 0;
    std::size_t repeats = 0;
    std::string family;
    double target = 0.0;
    double train_fraction = 0.8;
    std::vector<SetAccuracy> per_set;  // the real set first, then decoys in input order
    std::vector<RepeatChoice> choices;

    /// Per repeat, the mean of the real-set accuracy and the accuracy on all
    /// held-out non-target clips pooled.
    std::vector<double> balanced_per_repeat;

    const SetAccuracy* find(std::string_view name) const;
};

/// Per repeat: seeded 80/20 split of the real set and of every decoy set,
/// grid search (decoy training sides pooled), train and calibrate on the
/// training side, then accuracy on each held-out side. Throws
/// InsufficientDataError with fewer than 5 real clips.
DatasetReport repeated_split_eval(const Matrix& real, std::span<const LabeledClipSet> decoys,
                                  const EvalOptions& options);

/// repeated_split_eval restricted to a family's pairs at its default target.
DatasetReport feature_family_eval(Family family, const Matrix& real, std::span<const LabeledClipSet> decoys,
                                  EvalOptions options);

// ---------------------------------------------------------------------------

struct SizeStats {
    std::size_t size = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    std::vector<double> accuracies;
};

struct SweepReport {
    std::uint64_t seed = 0;
    double target = 0.0;
    std::size_t samples_per_size = 0;
    std::vector<SizeStats> per_size;
};

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

/// For each size, `samples_per_size` uniformly random feature subsets are
/// trained on one fixed split and scored by their rejection rate on the
/// pooled held-out non-target clips.
SweepReport subset_sweep(const Matrix& real, std::span<const LabeledClipSet> decoys,
                         std::span<const std::size_t> sizes, std::size_t samples_per_size,
                         const EvalOptions& options);

struct ImportanceRow {
    std::size_t pair = 0;
    std::string name;
    std::size_t participation = 0;
    std::optional<double> mean_accuracy;  // empty when the pair was never drawn
};

struct ImportanceTable {
    std::uint64_t seed = 0;
    std::size_t n_classifiers = 0;
    std::size_t subset_size = 0;
    double min_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::vector<double> classifier_accuracies;
    std::vector<ImportanceRow> rows;  // mean accuracy descending, absent pairs last
};

/// Random feature subsets for the importance study. Subsets are consecutive
/// blocks of a stream of random permutations of the 496 pairs, so every
/// subset is a uniform random draw while participation stays balanced.
std::vector<std::vector<std::size_t>> importance_subsets(std::size_t n_classifiers, std::size_t subset_size,
                                                         std::uint64_t seed);

/// Trains one classifier per subset on a fixed split and ranks each pair by
/// the mean accuracy of the classifiers that contained it.
ImportanceTable feature_importance(const Matrix& real, std::span<const LabeledClipSet> decoys,
                                   std::size_t n_classifiers, std::size_t subset_size,
                                   const EvalOptions& options);

// ---------------------------------------------------------------------------

std::string report_to_json(const DatasetReport& report);
std::string sweep_to_json(const SweepReport& report);
std::string importance_to_json(const ImportanceTable& table);

/// Plain-text accuracy table, one row per report (labelled by family), one
/// column per set, values in percent.
std::string format_table(std::span<const DatasetReport> reports);

} // namespace mannerist
