#include "mannerist/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "mannerist/errors.hpp"
#include "mannerist/parallel.hpp"
#include "mannerist/rng.hpp"

namespace mannerist {

Matrix to_matrix(std::span<const ClipFeatures> clips) {
    Matrix m(static_cast<Eigen::Index>(clips.size()), static_cast<Eigen::Index>(kPairCount));
    for (std::size_t r = 0; r < clips.size(); ++r) {
        const auto& v = clips[r].vector.values;
        if (v.size() != kPairCount) throw std::invalid_argument("clip vector must have 496 entries");
        for (std::size_t c = 0; c < kPairCount; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
        }
    }
    return m;
}

Matrix project_columns(const Matrix& m, std::span<const std::size_t> columns) {
    if (columns.empty()) return m;
    Matrix out(m.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = m.col(static_cast<Eigen::Index>(columns[c]));
    }
    return out;
}

std::string_view family_name(Family family) {
    switch (family) {
    case Family::Facial:
        return "facial";
    case Family::Gestural:
        return "gestural";
    case Family::Combined:
        return "combined";
    }
    return "combined";
}

std::optional<Family> parse_family(std::string_view name) {
    if (name == "facial") return Family::Facial;
    if (name == "gestural") return Family::Gestural;
    if (name == "combined") return Family::Combined;
    return std::nullopt;
}

std::vector<std::size_t> family_pairs(Family family) {
    std::vector<std::size_t> pairs;
    for (std::size_t idx = 0; idx < kPairCount; ++idx) {
        const auto [i, j] = pair_at(idx);
        const bool facial = j < kFacialCount;
        const bool gestural = i >= kFacialCount;
        if (family == Family::Combined || (family == Family::Facial && facial) ||
            (family == Family::Gestural && gestural)) {
            pairs.push_back(idx);
        }
    }
    return pairs;
}

double default_target(Family family) { return family == Family::Combined ? 0.99 : 0.95; }

double set_accuracy(std::span<const double> scores, double threshold, Label label) {
    if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double accepted = acceptance_rate(scores, threshold);
    return label == Label::Target ? accepted : 1.0 - accepted;
}

const SetAccuracy* DatasetReport::find(std::string_view name) const {
    for (const auto& s : per_set) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

namespace {

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

Matrix stack_rows(std::span<const Matrix> parts, Eigen::Index cols) {
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.rows();
    Matrix out(total, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        if (p.rows() == 0) continue;
        out.middleRows(at, p.rows()) = p;
        at += p.rows();
    }
    return out;
}

struct Split {
    Matrix train;
    Matrix test;
};

// Seeded shuffle, first floor(fraction * n) rows to training. When
// `keep_both` the training side gets at least one row and the test side too.
Split split_rows(const Matrix& m, double fraction, Rng& rng, bool keep_both) {
    const auto n = static_cast<std::size_t>(m.rows());
    const auto order = rng.permutation(n);
    auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (keep_both) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    n_train = std::min(n_train, n);
    const std::span<const std::size_t> all(order);
    return {select_rows(m, all.first(n_train)), select_rows(m, all.subspan(n_train))};
}

struct SplitData {
    Matrix real_train;
    Matrix real_test;
    Matrix decoy_train;  // all decoy training sides, stacked
    std::vector<Matrix> decoy_tests;
};

SplitData split_all(const Matrix& real, std::span<const LabeledClipSet> decoys, double fraction, Rng& rng,
                    std::span<const std::size_t> columns) {
    SplitData data;
    auto r = split_rows(real, fraction, rng, true);
    data.real_train = project_columns(r.train, columns);
    data.real_test = project_columns(r.test, columns);
    std::vector<Matrix> decoy_trains;
    for (const auto& set : decoys) {
        auto d = split_rows(set.vectors, fraction, rng, false);
        decoy_trains.push_back(project_columns(d.train, columns));
        data.decoy_tests.push_back(project_columns(d.test, columns));
    }
    data.decoy_train = stack_rows(decoy_trains, data.real_train.cols());
    return data;
}

void check_inputs(const Matrix& real, std::span<const LabeledClipSet> decoys, const EvalOptions& options) {
    if (real.rows() < 5) throw InsufficientDataError("need at least 5 real clips, got " + std::to_string(real.rows()));
    if (real.cols() != static_cast<Eigen::Index>(kPairCount)) throw std::invalid_argument("real clips must have 496 columns");
    for (const auto& d : decoys) {
        if (d.vectors.rows() > 0 && d.vectors.cols() != real.cols()) {
            throw std::invalid_argument("decoy set " + d.name + " must have 496 columns");
        }
    }
    if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must be in (0, 1)");
    }
    for (const auto c : options.feature_subset) {
        if (c >= kPairCount) throw std::invalid_argument("feature subset index out of range");
    }
    options.grid.validate();
}

std::pair<double, double> mean_std(std::span<const double> values) {
    std::vector<double> finite;
    for (const double v : values) {
        if (std::isfinite(v)) finite.push_back(v);
    }
    if (finite.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    const double mean = std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
    if (finite.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (const double v : finite) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(finite.size() - 1))};
}

GridSearchResult fit(const SplitData& data, const EvalOptions& options, std::uint64_t seed) {
    auto grid_options = options.grid_options;
    grid_options.seed = seed;
    const Matrix* decoys = data.decoy_train.rows() > 0 ? &data.decoy_train : nullptr;
    return grid_search(data.real_train, decoys, options.grid, options.target, grid_options);
}

double pooled_rejection(const SvmModel& model, std::span<const Matrix> pools) {
    std::size_t rejected = 0;
    std::size_t total = 0;
    for (const auto& pool : pools) {
        for (const double s : decision_values(model, pool)) {
            if (s < model.threshold) ++rejected;
        }
        total += static_cast<std::size_t>(pool.rows());
    }
    return total == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : static_cast<double>(rejected) / static_cast<double>(total);
}

} // namespace

DatasetReport repeated_split_eval(const Matrix& real, std::span<const LabeledClipSet> decoys,
                                  const EvalOptions& options) {
    check_inputs(real, decoys, options);
    if (options.repeats == 0) throw std::invalid_argument("repeats must be positive");

    const std::size_t n_sets = 1 + decoys.size();
    std::vector<std::vector<double>> acc(options.repeats, std::vector<double>(n_sets));
    std::vector<RepeatChoice> choices(options.repeats);
    std::vector<double> balanced(options.repeats);

    parallel_for(options.repeats, options.jobs, [&](std::size_t r) {
        const std::uint64_t stream = Rng::derive(options.seed, r);
        Rng rng(stream);
        const auto data = split_all(real, decoys, options.train_fraction, rng, options.feature_subset);
        const auto result = fit(data, options, Rng::derive(stream, 1));
        const auto& model = result.model;
        acc[r][0] = set_accuracy(decision_values(model, data.real_test), model.threshold, Label::Target);
        for (std::size_t d = 0; d < decoys.size(); ++d) {
            acc[r][d + 1] = set_accuracy(decision_values(model, data.decoy_tests[d]), model.threshold, decoys[d].label);
        }
        choices[r] = {result.gamma, result.nu, model.threshold};
        const double rejection = pooled_rejection(model, data.decoy_tests);
        balanced[r] = std::isfinite(rejection) ? 0.5 * (acc[r][0] + rejection) : acc[r][0];
    });

    DatasetReport report;
    report.seed = options.seed;
    report.repeats = options.repeats;
    report.family = "custom";
    if (options.feature_subset.empty()) report.family = "combined";
    report.target = options.target;
    report.train_fraction = options.train_fraction;
    report.choices = std::move(choices);
    report.balanced_per_repeat = std::move(balanced);
    for (std::size_t s = 0; s < n_sets; ++s) {
        SetAccuracy set;
        if (s == 0) {
            set.name = options.real_name;
            set.label = Label::Target;
            set.n_clips = static_cast<std::size_t>(real.rows());
        } else {
            set.name = decoys[s - 1].name;
            set.label = decoys[s - 1].label;
            set.n_clips = static_cast<std::size_t>(decoys[s - 1].vectors.rows());
        }
        for (std::size_t r = 0; r < options.repeats; ++r) set.per_repeat.push_back(acc[r][s]);
        std::tie(set.accuracy_mean, set.accuracy_std) = mean_std(set.per_repeat);
        report.per_set.push_back(std::move(set));
    }
    return report;
}

DatasetReport feature_family_eval(Family family, const Matrix& real, std::span<const LabeledClipSet> decoys,
                                  EvalOptions options) {
    options.feature_subset = family_pairs(family);
    options.target = default_target(family);
    auto report = repeated_split_eval(real, decoys, options);
    report.family = std::string(family_name(family));
    return report;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<std::size_t> random_subset(std::size_t size, Rng& rng) {
    auto order = rng.permutation(kPairCount);
    order.resize(size);
    std::sort(order.begin(), order.end());
    return order;
}

// Trains on the fixed split restricted to `subset` and returns the rejection
// rate on the pooled held-out non-target clips.
double subset_accuracy(const SplitData& full, std::span<const std::size_t> subset, const EvalOptions& options,
                       std::uint64_t seed) {
    SplitData data;
    data.real_train = project_columns(full.real_train, subset);
    data.decoy_train = project_columns(full.decoy_train, subset);
    for (const auto& t : full.decoy_tests) data.decoy_tests.push_back(project_columns(t, subset));
    const auto result = fit(data, options, seed);
    return pooled_rejection(result.model, data.decoy_tests);
}

SplitData fixed_split(const Matrix& real, std::span<const LabeledClipSet> decoys, const EvalOptions& options) {
    Rng rng(Rng::derive(options.seed, 0));
    auto data = split_all(real, decoys, options.train_fraction, rng, {});
    std::size_t pool = 0;
    for (const auto& t : data.decoy_tests) pool += static_cast<std::size_t>(t.rows());
    if (pool == 0) throw InsufficientDataError("no held-out non-target clips to evaluate on");
    return data;
}

} // namespace

SweepReport subset_sweep(const Matrix& real, std::span<const LabeledClipSet> decoys,
                         std::span<const std::size_t> sizes, std::size_t samples_per_size,
                         const EvalOptions& options) {
    check_inputs(real, decoys, options);
    if (samples_per_size == 0) throw std::invalid_argument("samples per size must be positive");
    for (const auto s : sizes) {
        if (s < 1 || s > kPairCount) throw std::invalid_argument("subset sizes must be in [1, 496]");
    }
    const auto data = fixed_split(real, decoys, options);

    // Jobs: one per (size, sample); the full set has a single possible subset.
    struct Job {
        std::size_t size_slot;
        std::size_t sample;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < sizes.size(); ++a) {
        const std::size_t n = sizes[a] == kPairCount ? 1 : samples_per_size;
        for (std::size_t b = 0; b < n; ++b) jobs.push_back({a, b});
    }
    std::vector<double> results(jobs.size());
    parallel_for(jobs.size(), options.jobs, [&](std::size_t k) {
        const auto [a, b] = jobs[k];
        const std::uint64_t stream = Rng::derive(Rng::derive(options.seed, 1 + a), b);
        Rng rng(stream);
        const auto subset = random_subset(sizes[a], rng);
        results[k] = subset_accuracy(data, subset, options, Rng::derive(stream, 1));
    });

    SweepReport report;
    report.seed = options.seed;
    report.target = options.target;
    report.samples_per_size = samples_per_size;
    for (std::size_t a = 0; a < sizes.size(); ++a) {
        SizeStats stats;
        stats.size = sizes[a];
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            if (jobs[k].size_slot == a) stats.accuracies.push_back(results[k]);
        }
        if (stats.accuracies.size() == 1) stats.accuracies.assign(samples_per_size, stats.accuracies.front());
        stats.median = quantile(stats.accuracies, 0.5);
        stats.q25 = quantile(stats.accuracies, 0.25);
        stats.q75 = quantile(stats.accuracies, 0.75);
        report.per_size.push_back(std::move(stats));
    }
    return report;
}

std::vector<std::vector<std::size_t>> importance_subsets(std::size_t n_classifiers, std::size_t subset_size,
                                                         std::uint64_t seed) {
    if (subset_size < 1 || subset_size > kPairCount) throw std::invalid_argument("subset size must be in [1, 496]");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::size_t> deck = rng.permutation(kPairCount);
    std::size_t next = 0;
    for (std::size_t c = 0; c < n_classifiers; ++c) {
        std::vector<std::size_t> subset;
        while (subset.size() < subset_size) {
            if (next == deck.size()) {
                deck = rng.permutation(kPairCount);
                next = 0;
            }
            const auto pick = deck[next++];
            // A block that wraps into a fresh permutation can meet a pair it
            // already holds; that draw is skipped.
            if (std::find(subset.begin(), subset.end(), pick) == subset.end()) subset.push_back(pick);
        }
        std::sort(subset.begin(), subset.end());
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

ImportanceTable feature_importance(const Matrix& real, std::span<const LabeledClipSet> decoys,
                                   std::size_t n_classifiers, std::size_t subset_size,
                                   const EvalOptions& options) {
    check_inputs(real, decoys, options);
    const auto data = fixed_split(real, decoys, options);
    const auto subsets = importance_subsets(n_classifiers, subset_size, Rng::derive(options.seed, 2));

    std::vector<double> accuracy(n_classifiers);
    parallel_for(n_classifiers, options.jobs, [&](std::size_t c) {
        accuracy[c] = subset_accuracy(data, subsets[c], options, Rng::derive(Rng::derive(options.seed, 3), c));
    });

    ImportanceTable table;
    table.seed = options.seed;
    table.n_classifiers = n_classifiers;
    table.subset_size = subset_size;
    table.classifier_accuracies = accuracy;
    if (!accuracy.empty()) {
        table.min_accuracy = *std::min_element(accuracy.begin(), accuracy.end());
        table.max_accuracy = *std::max_element(accuracy.begin(), accuracy.end());
    }

    std::vector<double> sums(kPairCount, 0.0);
    std::vector<std::size_t> counts(kPairCount, 0);
    for (std::size_t c = 0; c < n_classifiers; ++c) {
        for (const auto p : subsets[c]) {
            sums[p] += accuracy[c];
            ++counts[p];
        }
    }
    for (std::size_t p = 0; p < kPairCount; ++p) {
        ImportanceRow row;
        row.pair = p;
        row.name = pair_name(p);
        row.participation = counts[p];
        if (counts[p] > 0) row.mean_accuracy = sums[p] / static_cast<double>(counts[p]);
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const ImportanceRow& a, const ImportanceRow& b) {
        if (a.mean_accuracy.has_value() != b.mean_accuracy.has_value()) return a.mean_accuracy.has_value();
        if (!a.mean_accuracy) return false;
        return *a.mean_accuracy > *b.mean_accuracy;
    });
    return table;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(std::span<const double> values) {
    auto arr = json::array();
    for (const double v : values) arr.push_back(number_or_null(v));
    return arr;
}

} // namespace

std::string report_to_json(const DatasetReport& report) {
    json doc;
    doc["protocol"] = report.protocol;
    doc["seed"] = report.seed;
    doc["repeats"] = report.repeats;
    doc["family"] = report.family;
    doc["calibration_target"] = report.target;
    doc["train_fraction"] = report.train_fraction;
    auto sets = json::array();
    for (const auto& s : report.per_set) {
        sets.push_back({{"name", s.name},
                        {"label", s.label == Label::Target ? "target" : "non-target"},
                        {"n_clips", s.n_clips},
                        {"accuracy_mean", number_or_null(s.accuracy_mean)},
                        {"accuracy_std", number_or_null(s.accuracy_std)},
                        {"accuracy_per_repeat", numbers(s.per_repeat)}});
    }
    doc["per_set"] = sets;
    auto choices = json::array();
    for (const auto& c : report.choices) {
        choices.push_back({{"gamma", c.gamma}, {"nu", c.nu}, {"threshold", c.threshold}});
    }
    doc["per_repeat_model"] = choices;
    return doc.dump(2) + "\n";
}

std::string sweep_to_json(const SweepReport& report) {
    json doc;
    doc["protocol"] = "subset-sweep";
    doc["seed"] = report.seed;
    doc["calibration_target"] = report.target;
    doc["samples_per_size"] = report.samples_per_size;
    auto sizes = json::array();
    for (const auto& s : report.per_size) {
        sizes.push_back({{"size", s.size},
                         {"median", number_or_null(s.median)},
                         {"q25", number_or_null(s.q25)},
                         {"q75", number_or_null(s.q75)},
                         {"accuracies", numbers(s.accuracies)}});
    }
    doc["per_size"] = sizes;
    return doc.dump(2) + "\n";
}

std::string importance_to_json(const ImportanceTable& table) {
    json doc;
    doc["protocol"] = "feature-importance";
    doc["seed"] = table.seed;
    doc["n_classifiers"] = table.n_classifiers;
    doc["subset_size"] = table.subset_size;
    doc["accuracy_range"] = {number_or_null(table.min_accuracy), number_or_null(table.max_accuracy)};
    auto rows = json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"pair", r.pair},
                        {"name", r.name},
                        {"participation", r.participation},
                        {"mean_accuracy", r.mean_accuracy ? json(*r.mean_accuracy) : json(nullptr)},
                        {"absent", !r.mean_accuracy.has_value()}});
    }
    doc["pairs"] = rows;
    return doc.dump(2) + "\n";
}

std::string format_table(std::span<const DatasetReport> reports) {
    if (reports.empty()) return {};
    std::vector<std::string> columns;
    for (const auto& s : reports.front().per_set) columns.push_back(s.name);

    std::size_t label_width = 5;
    for (const auto& r : reports) label_width = std::max(label_width, r.family.size());
    std::vector<std::size_t> widths;
    for (const auto& c : columns) widths.push_back(std::max<std::size_t>(c.size(), 6));

    auto pad = [](std::string s, std::size_t w, bool right) {
        if (s.size() >= w) return s;
        const std::string fill(w - s.size(), ' ');
        return right ? fill + s : s + fill;
    };
    std::string out = pad("model", label_width, false);
    for (std::size_t c = 0; c < columns.size(); ++c) out += " | " + pad(columns[c], widths[c], true);
    out += '\n';
    out += std::string(out.size() - 1, '-') + '\n';
    for (const auto& r : reports) {
        std::string line = pad(r.family, label_width, false);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto* set = r.find(columns[c]);
            std::string cell = "-";
            if (set != nullptr && std::isfinite(set->accuracy_mean)) {
                char buf[16];
                std::snprintf(buf, sizeof buf, "%.1f", 100.0 * set->accuracy_mean);
                cell = buf;
            }
            line += " | " + pad(cell, widths[c], true);
        }
        out += line + '\n';
    }
    return out;
}

} // namespace mannerist
