#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mannerist/features.hpp"
#include "mannerist/preprocess.hpp"

namespace mannerist {

/// Position of the pair (i, j), i < j, in the lexicographic pair order.
/// Throws OrderingError unless i < j < 32.
std::size_t pair_index(std::size_t i, std::size_t j);

/// Inverse of pair_index.
std::pair<std::size_t, std::size_t> pair_at(std::size_t index);

/// "<name i> <=> <name j>"
std::string pair_name(std::size_t index);

/// Sample Pearson correlation, computed in two passes (means, then centered
/// moments). Zero-variance inputs give 0. The result is clamped to [-1, 1].
/// Throws InsufficientDataError for fewer than 2 samples and
/// std::invalid_argument on a length mismatch.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationVector {
    std::vector<double> values;  // kPairCount entries, pair_index order
    std::string feature_order_hash;
};

/// One time series per canonical feature.
using FeatureSeries = std::array<std::vector<double>, kFeatureCount>;

FeatureSeries series_of(std::span<const NormalizedFrame> frames);
FeatureSeries series_of(std::span<const FrameRecord> frames);

CorrelationVector correlation_vector(const FeatureSeries& series);

/// The 496 pairwise correlations of a clip's normalized features.
CorrelationVector clip_features(const Clip& clip);

// ---------------------------------------------------------------------------
// Feature-vector files: "# order=<hash>" then one
// "source_id,start_time,v0,...,v495" row per clip.

struct ClipFeatures {
    std::string source_id;
    double start_time = 0.0;
    CorrelationVector vector;
};

std::string write_feature_vectors(std::span<const ClipFeatures> clips);

/// Throws ParseError on malformed rows and IncompatibleError when the order
/// line names a different feature order than this build's.
std::vector<ClipFeatures> read_feature_vectors(std::string_view text);

} // namespace mannerist
