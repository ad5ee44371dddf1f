#include "mannerist/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mannerist/errors.hpp"
#include "text_util.hpp"

namespace mannerist {

std::size_t pair_index(std::size_t i, std::size_t j) {
    if (!(i < j) || j >= kFeatureCount) {
        throw OrderingError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") must satisfy i < j < 32");
    }
    return i * (2 * kFeatureCount - i - 1) / 2 + (j - i - 1);
}

std::pair<std::size_t, std::size_t> pair_at(std::size_t index) {
    if (index >= kPairCount) throw std::out_of_range("pair index out of range");
    std::size_t i = 0;
    std::size_t row_start = 0;
    while (row_start + (kFeatureCount - i - 1) <= index) {
        row_start += kFeatureCount - i - 1;
        ++i;
    }
    return {i, i + 1 + (index - row_start)};
}

std::string pair_name(std::size_t index) {
    const auto [i, j] = pair_at(index);
    const auto& table = feature_table();
    return std::string(table[i].name) + " <=> " + std::string(table[j].name);
}

namespace {

bool is_constant(std::span<const double> x) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *lo == *hi;
}

double mean_of(std::span<const double> x) {
    double sum = 0.0;
    for (const double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

double clamp_unit(double r) { return std::clamp(r, -1.0, 1.0); }

} // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw InsufficientDataError("pearson: need at least 2 samples");
    if (is_constant(x) || is_constant(y)) return 0.0;

    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = x[k] - mx;
        const double dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return clamp_unit(sxy / std::sqrt(sxx * syy));
}

FeatureSeries series_of(std::span<const NormalizedFrame> frames) {
    FeatureSeries series;
    for (auto& s : series) s.reserve(frames.size());
    for (const auto& f : frames) {
        const auto v = feature_values(f);
        for (std::size_t k = 0; k < kFeatureCount; ++k) series[k].push_back(v[k]);
    }
    return series;
}

FeatureSeries series_of(std::span<const FrameRecord> frames) {
    FeatureSeries series;
    for (auto& s : series) s.reserve(frames.size());
    for (const auto& f : frames) {
        const auto v = feature_values(f);
        for (std::size_t k = 0; k < kFeatureCount; ++k) series[k].push_back(v[k]);
    }
    return series;
}

CorrelationVector correlation_vector(const FeatureSeries& series) {
    const std::size_t n = series[0].size();
    for (const auto& s : series) {
        if (s.size() != n) throw std::invalid_argument("feature series lengths differ");
    }
    if (n < 2) throw InsufficientDataError("clip needs at least 2 frames");

    // Center each series once, then every pair is a dot product of centered
    // series: the same two-pass computation as pearson(), shared across pairs.
    std::array<std::vector<double>, kFeatureCount> centered;
    std::array<double, kFeatureCount> norm2{};
    std::array<bool, kFeatureCount> constant{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        constant[f] = is_constant(series[f]);
        const double m = mean_of(series[f]);
        centered[f].resize(n);
        double ss = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = series[f][k] - m;
            centered[f][k] = d;
            ss += d * d;
        }
        norm2[f] = ss;
    }

    CorrelationVector out;
    out.feature_order_hash = feature_order_hash();
    out.values.resize(kPairCount);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        for (std::size_t j = i + 1; j < kFeatureCount; ++j, ++idx) {
            if (constant[i] || constant[j] || norm2[i] == 0.0 || norm2[j] == 0.0) {
                out.values[idx] = 0.0;
                continue;
            }
            const double* a = centered[i].data();
            const double* b = centered[j].data();
            double sxy = 0.0;
            for (std::size_t k = 0; k < n; ++k) sxy += a[k] * b[k];
            out.values[idx] = clamp_unit(sxy / std::sqrt(norm2[i] * norm2[j]));
        }
    }
    return out;
}

CorrelationVector clip_features(const Clip& clip) {
    if (clip.frames.size() < 2) throw InsufficientDataError("clip needs at least 2 frames");
    return correlation_vector(series_of(std::span<const NormalizedFrame>(clip.frames)));
}

// ---------------------------------------------------------------------------

std::string write_feature_vectors(std::span<const ClipFeatures> clips) {
    std::string out = "# order=" + feature_order_hash() + "\n";
    for (const auto& c : clips) {
        if (c.vector.values.size() != kPairCount) {
            throw std::invalid_argument("feature vector must have 496 entries");
        }
        if (c.source_id.find(',') != std::string::npos) {
            throw std::invalid_argument("source id may not contain ','");
        }
        out += c.source_id;
        out += ',';
        detail::append_double(out, c.start_time);
        for (const double v : c.vector.values) {
            out += ',';
            detail::append_double(out, v);
        }
        out += '\n';
    }
    return out;
}

std::vector<ClipFeatures> read_feature_vectors(std::string_view text) {
    const auto lines = detail::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && detail::is_blank(lines[i])) ++i;
    // An empty file carries no order line and no clips.
    if (i == lines.size()) return {};

    constexpr std::string_view prefix = "# order=";
    if (lines[i].substr(0, prefix.size()) != prefix) {
        throw ParseError(0, "feature-vector file must start with '# order=<hash>'");
    }
    const auto hash = detail::trim(lines[i].substr(prefix.size()));
    if (hash != feature_order_hash()) {
        throw IncompatibleError("feature order " + std::string(hash) + " does not match " +
                                feature_order_hash());
    }

    std::vector<ClipFeatures> clips;
    std::size_t row = 0;
    for (++i; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i]) || lines[i].front() == '#') continue;
        ++row;
        const auto fields = detail::split_fields(lines[i]);
        if (fields.size() != kPairCount + 2) {
            throw ParseError(row, "expected " + std::to_string(kPairCount + 2) + " fields, got " +
                                      std::to_string(fields.size()));
        }
        ClipFeatures c;
        c.source_id = std::string(fields[0]);
        const auto start = detail::parse_double(fields[1]);
        if (!start) throw ParseError(row, "start_time is not a number");
        c.start_time = *start;
        c.vector.feature_order_hash = std::string(hash);
        c.vector.values.resize(kPairCount);
        for (std::size_t k = 0; k < kPairCount; ++k) {
            const auto v = detail::parse_double(fields[k + 2]);
            if (!v || !(*v >= -1.0 && *v <= 1.0)) {
                throw ParseError(row, "v" + std::to_string(k) + " is not a correlation in [-1, 1]");
            }
            c.vector.values[k] = *v;
        }
        clips.push_back(std::move(c));
    }
    return clips;
}

} // namespace mannerist
