#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mannerist {

inline constexpr std::size_t kFeatureCount = 32;
inline constexpr std::size_t kAuCount = 16;
inline constexpr std::size_t kFacialCount = 20;
inline constexpr std::size_t kGesturalCount = 12;
inline constexpr std::size_t kJointCount = 6;
inline constexpr std::size_t kPairCount = kFeatureCount * (kFeatureCount - 1) / 2;

// Canonical feature indices beyond the 16 action units.
inline constexpr std::size_t kHeadRx = 16;
inline constexpr std::size_t kHeadRz = 17;
inline constexpr std::size_t kMouthH = 18;
inline constexpr std::size_t kMouthV = 19;
inline constexpr std::size_t kFirstJointFeature = 20;

/// Tracked upper-body joints, in canonical order.
enum class Joint : std::size_t {
    LeftShoulder = 0,
    LeftElbow,
    LeftWrist,
    RightShoulder,
    RightElbow,
    RightWrist,
};

struct FeatureId {
    std::size_t index;
    std::string_view name;
};

/// The 32 behavioral features in canonical order: AU01..AU26 (16, AU45
/// excluded), head-pose-Rx, head-pose-Rz, mouth-h, mouth-v, then
/// {left, right} x {shoulder, elbow, wrist} x {x, y}.
const std::array<FeatureId, kFeatureCount>& feature_table();

std::optional<std::size_t> feature_index(std::string_view name);

/// One "index:name" line per feature.
std::string serialize_feature_order();
std::vector<std::string> parse_feature_order(std::string_view text);

/// Digest of the canonical feature table ("fnv1a64:<16 hex digits>").
/// Embedded in every correlation vector and model.
const std::string& feature_order_hash();

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct FrameRecord {
    std::int64_t frame_index = 0;
    double timestamp = 0.0;
    bool tracking_ok = true;
    std::array<double, kAuCount> au{};
    double head_rx = 0.0;
    double head_rz = 0.0;
    double mouth_h = 0.0;
    double mouth_v = 0.0;
    std::array<Point2, kJointCount> joints_px{};
    double head_height_px = 0.0;
    double margin_diff_left = 0.0;
    double margin_diff_right = 0.0;

    const Point2& joint(Joint j) const { return joints_px[static_cast<std::size_t>(j)]; }
};

struct FrameStream {
    double fps = 30.0;
    std::string source_id;
    std::vector<FrameRecord> frames;
};

/// FrameRecord with joints expressed in action-plane units.
struct NormalizedFrame {
    std::int64_t frame_index = 0;
    double timestamp = 0.0;
    bool tracking_ok = true;
    std::array<double, kAuCount> au{};
    double head_rx = 0.0;
    double head_rz = 0.0;
    double mouth_h = 0.0;
    double mouth_v = 0.0;
    std::array<Point2, kJointCount> joints_ap{};
    double head_height_px = 0.0;
    double margin_diff_left = 0.0;
    double margin_diff_right = 0.0;
};

/// The 32 feature values of a frame in canonical order. The raw overload
/// uses pixel joint coordinates.
std::array<double, kFeatureCount> feature_values(const NormalizedFrame& frame);
std::array<double, kFeatureCount> feature_values(const FrameRecord& frame);

// ---------------------------------------------------------------------------
// Canonical feature CSV.

/// The exact 38-column header row.
const std::vector<std::string>& csv_columns();
std::string csv_header();

/// Parses a canonical feature CSV. Lines starting with '#' before the header
/// are provenance comments and are skipped. Throws ParseError (with the
/// 1-based data row; 0 for the header) or OrderingError.
FrameStream parse_feature_csv(std::string_view text, double fps, std::string source_id = {});

/// Serializes a stream with lossless float formatting.
std::string write_feature_csv(const FrameStream& stream);

// ---------------------------------------------------------------------------
// Action-plane normalization.

/// Width and height of the action plane in head heights.
inline constexpr double kPlaneWidthHeads = 8.0;
inline constexpr double kPlaneHeightHeads = 6.0;

/// Maps pixel joints into the speaker-centric action plane. The plane is
/// centered on the shoulder midpoint, 8 head heights wide and 6 tall, with
/// (0, 0) at its upper-left corner. Coordinates are not clamped.
/// Throws GeometryError if head_height_px <= 0.
NormalizedFrame normalize_frame(const FrameRecord& frame);
std::vector<NormalizedFrame> normalize_gestures(const FrameStream& stream);

// ---------------------------------------------------------------------------
// Validation.

struct TimestampGap {
    std::size_t index;  // frame whose predecessor is more than 2/fps earlier
    double seconds;
};

struct Violation {
    std::size_t index;
    std::string message;
};

struct ValidationReport {
    std::size_t frame_count = 0;
    double tracked_fraction = 0.0;
    std::vector<TimestampGap> gaps;
    std::vector<Violation> violations;

    bool accepted() const { return violations.empty(); }
};

ValidationReport validate_stream(const FrameStream& stream);

} // namespace mannerist
