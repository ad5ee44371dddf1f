#include "mannerist/features.hpp"

#include <cmath>
#include <cstdio>

#include "mannerist/errors.hpp"
#include "text_util.hpp"

namespace mannerist {

namespace {

constexpr std::array<FeatureId, kFeatureCount> kFeatureTable{{
    {0, "AU01"},
    {1, "AU02"},
    {2, "AU04"},
    {3, "AU05"},
    {4, "AU06"},
    {5, "AU07"},
    {6, "AU09"},
    {7, "AU10"},
    {8, "AU12"},
    {9, "AU14"},
    {10, "AU15"},
    {11, "AU17"},
    {12, "AU20"},
    {13, "AU23"},
    {14, "AU25"},
    {15, "AU26"},
    {16, "head-pose-Rx"},
    {17, "head-pose-Rz"},
    {18, "mouth-h"},
    {19, "mouth-v"},
    {20, "left-shoulder-x"},
    {21, "left-shoulder-y"},
    {22, "left-elbow-x"},
    {23, "left-elbow-y"},
    {24, "left-wrist-x"},
    {25, "left-wrist-y"},
    {26, "right-shoulder-x"},
    {27, "right-shoulder-y"},
    {28, "right-elbow-x"},
    {29, "right-elbow-y"},
    {30, "right-wrist-x"},
    {31, "right-wrist-y"},
}};

constexpr std::size_t kCsvColumnCount = 38;

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (const char c : data) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ull;
    }
    return hash;
}

} // namespace

const std::array<FeatureId, kFeatureCount>& feature_table() { return kFeatureTable; }

std::optional<std::size_t> feature_index(std::string_view name) {
    for (const auto& id : kFeatureTable) {
        if (id.name == name) return id.index;
    }
    return std::nullopt;
}

std::string serialize_feature_order() {
    std::string out;
    for (const auto& id : kFeatureTable) {
        out += std::to_string(id.index);
        out += ':';
        out += id.name;
        out += '\n';
    }
    return out;
}

std::vector<std::string> parse_feature_order(std::string_view text) {
    std::vector<std::string> names;
    for (const auto line : detail::split_lines(text)) {
        if (detail::is_blank(line)) continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw SchemaError("feature order line without ':': " + std::string(line));
        }
        const auto index = detail::parse_int(line.substr(0, colon));
        if (!index || *index != static_cast<long long>(names.size())) {
            throw SchemaError("feature order out of sequence: " + std::string(line));
        }
        names.emplace_back(line.substr(colon + 1));
    }
    return names;
}

const std::string& feature_order_hash() {
    static const std::string hash = [] {
        char buf[40];
        std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                      static_cast<unsigned long long>(fnv1a64(serialize_feature_order())));
        return std::string(buf);
    }();
    return hash;
}

std::array<double, kFeatureCount> feature_values(const NormalizedFrame& frame) {
    std::array<double, kFeatureCount> v{};
    for (std::size_t i = 0; i < kAuCount; ++i) v[i] = frame.au[i];
    v[kHeadRx] = frame.head_rx;
    v[kHeadRz] = frame.head_rz;
    v[kMouthH] = frame.mouth_h;
    v[kMouthV] = frame.mouth_v;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        v[kFirstJointFeature + 2 * j] = frame.joints_ap[j].x;
        v[kFirstJointFeature + 2 * j + 1] = frame.joints_ap[j].y;
    }
    return v;
}

std::array<double, kFeatureCount> feature_values(const FrameRecord& frame) {
    std::array<double, kFeatureCount> v{};
    for (std::size_t i = 0; i < kAuCount; ++i) v[i] = frame.au[i];
    v[kHeadRx] = frame.head_rx;
    v[kHeadRz] = frame.head_rz;
    v[kMouthH] = frame.mouth_h;
    v[kMouthV] = frame.mouth_v;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        v[kFirstJointFeature + 2 * j] = frame.joints_px[j].x;
        v[kFirstJointFeature + 2 * j + 1] = frame.joints_px[j].y;
    }
    return v;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> columns = {
        "frame",   "timestamp", "tracking_ok", "au01",   "au02",    "au04",   "au05",
        "au06",    "au07",      "au09",        "au10",   "au12",    "au14",   "au15",
        "au17",    "au20",      "au23",        "au25",   "au26",    "head_rx", "head_rz",
        "mouth_h", "mouth_v",   "lsho_x",      "lsho_y", "lelb_x",  "lelb_y", "lwri_x",
        "lwri_y",  "rsho_x",    "rsho_y",      "relb_x", "relb_y",  "rwri_x", "rwri_y",
        "head_height", "mdiff_l", "mdiff_r",
    };
    return columns;
}

std::string csv_header() {
    std::string header;
    for (const auto& c : csv_columns()) {
        if (!header.empty()) header += ',';
        header += c;
    }
    return header;
}

namespace {

void check_header(std::string_view line) {
    const auto fields = detail::split_fields(line);
    const auto& expected = csv_columns();
    for (std::size_t i = 0; i < fields.size() && i < expected.size(); ++i) {
        const auto name = detail::trim(fields[i]);
        if (name != expected[i]) {
            throw ParseError(0, "unexpected column '" + std::string(name) + "' at position " +
                                    std::to_string(i) + ", expected '" + expected[i] + "'");
        }
    }
    if (fields.size() < expected.size()) {
        throw ParseError(0, "missing column '" + expected[fields.size()] + "'");
    }
    if (fields.size() > expected.size()) {
        throw ParseError(0, "unknown column '" + std::string(detail::trim(fields[expected.size()])) + "'");
    }
}

FrameRecord parse_row(std::string_view line, std::size_t row) {
    const auto fields = detail::split_fields(line);
    if (fields.size() != kCsvColumnCount) {
        throw ParseError(row, "expected " + std::to_string(kCsvColumnCount) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    const auto& names = csv_columns();
    auto number = [&](std::size_t col) {
        const auto v = detail::parse_double(fields[col]);
        if (!v) {
            throw ParseError(row, "column '" + names[col] + "': not a number: '" +
                                      std::string(fields[col]) + "'");
        }
        return *v;
    };

    FrameRecord r;
    const auto frame = detail::parse_int(fields[0]);
    if (!frame || *frame < 0) {
        throw ParseError(row, "column 'frame': not a non-negative integer: '" + std::string(fields[0]) + "'");
    }
    r.frame_index = *frame;
    r.timestamp = number(1);
    const auto tracking = detail::trim(fields[2]);
    if (tracking == "1") {
        r.tracking_ok = true;
    } else if (tracking == "0") {
        r.tracking_ok = false;
    } else {
        throw ParseError(row, "column 'tracking_ok': expected 0 or 1, got '" + std::string(tracking) + "'");
    }
    std::size_t col = 3;
    for (auto& a : r.au) a = number(col++);
    r.head_rx = number(col++);
    r.head_rz = number(col++);
    r.mouth_h = number(col++);
    r.mouth_v = number(col++);
    for (auto& p : r.joints_px) {
        p.x = number(col++);
        p.y = number(col++);
    }
    r.head_height_px = number(col++);
    r.margin_diff_left = number(col++);
    r.margin_diff_right = number(col++);
    return r;
}

} // namespace

FrameStream parse_feature_csv(std::string_view text, double fps, std::string source_id) {
    FrameStream stream;
    stream.fps = fps;
    stream.source_id = std::move(source_id);

    const auto lines = detail::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && (detail::is_blank(lines[i]) || lines[i].front() == '#')) ++i;
    if (i == lines.size()) throw ParseError(0, "missing header row");
    check_header(lines[i++]);

    std::size_t row = 0;
    for (; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        ++row;
        auto record = parse_row(lines[i], row);
        if (!stream.frames.empty()) {
            const auto& prev = stream.frames.back();
            if (!(record.timestamp > prev.timestamp)) {
                throw OrderingError("row " + std::to_string(row) + ": timestamp " +
                                    detail::format_double(record.timestamp) +
                                    " does not increase");
            }
            if (record.frame_index <= prev.frame_index) {
                throw OrderingError("row " + std::to_string(row) + ": frame index " +
                                    std::to_string(record.frame_index) + " does not increase");
            }
        }
        stream.frames.push_back(record);
    }
    return stream;
}

std::string write_feature_csv(const FrameStream& stream) {
    std::string out = csv_header();
    out += '\n';
    for (const auto& r : stream.frames) {
        out += std::to_string(r.frame_index);
        out += ',';
        detail::append_double(out, r.timestamp);
        out += r.tracking_ok ? ",1" : ",0";
        auto put = [&out](double v) {
            out += ',';
            detail::append_double(out, v);
        };
        for (const double a : r.au) put(a);
        put(r.head_rx);
        put(r.head_rz);
        put(r.mouth_h);
        put(r.mouth_v);
        for (const auto& p : r.joints_px) {
            put(p.x);
            put(p.y);
        }
        put(r.head_height_px);
        put(r.margin_diff_left);
        put(r.margin_diff_right);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

NormalizedFrame normalize_frame(const FrameRecord& frame) {
    if (!(frame.head_height_px > 0.0)) {
        throw GeometryError("frame " + std::to_string(frame.frame_index) +
                            ": head height must be positive, got " +
                            detail::format_double(frame.head_height_px));
    }
    const auto& ls = frame.joint(Joint::LeftShoulder);
    const auto& rs = frame.joint(Joint::RightShoulder);
    const double cx = 0.5 * (ls.x + rs.x);
    const double cy = 0.5 * (ls.y + rs.y);
    const double w = kPlaneWidthHeads * frame.head_height_px;
    const double h = kPlaneHeightHeads * frame.head_height_px;

    NormalizedFrame n;
    n.frame_index = frame.frame_index;
    n.timestamp = frame.timestamp;
    n.tracking_ok = frame.tracking_ok;
    n.au = frame.au;
    n.head_rx = frame.head_rx;
    n.head_rz = frame.head_rz;
    n.mouth_h = frame.mouth_h;
    n.mouth_v = frame.mouth_v;
    n.head_height_px = frame.head_height_px;
    n.margin_diff_left = frame.margin_diff_left;
    n.margin_diff_right = frame.margin_diff_right;
    // (p - (c - w/2)) / w, written relative to the center so that the result
    // does not depend on the absolute image position.
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto& p = frame.joints_px[j];
        n.joints_ap[j] = {(p.x - cx) / w + 0.5, (p.y - cy) / h + 0.5};
    }
    return n;
}

std::vector<NormalizedFrame> normalize_gestures(const FrameStream& stream) {
    std::vector<NormalizedFrame> out;
    out.reserve(stream.frames.size());
    for (const auto& f : stream.frames) out.push_back(normalize_frame(f));
    return out;
}

// ---------------------------------------------------------------------------

ValidationReport validate_stream(const FrameStream& stream) {
    ValidationReport report;
    report.frame_count = stream.frames.size();
    if (!(stream.fps > 0.0)) {
        report.violations.push_back({0, "fps must be positive"});
    }
    std::size_t tracked = 0;
    const double max_gap = stream.fps > 0.0 ? 2.0 / stream.fps : 0.0;
    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
        const auto& f = stream.frames[i];
        if (f.tracking_ok) ++tracked;
        if (f.tracking_ok && !(f.head_height_px > 0.0)) {
            report.violations.push_back({i, "tracked frame with non-positive head height"});
        }
        if (f.tracking_ok) {
            for (std::size_t a = 0; a < kAuCount; ++a) {
                if (!(f.au[a] >= 0.0)) {
                    report.violations.push_back(
                        {i, "negative or non-finite intensity for " + std::string(kFeatureTable[a].name)});
                }
            }
        }
        for (const double m : {f.margin_diff_left, f.margin_diff_right}) {
            if (!(m >= 0.0 && m <= 1.0)) {
                report.violations.push_back({i, "margin difference outside [0, 1]"});
            }
        }
        if (i > 0) {
            const auto& prev = stream.frames[i - 1];
            if (!(f.timestamp > prev.timestamp)) {
                report.violations.push_back({i, "timestamp does not increase"});
            } else if (max_gap > 0.0 && f.timestamp - prev.timestamp > max_gap) {
                report.gaps.push_back({i, f.timestamp - prev.timestamp});
            }
            if (f.frame_index <= prev.frame_index) {
                report.violations.push_back({i, "frame index does not increase"});
            }
        }
    }
    report.tracked_fraction = stream.frames.empty()
                                  ? 1.0
                                  : static_cast<double>(tracked) / static_cast<double>(stream.frames.size());
    return report;
}

} // namespace mannerist
