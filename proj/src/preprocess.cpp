#include "mannerist/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mannerist {

MotionMask detect_camera_motion(const FrameStream& stream, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("motion threshold must be in (0, 1]");
    }
    MotionMask mask;
    mask.flags.resize(stream.frames.size(), false);
    for (std::size_t i = 1; i < stream.frames.size(); ++i) {
        const auto& f = stream.frames[i];
        mask.flags[i] = std::max(f.margin_diff_left, f.margin_diff_right) > threshold;
    }
    return mask;
}

std::size_t frames_for(double seconds, double fps) {
    return static_cast<std::size_t>(std::llround(seconds * fps));
}

std::vector<Segment> excise_and_split(const FrameStream& stream, const MotionMask& mask,
                                      double window_s) {
    if (mask.flags.size() != stream.frames.size()) {
        throw std::invalid_argument("motion mask length does not match stream");
    }
    const std::size_t min_frames = frames_for(window_s, stream.fps);
    std::vector<Segment> segments;
    Segment current{stream.source_id, {}};
    auto flush = [&] {
        if (!current.frames.empty() && current.frames.size() >= min_frames) {
            segments.push_back(std::move(current));
        }
        current = Segment{stream.source_id, {}};
    };
    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
        if (mask.flags[i]) {
            flush();
        } else {
            current.frames.push_back(stream.frames[i]);
        }
    }
    flush();
    return segments;
}

void interpolate_untracked(std::vector<FrameRecord>& frames) {
    std::vector<std::size_t> tracked;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].tracking_ok) tracked.push_back(i);
    }
    if (tracked.empty() || tracked.size() == frames.size()) return;

    auto blend = [](const FrameRecord& a, const FrameRecord& b, double t, FrameRecord& out) {
        auto mix = [t](double x, double y) { return x + t * (y - x); };
        for (std::size_t k = 0; k < kAuCount; ++k) out.au[k] = mix(a.au[k], b.au[k]);
        out.head_rx = mix(a.head_rx, b.head_rx);
        out.head_rz = mix(a.head_rz, b.head_rz);
        out.mouth_h = mix(a.mouth_h, b.mouth_h);
        out.mouth_v = mix(a.mouth_v, b.mouth_v);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            out.joints_px[j].x = mix(a.joints_px[j].x, b.joints_px[j].x);
            out.joints_px[j].y = mix(a.joints_px[j].y, b.joints_px[j].y);
        }
        out.head_height_px = mix(a.head_height_px, b.head_height_px);
    };

    std::size_t next = 0;  // index into `tracked` of the first tracked frame >= i
    for (std::size_t i = 0; i < frames.size(); ++i) {
        while (next < tracked.size() && tracked[next] < i) ++next;
        if (frames[i].tracking_ok) continue;
        if (next == 0) {
            blend(frames[tracked.front()], frames[tracked.front()], 0.0, frames[i]);
        } else if (next == tracked.size()) {
            blend(frames[tracked.back()], frames[tracked.back()], 0.0, frames[i]);
        } else {
            const auto lo = tracked[next - 1];
            const auto hi = tracked[next];
            const double t = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
            blend(frames[lo], frames[hi], t, frames[i]);
        }
    }
}

std::vector<Clip> segment_clips(const Segment& segment, double fps, double window_s, double stride_s) {
    if (!(window_s > 0.0)) throw std::invalid_argument("window must be positive");
    if (!(stride_s > 0.0 && stride_s <= window_s)) {
        throw std::invalid_argument("stride must be in (0, window]");
    }
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");

    const std::size_t window = frames_for(window_s, fps);
    std::vector<Clip> clips;
    if (window == 0) return clips;
    for (std::size_t k = 0;; ++k) {
        const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(k) * stride_s * fps));
        if (start + window > segment.frames.size()) break;

        const auto first = segment.frames.begin() + static_cast<std::ptrdiff_t>(start);
        std::vector<FrameRecord> window_frames(first, first + static_cast<std::ptrdiff_t>(window));
        const auto n_tracked = std::count_if(window_frames.begin(), window_frames.end(),
                                             [](const FrameRecord& f) { return f.tracking_ok; });
        if (static_cast<double>(n_tracked) < kMinTrackedFraction * static_cast<double>(window)) continue;
        interpolate_untracked(window_frames);

        Clip clip;
        clip.source_id = segment.source_id;
        clip.start_time = window_frames.front().timestamp;
        clip.frames.reserve(window);
        for (const auto& f : window_frames) clip.frames.push_back(normalize_frame(f));
        clips.push_back(std::move(clip));
    }
    return clips;
}

} // namespace mannerist
