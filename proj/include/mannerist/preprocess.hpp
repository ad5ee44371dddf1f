#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mannerist/features.hpp"

namespace mannerist {

inline constexpr double kDefaultMotionThreshold = 0.05;
inline constexpr double kDefaultWindowSeconds = 10.0;
inline constexpr double kDefaultStrideSeconds = 5.0;
inline constexpr double kMinTrackedFraction = 0.9;

struct MotionMask {
    std::vector<bool> flags;  // true = camera motion at this frame
};

/// A maximal run of consecutive frames with no camera motion.
struct Segment {
    std::string source_id;
    std::vector<FrameRecord> frames;
};

struct Clip {
    std::string source_id;
    double start_time = 0.0;
    std::vector<NormalizedFrame> frames;
};

/// Frame i is flagged iff max(margin_diff_left, margin_diff_right) > threshold.
/// Frame 0 is never flagged. Throws std::invalid_argument unless threshold is
/// in (0, 1].
MotionMask detect_camera_motion(const FrameStream& stream, double threshold = kDefaultMotionThreshold);

/// Removes flagged frames and splits the stream at each of them. Runs with
/// fewer than window_s * fps frames are dropped.
std::vector<Segment> excise_and_split(const FrameStream& stream, const MotionMask& mask,
                                      double window_s = kDefaultWindowSeconds);

/// Number of frames in a window of `seconds` at `fps` (rounded to nearest).
std::size_t frames_for(double seconds, double fps);

/// Cuts a segment into windows starting every stride_s seconds. Windows with
/// fewer than 90% tracked frames are dropped; untracked frames inside kept
/// windows are linearly interpolated, then every frame is normalized into the
/// action plane.
std::vector<Clip> segment_clips(const Segment& segment, double fps,
                                double window_s = kDefaultWindowSeconds,
                                double stride_s = kDefaultStrideSeconds);

/// Fills untracked frames by linear interpolation between the nearest tracked
/// neighbors (nearest-neighbor hold at the ends). Timestamps, indices, margin
/// statistics and tracking flags are left as they are. No-op when no frame is
/// tracked.
void interpolate_untracked(std::vector<FrameRecord>& frames);

} // namespace mannerist
