#include "mannerist/pipeline.hpp"

#include <algorithm>

#include "mannerist/errors.hpp"

namespace mannerist {

FeaturizeResult featurize_stream(const FrameStream& stream, const PipelineConfig& config) {
    FeaturizeResult result;
    result.validation = validate_stream(stream);
    if (!result.validation.accepted()) {
        const auto& first = result.validation.violations.front();
        throw ValidationError(stream.source_id + ": " + std::to_string(result.validation.violations.size()) +
                              " violation(s); first at frame " + std::to_string(first.index) + ": " +
                              first.message);
    }

    const auto mask = detect_camera_motion(stream, config.motion_threshold);
    result.flagged_frames = static_cast<std::size_t>(std::count(mask.flags.begin(), mask.flags.end(), true));
    const auto segments = excise_and_split(stream, mask, config.window_s);
    result.segments = segments.size();
    for (const auto& segment : segments) {
        for (const auto& clip : segment_clips(segment, stream.fps, config.window_s, config.stride_s)) {
            result.clips.push_back({clip.source_id, clip.start_time, clip_features(clip)});
        }
    }
    return result;
}

} // namespace mannerist
