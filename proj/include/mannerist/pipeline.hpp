#pragma once

#include <cstddef>
#include <vector>

#include "mannerist/correlation.hpp"
#include "mannerist/features.hpp"
#include "mannerist/preprocess.hpp"

namespace mannerist {

struct PipelineConfig {
    double window_s = kDefaultWindowSeconds;
    double stride_s = kDefaultStrideSeconds;
    double motion_threshold = kDefaultMotionThreshold;
};

struct FeaturizeResult {
    ValidationReport validation;
    std::size_t flagged_frames = 0;
    std::size_t segments = 0;
    std::vector<ClipFeatures> clips;
};

/// validate -> camera-motion excision -> clip segmentation (interpolation and
/// action-plane normalization) -> 496 correlations per clip.
/// Throws ValidationError if the stream is rejected.
FeaturizeResult featurize_stream(const FrameStream& stream, const PipelineConfig& config = {});

} // namespace mannerist
