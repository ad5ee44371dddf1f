#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>

#include "mannerist/features.hpp"

namespace mannerist {

/// Temporal smoothness used when none is specified.
inline constexpr double kDefaultArCoeff = 0.95;
/// Smoothness of the personas built by make_persona_pair.
inline constexpr double kPersonaArCoeff = 0.5;

/// Pixel geometry the generator renders joints into.
inline constexpr Point2 kRenderChestCenter{960.0, 540.0};
inline constexpr double kRenderHeadHeight = 100.0;

/// A fictitious speaker: the 32x32 correlation its features follow, plus
/// per-feature location and scale. Joint means/scales are in action-plane units.
struct PersonaSpec {
    std::uint64_t seed = 0;
    std::string label;
    Eigen::MatrixXd target_corr = Eigen::MatrixXd::Identity(kFeatureCount, kFeatureCount);
    std::array<double, kFeatureCount> means{};
    std::array<double, kFeatureCount> scales{};
    double ar_coeff = kDefaultArCoeff;

    /// Throws std::invalid_argument if any invariant is broken.
    void validate() const;
};

struct NearestCorrelationOptions {
    double eigen_floor = 1e-6;
    double tolerance = 1e-10;
    std::size_t max_iterations = 10'000;
};

/// Nearest (Frobenius) unit-diagonal positive-definite matrix, by alternating
/// projections with Dykstra's correction: eigenvalues clipped at
/// `eigen_floor`, then the diagonal reset to one, until an iteration moves the
/// matrix by less than `tolerance`. A valid input comes back unchanged.
/// Throws std::invalid_argument for non-square or non-symmetric input.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& matrix, const NearestCorrelationOptions& options = {});

/// Draws duration_s * fps frames of the Gaussian AR(1) process
///     z_t = a z_{t-1} + sqrt(1 - a^2) L e_t,   f_t = means + scales * z_t
/// with L the Cholesky factor of the target correlation. Action-unit
/// channels are clamped at 0; joint channels are rendered to pixels around a
/// fixed chest center at a head height of 100 px. Throws std::invalid_argument
/// if the target is not positive definite.
FrameStream sample_stream(const PersonaSpec& spec, double duration_s, double fps = 30.0);

/// A random persona built from a low-rank-plus-diagonal correlation model.
PersonaSpec random_persona(std::uint64_t seed, double ar_coeff = kPersonaArCoeff);

/// Persona A is random; B shares A's means and scales and has target
/// nearest_correlation(A + separation * R), R a random symmetric zero-diagonal
/// matrix of unit Frobenius norm. The two get distinct stream seeds.
std::pair<PersonaSpec, PersonaSpec> make_persona_pair(double separation, std::uint64_t seed,
                                                      double ar_coeff = kPersonaArCoeff);

std::string persona_to_json(const PersonaSpec& spec);
PersonaSpec persona_from_json(std::string_view text);

} // namespace mannerist
