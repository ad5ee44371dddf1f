#include "mannerist/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "mannerist/errors.hpp"
#include "mannerist/rng.hpp"

namespace mannerist {

void PersonaSpec::validate() const {
    const auto n = static_cast<Eigen::Index>(kFeatureCount);
    if (target_corr.rows() != n || target_corr.cols() != n) {
        throw std::invalid_argument("persona target must be 32x32");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(target_corr(i, i) - 1.0) > 1e-12) throw std::invalid_argument("persona target needs a unit diagonal");
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = target_corr(i, j);
            if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("persona target entries must be in [-1, 1]");
            if (std::abs(v - target_corr(j, i)) > 1e-12) throw std::invalid_argument("persona target must be symmetric");
        }
    }
    for (const double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("persona scales must be positive");
    }
    if (!(ar_coeff >= 0.0 && ar_coeff < 1.0)) throw std::invalid_argument("ar_coeff must be in [0, 1)");
}

namespace {

bool is_symmetric(const Eigen::MatrixXd& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd out = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

} // namespace

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& matrix, const NearestCorrelationOptions& options) {
    if (matrix.rows() != matrix.cols()) throw std::invalid_argument("nearest_correlation: matrix must be square");
    if (!is_symmetric(matrix)) throw std::invalid_argument("nearest_correlation: matrix must be symmetric");

    const bool unit_diagonal = (matrix.diagonal().array() - 1.0).abs().maxCoeff() == 0.0;
    if (unit_diagonal) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() >= options.eigen_floor) return matrix;
    }

    Eigen::MatrixXd y = 0.5 * (matrix + matrix.transpose());
    Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        const Eigen::MatrixXd r = y - correction;
        const Eigen::MatrixXd x = clip_eigenvalues(r, options.eigen_floor);
        correction = x - r;
        Eigen::MatrixXd next = x;
        next.diagonal().setOnes();
        const double moved = (next - y).norm();
        y = std::move(next);
        if (moved < options.tolerance) break;
    }

    // The diagonal reset can leave eigenvalues marginally below the floor;
    // one more clip followed by rescaling to a unit diagonal keeps the result
    // strictly positive definite.
    Eigen::MatrixXd x = clip_eigenvalues(y, options.eigen_floor);
    const Eigen::VectorXd inv_sqrt = x.diagonal().cwiseSqrt().cwiseInverse();
    x = inv_sqrt.asDiagonal() * x * inv_sqrt.asDiagonal();
    x.diagonal().setOnes();
    return 0.5 * (x + x.transpose());
}

FrameStream sample_stream(const PersonaSpec& spec, double duration_s, double fps) {
    if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
    spec.validate();
    Eigen::LLT<Eigen::MatrixXd> llt(spec.target_corr);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("persona target is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    const auto n_frames = static_cast<std::size_t>(std::llround(duration_s * fps));
    FrameStream stream;
    stream.fps = fps;
    stream.source_id = spec.label;
    stream.frames.reserve(n_frames);

    Rng rng(spec.seed);
    const double a = spec.ar_coeff;
    const double innovation = std::sqrt(1.0 - a * a);
    const double plane_w = kPlaneWidthHeads * kRenderHeadHeight;
    const double plane_h = kPlaneHeightHeads * kRenderHeadHeight;
    const double left = kRenderChestCenter.x - 0.5 * plane_w;
    const double top = kRenderChestCenter.y - 0.5 * plane_h;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(kFeatureCount);
    Eigen::VectorXd eps(kFeatureCount);
    for (std::size_t t = 0; t < n_frames; ++t) {
        for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
        const Eigen::VectorXd shock = chol * eps;
        // Start in the stationary distribution.
        z = t == 0 ? shock : Eigen::VectorXd(a * z + innovation * shock);

        std::array<double, kFeatureCount> f{};
        for (std::size_t k = 0; k < kFeatureCount; ++k) {
            f[k] = spec.means[k] + spec.scales[k] * z(static_cast<Eigen::Index>(k));
        }

        FrameRecord r;
        r.frame_index = static_cast<std::int64_t>(t);
        r.timestamp = static_cast<double>(t) / fps;
        r.tracking_ok = true;
        for (std::size_t k = 0; k < kAuCount; ++k) r.au[k] = std::max(0.0, f[k]);
        r.head_rx = f[kHeadRx];
        r.head_rz = f[kHeadRz];
        r.mouth_h = f[kMouthH];
        r.mouth_v = f[kMouthV];
        for (std::size_t j = 0; j < kJointCount; ++j) {
            r.joints_px[j].x = left + f[kFirstJointFeature + 2 * j] * plane_w;
            r.joints_px[j].y = top + f[kFirstJointFeature + 2 * j + 1] * plane_h;
        }
        r.head_height_px = kRenderHeadHeight;
        stream.frames.push_back(r);
    }
    return stream;
}

namespace {

// Nominal action-plane positions of the six joints.
constexpr std::array<Point2, kJointCount> kNominalJoints{{
    {0.40, 0.45},  // left shoulder
    {0.33, 0.65},  // left elbow
    {0.40, 0.80},  // left wrist
    {0.60, 0.45},  // right shoulder
    {0.67, 0.65},  // right elbow
    {0.60, 0.80},  // right wrist
}};

constexpr std::size_t kLatentFactors = 4;

} // namespace

PersonaSpec random_persona(std::uint64_t seed, double ar_coeff) {
    Rng rng(Rng::derive(seed, 0));
    const auto n = static_cast<Eigen::Index>(kFeatureCount);

    Eigen::MatrixXd loadings(n, static_cast<Eigen::Index>(kLatentFactors));
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
        for (Eigen::Index k = 0; k < loadings.cols(); ++k) loadings(i, k) = rng.normal();
    }
    Eigen::MatrixXd cov = loadings * loadings.transpose();
    for (Eigen::Index i = 0; i < n; ++i) cov(i, i) += rng.uniform(0.5, 1.5);
    const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    corr.diagonal().setOnes();
    corr = 0.5 * (corr + corr.transpose());

    PersonaSpec spec;
    spec.seed = Rng::derive(seed, 1);
    spec.label = "persona";
    spec.target_corr = nearest_correlation(corr);
    spec.ar_coeff = ar_coeff;
    for (std::size_t k = 0; k < kAuCount; ++k) {
        spec.means[k] = rng.uniform(0.8, 2.0);
        spec.scales[k] = rng.uniform(0.3, 0.8);
    }
    spec.means[kHeadRx] = rng.uniform(-0.1, 0.1);
    spec.scales[kHeadRx] = rng.uniform(0.05, 0.15);
    spec.means[kHeadRz] = rng.uniform(-0.1, 0.1);
    spec.scales[kHeadRz] = rng.uniform(0.05, 0.15);
    spec.means[kMouthH] = rng.uniform(40.0, 60.0);
    spec.scales[kMouthH] = rng.uniform(2.0, 5.0);
    spec.means[kMouthV] = rng.uniform(8.0, 15.0);
    spec.scales[kMouthV] = rng.uniform(2.0, 4.0);
    for (std::size_t j = 0; j < kJointCount; ++j) {
        spec.means[kFirstJointFeature + 2 * j] = kNominalJoints[j].x + rng.uniform(-0.02, 0.02);
        spec.means[kFirstJointFeature + 2 * j + 1] = kNominalJoints[j].y + rng.uniform(-0.02, 0.02);
        spec.scales[kFirstJointFeature + 2 * j] = rng.uniform(0.01, 0.05);
        spec.scales[kFirstJointFeature + 2 * j + 1] = rng.uniform(0.01, 0.05);
    }
    return spec;
}

std::pair<PersonaSpec, PersonaSpec> make_persona_pair(double separation, std::uint64_t seed, double ar_coeff) {
    if (!(separation >= 0.0)) throw std::invalid_argument("separation must be non-negative");
    PersonaSpec a = random_persona(seed, ar_coeff);
    a.label = "persona-a";
    a.seed = Rng::derive(seed, 10);

    Rng rng(Rng::derive(seed, 11));
    const auto n = static_cast<Eigen::Index>(kFeatureCount);
    Eigen::MatrixXd perturbation = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = rng.normal();
            perturbation(i, j) = v;
            perturbation(j, i) = v;
        }
    }
    perturbation /= perturbation.norm();

    PersonaSpec b = a;
    b.label = "persona-b";
    b.seed = Rng::derive(seed, 12);
    b.target_corr = nearest_correlation(a.target_corr + separation * perturbation);
    return {std::move(a), std::move(b)};
}

std::string persona_to_json(const PersonaSpec& spec) {
    nlohmann::json doc;
    doc["label"] = spec.label;
    doc["seed"] = spec.seed;
    doc["ar_coeff"] = spec.ar_coeff;
    doc["means"] = spec.means;
    doc["scales"] = spec.scales;
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < spec.target_corr.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(spec.target_corr.cols()));
        for (Eigen::Index j = 0; j < spec.target_corr.cols(); ++j) row[static_cast<std::size_t>(j)] = spec.target_corr(i, j);
        rows.push_back(row);
    }
    doc["target_corr"] = rows;
    return doc.dump(2) + "\n";
}

PersonaSpec persona_from_json(std::string_view text) {
    PersonaSpec spec;
    try {
        const auto doc = nlohmann::json::parse(text.begin(), text.end());
        spec.label = doc.at("label").get<std::string>();
        spec.seed = doc.at("seed").get<std::uint64_t>();
        spec.ar_coeff = doc.at("ar_coeff").get<double>();
        spec.means = doc.at("means").get<std::array<double, kFeatureCount>>();
        spec.scales = doc.at("scales").get<std::array<double, kFeatureCount>>();
        const auto rows = doc.at("target_corr").get<std::vector<std::vector<double>>>();
        const auto n = static_cast<Eigen::Index>(kFeatureCount);
        if (rows.size() != kFeatureCount) throw SchemaError("persona target_corr must have 32 rows");
        spec.target_corr.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (row.size() != kFeatureCount) throw SchemaError("persona target_corr rows must have 32 entries");
            for (Eigen::Index j = 0; j < n; ++j) spec.target_corr(i, j) = row[static_cast<std::size_t>(j)];
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("persona JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

} // namespace mannerist
