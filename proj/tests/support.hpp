#pragma once

// Reference implementations and data generators shared by the unit tests and
// the acceptance binary. Nothing here calls into the code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mannerist/correlation.hpp"
#include "mannerist/features.hpp"
#include "mannerist/ocsvm.hpp"
#include "mannerist/rng.hpp"

namespace testing {

using mannerist::Rng;

/// Pearson in long double straight from the textbook definition.
inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long double mx = 0, my = 0;
    for (std::size_t t = 0; t < n; ++t) {
        mx += x[t];
        my += y[t];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const long double dx = x[t] - mx;
        const long double dy = y[t] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// 496 oracle correlations over 32 channel series, pair (i, j) enumerated in
/// nested-loop order.
inline std::vector<double> oracle_vector(const std::vector<std::vector<double>>& channels) {
    std::vector<double> out;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        for (std::size_t j = i + 1; j < channels.size(); ++j) out.push_back(oracle_pearson(channels[i], channels[j]));
    }
    return out;
}

/// A clip of already-normalized frames whose 32 channels are random mixtures
/// of a few shared latent series plus noise, so correlations are spread out.
inline std::vector<std::vector<double>> random_channels(Rng& rng, std::size_t frames) {
    constexpr std::size_t kLatent = 4;
    std::vector<std::vector<double>> latent(kLatent, std::vector<double>(frames));
    for (auto& s : latent) {
        for (auto& v : s) v = rng.normal();
    }
    std::vector<std::vector<double>> channels(mannerist::kFeatureCount, std::vector<double>(frames));
    for (auto& ch : channels) {
        double w[kLatent];
        for (auto& wk : w) wk = rng.uniform(-1.0, 1.0);
        const double offset = rng.uniform(-5.0, 5.0);
        const double scale = rng.uniform(0.1, 10.0);
        for (std::size_t t = 0; t < frames; ++t) {
            double v = rng.normal() * 0.5;
            for (std::size_t k = 0; k < kLatent; ++k) v += w[k] * latent[k][t];
            ch[t] = offset + scale * v;
        }
    }
    return channels;
}

inline mannerist::Clip clip_from_channels(const std::vector<std::vector<double>>& channels) {
    mannerist::Clip clip;
    clip.source_id = "random";
    const std::size_t frames = channels.front().size();
    for (std::size_t t = 0; t < frames; ++t) {
        mannerist::NormalizedFrame f;
        f.frame_index = static_cast<std::int64_t>(t);
        f.timestamp = static_cast<double>(t) / 30.0;
        for (std::size_t a = 0; a < mannerist::kAuCount; ++a) f.au[a] = channels[a][t];
        f.head_rx = channels[mannerist::kHeadRx][t];
        f.head_rz = channels[mannerist::kHeadRz][t];
        f.mouth_h = channels[mannerist::kMouthH][t];
        f.mouth_v = channels[mannerist::kMouthV][t];
        for (std::size_t j = 0; j < mannerist::kJointCount; ++j) {
            f.joints_ap[j].x = channels[mannerist::kFirstJointFeature + 2 * j][t];
            f.joints_ap[j].y = channels[mannerist::kFirstJointFeature + 2 * j + 1][t];
        }
        f.head_height_px = 100.0;
        clip.frames.push_back(f);
    }
    return clip;
}

inline mannerist::Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    mannerist::Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    }
    return m;
}

// ---------------------------------------------------------------------------
// One-class dual oracle: projected gradient on
//     min 1/2 a'Ka  s.t.  0 <= a <= C, sum a = 1
// with an exact Euclidean projection (bisection on the shift), followed by a
// KKT linear solve on the identified free set once the active set settles.

inline Eigen::MatrixXd oracle_gram(const mannerist::Matrix& x, double gamma) {
    const auto n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
    }
    return k;
}

/// argmin |a - v| over {0 <= a <= c, sum a = 1}: a = clip(v - tau), tau by bisection.
inline Eigen::VectorXd project_box_simplex(const Eigen::VectorXd& v, double c) {
    double lo = v.minCoeff() - c - 1.0;
    double hi = v.maxCoeff() + 1.0;
    auto mass = [&](double tau) { return (v.array() - tau).max(0.0).min(c).sum(); };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) > 1.0 ? lo : hi) = mid;
    }
    return (v.array() - 0.5 * (lo + hi)).max(0.0).min(c);
}

/// Largest first-order KKT violation: max over a_j > 0 of G_j minus min over
/// a_i < C of G_i (non-negative at the optimum up to rounding).
inline double kkt_violation(const Eigen::VectorXd& a, const Eigen::VectorXd& g, double c) {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) > 0.0) up = std::max(up, g(i));
        if (a(i) < c) low = std::min(low, g(i));
    }
    return std::max(0.0, up - low);
}

struct OracleSolution {
    Eigen::VectorXd alphas;
    double rho = 0.0;
    double violation = 0.0;
};

inline OracleSolution oracle_one_class(const Eigen::MatrixXd& k, double nu, double tolerance = 1e-10) {
    const auto n = k.rows();
    const double c = 1.0 / (nu * static_cast<double>(n));
    const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().maxCoeff();
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd a = project_box_simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), c);

    const double snap = 1e-12;
    auto polish = [&](const Eigen::VectorXd& guess) -> std::optional<Eigen::VectorXd> {
        std::vector<Eigen::Index> free;
        Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (guess(i) <= snap) {
                fixed(i) = 0.0;
            } else if (guess(i) >= c - snap) {
                fixed(i) = c;
            } else {
                free.push_back(i);
            }
        }
        const auto m = static_cast<Eigen::Index>(free.size());
        if (m == 0) return std::nullopt;
        Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m + 1);
        Eigen::VectorXd rhs(m + 1);
        const Eigen::VectorXd kb = k * fixed;
        for (Eigen::Index p = 0; p < m; ++p) {
            for (Eigen::Index q = 0; q < m; ++q) sys(p, q) = k(free[p], free[q]);
            sys(p, m) = -1.0;
            sys(m, p) = 1.0;
            rhs(p) = -kb(free[p]);
        }
        rhs(m) = 1.0 - fixed.sum();
        const Eigen::VectorXd sol = sys.fullPivLu().solve(rhs);
        Eigen::VectorXd out = fixed;
        for (Eigen::Index p = 0; p < m; ++p) {
            if (sol(p) < 0.0 || sol(p) > c) return std::nullopt;
            out(free[p]) = sol(p);
        }
        return out;
    };

    // Nesterov-accelerated projected gradient with gradient-based restarts.
    Eigen::VectorXd y = a;
    double t = 1.0;
    for (std::size_t it = 1; it <= 2'000'000; ++it) {
        const Eigen::VectorXd next = project_box_simplex(y - step * (k * y), c);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if ((y - next).dot(next - a) > 0.0) {
            y = next;
            t = 1.0;
        } else {
            y = next + ((t - 1.0) / t_next) * (next - a);
            t = t_next;
        }
        a = next;
        if (it % 200 == 0) {
            if (auto p = polish(a)) {
                const Eigen::VectorXd g = k * *p;
                if (kkt_violation(*p, g, c) <= tolerance) {
                    a = *p;
                    break;
                }
            }
            if (kkt_violation(a, k * a, c) <= tolerance) break;
        }
    }

    OracleSolution out;
    out.alphas = a;
    const Eigen::VectorXd g = k * a;
    out.violation = kkt_violation(a, g, c);
    double sum = 0.0;
    std::size_t free = 0;
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a(i) > snap && a(i) < c - snap) {
            sum += g(i);
            ++free;
        }
        if (a(i) > 0.0) up = std::max(up, g(i));
        if (a(i) < c) low = std::min(low, g(i));
    }
    out.rho = free > 0 ? sum / static_cast<double>(free) : 0.5 * (up + low);
    return out;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
            i = j + 1;
        }
        return r;
    };
    return oracle_pearson(ranks(x), ranks(y));
}

} // namespace testing
