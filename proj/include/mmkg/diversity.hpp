#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/util.hpp"

namespace mmkg {

using Point = std::vector<double>;

namespace detail {

inline double sq_dist(const Point& a, const Point& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const Point& a, const Point& b) { return std::sqrt(sq_dist(a, b)); }

inline void check_points(std::span<const Point> points) {
    if (points.empty()) throw ValidationError("no points given");
    const size_t d = points.front().size();
    for (const auto& p : points)
        if (p.size() != d) throw ValidationError("points have mixed dimensions");
}

inline int cluster_count(std::span<const int> labels) {
    int mx = -1;
    for (int l : labels) {
        if (l < 0) throw ValidationError("negative cluster label");
        mx = std::max(mx, l);
    }
    return mx + 1;
}

} // namespace detail

struct ClusterAssignment {
    std::vector<int> labels;
    std::vector<Point> centroids;
    int k = 0;
    int iterations = 0;
    std::uint64_t seed = 0;
    /// Total within-cluster squared distance after each Lloyd iteration;
    /// non-increasing by construction.
    std::vector<double> inertia_trace;
};

/// Lloyd's algorithm with k-means++ seeding. Fully deterministic for a given
/// seed: sampling uses raw mt19937_64 draws scaled by hand, never the
/// implementation-defined <random> distributions. Ties in assignment go to the
/// lowest centroid index. Clusters that empty out are reseeded to the point
/// farthest from its current centroid.
inline ClusterAssignment kmeans(std::span<const Point> points, int k, std::uint64_t seed,
                                int max_iter = 100) {
    detail::check_points(points);
    const size_t n = points.size();
    if (k < 1) throw ValidationError("kmeans: k must be >= 1");
    if (n < static_cast<size_t>(k))
        throw ValidationError("kmeans: need at least k points (n=" + std::to_string(n) +
                              ", k=" + std::to_string(k) + ")");

    std::mt19937_64 rng(seed);
    ClusterAssignment out;
    out.k = k;
    out.seed = seed;

    // k-means++ seeding
    std::vector<Point> centroids;
    centroids.reserve(static_cast<size_t>(k));
    centroids.push_back(points[static_cast<size_t>(unit_real(rng()) * static_cast<double>(n))]);
    std::vector<double> d2(n);
    while (centroids.size() < static_cast<size_t>(k)) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centroids) best = std::min(best, detail::sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        size_t pick = 0;
        if (total > 0.0) {
            double target = unit_real(rng()) * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) { pick = i; break; }
            }
        } else {
            // all remaining mass at existing centroids: duplicate points
            pick = static_cast<size_t>(unit_real(rng()) * static_cast<double>(n));
        }
        centroids.push_back(points[pick]);
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = detail::sq_dist(points[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                double d = detail::sq_dist(points[i], centroids[static_cast<size_t>(c)]);
                if (d < best_d) { best_d = d; best = c; }
            }
            if (labels[i] != best) { labels[i] = best; changed = true; }
        }

        std::vector<Point> sums(static_cast<size_t>(k), Point(points.front().size(), 0.0));
        std::vector<size_t> counts(static_cast<size_t>(k), 0);
        for (size_t i = 0; i < n; ++i) {
            const auto c = static_cast<size_t>(labels[i]);
            counts[c] += 1;
            for (size_t j = 0; j < points[i].size(); ++j) sums[c][j] += points[i][j];
        }
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<size_t>(c);
            if (counts[cc] == 0) continue;
            for (double& v : sums[cc]) v /= static_cast<double>(counts[cc]);
            centroids[cc] = std::move(sums[cc]);
        }
        // repair empty clusters: steal the point farthest from its centroid
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<size_t>(c);
            if (counts[cc] != 0) continue;
            size_t far_i = 0;
            double far_d = -1.0;
            for (size_t i = 0; i < n; ++i) {
                if (counts[static_cast<size_t>(labels[i])] <= 1) continue;
                double d = detail::sq_dist(points[i], centroids[static_cast<size_t>(labels[i])]);
                if (d > far_d) { far_d = d; far_i = i; }
            }
            counts[static_cast<size_t>(labels[far_i])] -= 1;
            labels[far_i] = c;
            counts[cc] = 1;
            centroids[cc] = points[far_i];
            changed = true;
        }

        double inertia = 0.0;
        for (size_t i = 0; i < n; ++i)
            inertia += detail::sq_dist(points[i], centroids[static_cast<size_t>(labels[i])]);
        out.inertia_trace.push_back(inertia);
        out.iterations = iter + 1;
        if (!changed) break;
    }

    out.labels = std::move(labels);
    out.centroids = std::move(centroids);
    return out;
}

/// Mean over points of (b - a) / max(a, b), a = mean intra-cluster distance
/// (self excluded), b = smallest mean distance to another cluster. Singleton
/// clusters contribute 0.
inline double silhouette(std::span<const Point> points, std::span<const int> labels) {
    detail::check_points(points);
    if (points.size() != labels.size()) throw ValidationError("silhouette: size mismatch");
    const int k = detail::cluster_count(labels);
    std::vector<size_t> sizes(static_cast<size_t>(k), 0);
    for (int l : labels) sizes[static_cast<size_t>(l)] += 1;
    size_t nonempty = 0;
    for (size_t s : sizes) nonempty += (s > 0);
    if (nonempty < 2) throw ValidationError("silhouette undefined for a single cluster");

    const size_t n = points.size();
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto li = static_cast<size_t>(labels[i]);
        if (sizes[li] == 1) continue; // singleton contributes 0
        std::vector<double> dist_sum(static_cast<size_t>(k), 0.0);
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[static_cast<size_t>(labels[j])] += detail::dist(points[i], points[j]);
        }
        double a = dist_sum[li] / static_cast<double>(sizes[li] - 1);
        double b = std::numeric_limits<double>::max();
        for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
            if (c == li || sizes[c] == 0) continue;
            b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
        }
        double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

/// Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j) against any other
/// cluster, where s is the mean member-to-centroid distance. Coincident
/// centroid pairs are skipped when both dispersions are zero and rejected
/// otherwise (the ratio would be infinite).
inline double davies_bouldin(std::span<const Point> points, std::span<const int> labels) {
    detail::check_points(points);
    if (points.size() != labels.size()) throw ValidationError("davies_bouldin: size mismatch");
    const int k = detail::cluster_count(labels);
    std::vector<size_t> sizes(static_cast<size_t>(k), 0);
    for (int l : labels) sizes[static_cast<size_t>(l)] += 1;

    std::vector<Point> centroids(static_cast<size_t>(k), Point(points.front().size(), 0.0));
    for (size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<size_t>(labels[i]);
        for (size_t j = 0; j < points[i].size(); ++j) centroids[c][j] += points[i][j];
    }
    std::vector<size_t> live;
    for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
        if (sizes[c] == 0) continue;
        for (double& v : centroids[c]) v /= static_cast<double>(sizes[c]);
        live.push_back(c);
    }
    if (live.size() < 2) throw ValidationError("davies_bouldin undefined for a single cluster");

    std::vector<double> dispersion(static_cast<size_t>(k), 0.0);
    for (size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<size_t>(labels[i]);
        dispersion[c] += detail::dist(points[i], centroids[c]);
    }
    for (size_t c : live) dispersion[c] /= static_cast<double>(sizes[c]);

    double total = 0.0;
    for (size_t a : live) {
        double worst = 0.0;
        for (size_t b : live) {
            if (a == b) continue;
            double d = detail::dist(centroids[a], centroids[b]);
            if (d == 0.0) {
                if (dispersion[a] + dispersion[b] == 0.0) continue;
                throw Error("davies_bouldin: coincident centroids with nonzero dispersion");
            }
            worst = std::max(worst, (dispersion[a] + dispersion[b]) / d);
        }
        total += worst;
    }
    return total / static_cast<double>(live.size());
}

/// Minimum single-linkage inter-cluster distance divided by the maximum
/// complete-linkage cluster diameter. Degenerate input where both terms are
/// zero is rejected; zero diameter with positive separation yields +infinity.
inline double dunn(std::span<const Point> points, std::span<const int> labels) {
    detail::check_points(points);
    if (points.size() != labels.size()) throw ValidationError("dunn: size mismatch");
    const int k = detail::cluster_count(labels);
    std::vector<size_t> sizes(static_cast<size_t>(k), 0);
    for (int l : labels) sizes[static_cast<size_t>(l)] += 1;
    size_t nonempty = 0;
    for (size_t s : sizes) nonempty += (s > 0);
    if (nonempty < 2) throw ValidationError("dunn undefined for a single cluster");

    double min_between = std::numeric_limits<double>::max();
    double max_diameter = 0.0;
    const size_t n = points.size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double d = detail::dist(points[i], points[j]);
            if (labels[i] == labels[j]) max_diameter = std::max(max_diameter, d);
            else min_between = std::min(min_between, d);
        }
    }
    if (max_diameter == 0.0) {
        if (min_between == 0.0) throw Error("dunn undefined: all distances are zero");
        return std::numeric_limits<double>::infinity();
    }
    return min_between / max_diameter;
}

struct DiversityReport {
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    double dunn = 0.0;
    int k = 0;
    size_t n = 0;
};

/// Embeds the questions, clusters with seeded K-Means, and evaluates all three
/// validity indices.
inline DiversityReport diversity_report(std::span<const std::string> questions,
                                        const Embedder& embedder, int k, std::uint64_t seed,
                                        unsigned jobs = 1) {
    if (questions.empty()) throw ValidationError("diversity_report: empty corpus");
    if (k < 2) throw ValidationError("diversity_report: k must be >= 2");
    if (questions.size() < static_cast<size_t>(k))
        throw ValidationError("diversity_report: k exceeds corpus size");
    std::vector<Point> points(questions.size());
    parallel_for(questions.size(), jobs,
                 [&](size_t i) { points[i] = embedder.embed_text(questions[i]).values; });
    auto assignment = kmeans(points, k, seed);
    DiversityReport report;
    report.k = k;
    report.n = questions.size();
    report.silhouette = silhouette(points, assignment.labels);
    report.davies_bouldin = davies_bouldin(points, assignment.labels);
    report.dunn = dunn(points, assignment.labels);
    return report;
}

} // namespace mmkg
