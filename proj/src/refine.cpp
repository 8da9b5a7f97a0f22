#include "s2l/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "s2l/error.hpp"
#include "s2l/rng.hpp"

namespace s2l::refine {

EmbeddingSet::EmbeddingSet(std::vector<double> data, std::size_t dim, std::vector<std::size_t> frame_indices)
    : data_(std::move(data)), dim_(dim), frame_indices_(std::move(frame_indices)) {
    if (dim_ == 0) throw StructuralError("embedding dimension must be positive");
    if (data_.size() != dim_ * frame_indices_.size()) {
        throw StructuralError("embedding data size does not match n * dim");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw StructuralError("embedding contains non-finite values");
    }
    for (std::size_t i = 1; i < frame_indices_.size(); ++i) {
        if (frame_indices_[i] <= frame_indices_[i - 1]) {
            throw StructuralError("embedding frame indices must be strictly increasing");
        }
    }
}

std::ptrdiff_t EmbeddingSet::find_frame(std::size_t frame) const {
    const auto it = std::lower_bound(frame_indices_.begin(), frame_indices_.end(), frame);
    if (it == frame_indices_.end() || *it != frame) return -1;
    return it - frame_indices_.begin();
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::size_t nearest_center(std::span<const double> point, std::span<const double> centers, std::size_t dim) {
    const std::size_t k = centers.size() / dim;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(point, centers.subspan(c * dim, dim));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<double> kmeans_plus_plus(const EmbeddingSet& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.size();
    const std::size_t dim = points.dim();
    if (k == 0 || k > n) throw ArgumentError("k must lie in [1, n]");
    SplitMix64 rng(seed);
    std::vector<double> centers;
    centers.reserve(k * dim);
    std::vector<bool> chosen(n, false);

    auto take = [&](std::size_t i) {
        const auto r = points.row(i);
        centers.insert(centers.end(), r.begin(), r.end());
        chosen[i] = true;
    };
    take(rng.below(n));

    // D^2 sampling; returns n when every point coincides with a center.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    auto sample = [&](double total) {
        if (!(total > 0.0)) return n;
        const double target = rng.uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            last_positive = i;
            if (acc > target) return i;
        }
        return last_positive;  // rounding left the target past the last weight
    };

    // Greedy variant: draw several candidates per step and keep the one that
    // lowers the potential most.
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    for (std::size_t c = 1; c < k; ++c) {
        const auto last = std::span<const double>(centers).subspan((c - 1) * dim, dim);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points.row(i), last));
            total += d2[i];
        }
        std::size_t pick = n;
        double best_potential = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t cand = sample(total);
            if (cand == n) break;
            double potential = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                potential += std::min(d2[i], squared_distance(points.row(i), points.row(cand)));
            }
            if (potential < best_potential) {
                best_potential = potential;
                pick = cand;
            }
        }
        if (pick == n) {
            // Every point coincides with a center; pick uniformly among unchosen ones.
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) rest.push_back(i);
            }
            pick = rest[rng.below(rest.size())];
        }
        take(pick);
    }
    return centers;
}

namespace {

double assign_all(const EmbeddingSet& points, std::span<const double> centers, std::size_t dim,
                  std::vector<std::size_t>& assignments) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        assignments[i] = nearest_center(points.row(i), centers, dim);
        inertia += squared_distance(points.row(i), centers.subspan(assignments[i] * dim, dim));
    }
    return inertia;
}

// Moves the farthest-from-center point into each empty cluster. The donor
// cluster must keep at least one member.
void repair_empty(const EmbeddingSet& points, std::span<const double> centers, std::size_t k, std::size_t dim,
                  std::vector<std::size_t>& assignments) {
    std::vector<std::size_t> counts(k, 0);
    for (auto a : assignments) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = points.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (counts[assignments[i]] < 2) continue;
            const double d = squared_distance(points.row(i), centers.subspan(assignments[i] * dim, dim));
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == points.size()) break;
        --counts[assignments[far]];
        assignments[far] = c;
        ++counts[c];
    }
}

void update_centers(const EmbeddingSet& points, const std::vector<std::size_t>& assignments, std::size_t k,
                    std::vector<double>& centers) {
    const std::size_t dim = points.dim();
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto r = points.row(i);
        for (std::size_t d = 0; d < dim; ++d) sums[assignments[i] * dim + d] += r[d];
        ++counts[assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
    }
}

double inertia_of(const EmbeddingSet& points, std::span<const double> centers, std::size_t dim,
                  const std::vector<std::size_t>& assignments) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        s += squared_distance(points.row(i), centers.subspan(assignments[i] * dim, dim));
    }
    return s;
}

}  // namespace

ClusterModel lloyd(const EmbeddingSet& points, std::vector<double> initial_centers, std::size_t k,
                   std::size_t max_iters) {
    const std::size_t n = points.size();
    const std::size_t dim = points.dim();
    if (k == 0 || k > n) throw ArgumentError("k must lie in [1, n]");
    if (max_iters < 1) throw ArgumentError("max_iters must be >= 1");
    if (initial_centers.size() != k * dim) throw ArgumentError("initial centers must hold k * dim values");

    ClusterModel model;
    model.k = k;
    model.dim = dim;
    model.centers = std::move(initial_centers);
    model.assignments.assign(n, 0);

    std::vector<std::size_t> previous;
    for (std::size_t it = 0; it < max_iters; ++it) {
        assign_all(points, model.centers, dim, model.assignments);
        repair_empty(points, model.centers, k, dim, model.assignments);
        model.iterations = it + 1;
        if (model.assignments == previous) {
            model.converged = true;
            break;
        }
        update_centers(points, model.assignments, k, model.centers);
        model.inertia_history.push_back(inertia_of(points, model.centers, dim, model.assignments));
        previous = model.assignments;
    }
    if (!model.converged) {
        // One more pass tells whether the last update happened to be a fixpoint.
        std::vector<std::size_t> check(n);
        assign_all(points, model.centers, dim, check);
        repair_empty(points, model.centers, k, dim, check);
        model.converged = check == model.assignments;
    }
    model.inertia = inertia_of(points, model.centers, dim, model.assignments);
    return model;
}

ClusterModel kmeans(const EmbeddingSet& points, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                    std::size_t n_init) {
    if (k == 0 || k > points.size()) {
        throw ArgumentError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(points.size()) + "]");
    }
    if (n_init < 1) throw ArgumentError("n_init must be >= 1");
    ClusterModel best = lloyd(points, kmeans_plus_plus(points, k, seed), k, max_iters);
    for (std::size_t r = 1; r < n_init; ++r) {
        auto m = lloyd(points, kmeans_plus_plus(points, k, stream_seed(seed, r)), k, max_iters);
        if (m.inertia < best.inertia) best = std::move(m);
    }
    return best;
}

ClusterZoneMap map_clusters_to_zones(const ClusterModel& model, const FrameLabels& labels,
                                     const EmbeddingSet& embeddings) {
    if (model.assignments.size() != embeddings.size()) {
        throw StructuralError("cluster model and embeddings cover different frames");
    }
    const int n_zones = labels.n_classes;
    std::vector<std::vector<std::size_t>> votes(model.k, std::vector<std::size_t>(static_cast<std::size_t>(n_zones) + 1, 0));
    std::vector<std::size_t> members(model.k, 0);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const auto frame = embeddings.frame_indices()[i];
        if (frame >= labels.n_frames()) throw StructuralError("embedding frame beyond label range");
        const int zone = labels.labels[frame].zone;
        if (zone == kUnlabeled || zone > n_zones) continue;
        ++votes[model.assignments[i]][static_cast<std::size_t>(zone)];
        ++members[model.assignments[i]];
    }

    std::vector<std::size_t> order(model.k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return members[a] > members[b]; });

    ClusterZoneMap map(model.k, kUnlabeled);
    std::vector<bool> claimed(static_cast<std::size_t>(n_zones) + 1, false);
    for (auto c : order) {
        int best = kUnlabeled;
        std::size_t best_votes = 0;
        for (int z = 1; z <= n_zones; ++z) {
            const auto v = votes[c][static_cast<std::size_t>(z)];
            if (!claimed[static_cast<std::size_t>(z)] && v > best_votes) {
                best_votes = v;
                best = z;
            }
        }
        if (best != kUnlabeled) {
            map[c] = best;
            claimed[static_cast<std::size_t>(best)] = true;
        }
    }
    return map;
}

std::vector<bool> transition_mask(const FrameLabels& labels, int halfwidth) {
    if (halfwidth < 0) throw ArgumentError("transition halfwidth must be non-negative");
    const auto n = static_cast<long long>(labels.n_frames());
    std::vector<bool> mask(labels.n_frames(), false);
    for (long long b = 1; b < n; ++b) {
        if (labels.labels[static_cast<std::size_t>(b)].zone == labels.labels[static_cast<std::size_t>(b - 1)].zone) {
            continue;
        }
        const long long lo = std::max<long long>(0, b - halfwidth);
        const long long hi = std::min<long long>(n, b + halfwidth);
        for (long long f = lo; f < hi; ++f) mask[static_cast<std::size_t>(f)] = true;
    }
    return mask;
}

ReassignResult reassign_transition_frames(const FrameLabels& labels, const EmbeddingSet& embeddings,
                                          const ClusterModel& model, const ClusterZoneMap& cluster_to_zone,
                                          int halfwidth) {
    if (cluster_to_zone.size() != model.k) throw ArgumentError("cluster_to_zone must have one entry per cluster");
    if (embeddings.dim() != model.dim && embeddings.size() > 0) throw ArgumentError("embedding dimension mismatch");

    ReassignResult result{labels, {}};
    const auto mask = transition_mask(labels, halfwidth);
    for (std::size_t f = 0; f < mask.size(); ++f) {
        if (!mask[f] || labels.labels[f].zone == kUnlabeled) continue;
        ++result.report.transition_frames;
        const auto row = embeddings.find_frame(f);
        if (row < 0) {
            ++result.report.missing_embedding;
            continue;
        }
        const auto c = nearest_center(embeddings.row(static_cast<std::size_t>(row)), model.centers, model.dim);
        const int zone = cluster_to_zone[c];
        if (zone == kUnlabeled) {
            ++result.report.unmapped_cluster;
            continue;
        }
        auto& out = result.labels.labels[f];
        if (out.zone != zone) {
            ++result.report.changed;
            --result.report.net_change_per_zone[out.zone];
            ++result.report.net_change_per_zone[zone];
        }
        out = {zone, Provenance::Refined};
    }
    return result;
}

FrameLabels propagate_over_blinks(const FrameLabels& labels, const std::vector<bool>& blinks) {
    if (blinks.size() != labels.n_frames()) throw StructuralError("blink flags and labels differ in length");
    FrameLabels out = labels;
    int last = kUnlabeled;
    for (std::size_t f = 0; f < blinks.size(); ++f) {
        if (!blinks[f]) {
            if (labels.labels[f].zone != kUnlabeled) last = labels.labels[f].zone;
        } else if (last != kUnlabeled) {
            out.labels[f] = {last, Provenance::Propagated};
        }
    }
    return out;
}

}  // namespace s2l::refine
