#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "s2l/annotate.hpp"

namespace s2l::refine {

/// Row-major per-frame feature vectors.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    /// Throws StructuralError on size mismatch, non-finite entries or unsorted frames.
    EmbeddingSet(std::vector<double> data, std::size_t dim, std::vector<std::size_t> frame_indices);

    std::size_t size() const { return frame_indices_.size(); }
    std::size_t dim() const { return dim_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<const double> data() const { return data_; }
    const std::vector<std::size_t>& frame_indices() const { return frame_indices_; }
    /// Row holding `frame`, or -1 when the frame has no embedding.
    std::ptrdiff_t find_frame(std::size_t frame) const;

private:
    std::vector<double> data_;
    std::size_t dim_ = 0;
    std::vector<std::size_t> frame_indices_;
};

struct ClusterModel {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centers;  ///< k * dim, row-major
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    /// Inertia after each center update, first entry after the first update.
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
    bool converged = false;

    std::span<const double> center(std::size_t c) const { return {centers.data() + c * dim, dim}; }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Index of the closest center; ties go to the lowest index.
std::size_t nearest_center(std::span<const double> point, std::span<const double> centers, std::size_t dim);

/// Greedy k-means++ seeding (2 + ln k candidates per step). Returns k*dim center coordinates.
std::vector<double> kmeans_plus_plus(const EmbeddingSet& points, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from the given centers until the assignment stops changing
/// or max_iters is reached. Empty clusters seize the point farthest from its center.
ClusterModel lloyd(const EmbeddingSet& points, std::vector<double> initial_centers, std::size_t k,
                   std::size_t max_iters);

/// k-means++ followed by Lloyd, repeated n_init times (restart r seeded from
/// stream_seed(seed, r), r = 0 uses `seed`); the lowest inertia wins, earliest on ties.
/// Throws ArgumentError when k is 0 or exceeds the point count.
ClusterModel kmeans(const EmbeddingSet& points, std::size_t k, std::uint64_t seed, std::size_t max_iters = 300,
                    std::size_t n_init = 10);

/// cluster index -> zone; kUnlabeled marks an unmapped cluster.
using ClusterZoneMap = std::vector<int>;

/// Majority-vote mapping. Larger clusters claim first; a cluster whose majority
/// zone is taken falls back to its next most frequent unclaimed zone.
ClusterZoneMap map_clusters_to_zones(const ClusterModel& model, const FrameLabels& labels,
                                     const EmbeddingSet& embeddings);

struct ReassignReport {
    std::size_t transition_frames = 0;
    std::size_t changed = 0;
    std::size_t missing_embedding = 0;
    std::size_t unmapped_cluster = 0;
    std::map<int, long long> net_change_per_zone;
};

struct ReassignResult {
    FrameLabels labels;
    ReassignReport report;
};

/// Frames within `halfwidth` of a zone boundary take the zone of their nearest
/// cluster center. A boundary sits before each frame whose zone differs from the
/// previous frame's; frames [b - halfwidth, b + halfwidth) form its window.
ReassignResult reassign_transition_frames(const FrameLabels& labels, const EmbeddingSet& embeddings,
                                          const ClusterModel& model, const ClusterZoneMap& cluster_to_zone,
                                          int halfwidth);

/// Frames inside some transition window (same rule as reassign_transition_frames).
std::vector<bool> transition_mask(const FrameLabels& labels, int halfwidth);

/// Blink frames copy the zone of the closest earlier labeled non-blink frame.
FrameLabels propagate_over_blinks(const FrameLabels& labels, const std::vector<bool>& blinks);

// Embedding sources ------------------------------------------------------------

inline constexpr std::uint32_t kEmbeddingMagic = 0x454C3253;  // "S2LE" little-endian
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint32_t kTensorVersion = 2;

/// Binary float32 matrix: magic, version, n, dim (u32 LE), then n*dim floats.
/// Version 2 inserts rank and the dims (u32 each) before the data.
struct FloatMatrixFile {
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::vector<std::uint32_t> shape;  ///< empty for version 1
    std::vector<float> values;
};

void write_float_matrix(const std::filesystem::path& path, const FloatMatrixFile& file);
FloatMatrixFile read_float_matrix(const std::filesystem::path& path);

/// Writes `<path>` and the frame-index sidecar `<path>.frames.csv`.
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// Embeddings for the requested frames that the provider can supply.
    virtual EmbeddingSet embed(std::span<const std::size_t> frames) = 0;
};

/// Serves rows from a precomputed embedding file (e.g. an autoencoder's output).
class FileEmbeddingProvider : public EmbeddingProvider {
public:
    explicit FileEmbeddingProvider(const std::filesystem::path& path);
    EmbeddingSet embed(std::span<const std::size_t> frames) override;

private:
    EmbeddingSet all_;
};

/// Default provider: frame images `frame_NNNNNN.pgm|ppm` in a directory, area-
/// downsampled to side x side grayscale, flattened and mean-centered.
class ImageEmbeddingProvider : public EmbeddingProvider {
public:
    explicit ImageEmbeddingProvider(std::filesystem::path frame_dir, std::size_t side = 16);
    EmbeddingSet embed(std::span<const std::size_t> frames) override;

    /// Embedding of a single grayscale image (row-major, values in [0, 1]).
    static std::vector<double> embed_image(std::span<const double> gray, std::size_t width, std::size_t height,
                                           std::size_t side);

private:
    std::filesystem::path dir_;
    std::size_t side_;
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;  ///< [0, 1]
};

/// Reads binary PGM (P5) or PPM (P6); color is converted with Rec. 601 luma weights.
GrayImage read_netpbm_gray(const std::filesystem::path& path);

}  // namespace s2l::refine
