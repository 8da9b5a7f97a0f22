#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace s2l::sessions {

struct SessionManifest {
    std::string session_id;
    std::string subject_id;
    std::filesystem::path audio_path;
    double fps = 30.0;
    std::size_t n_frames = 0;
    std::string lighting_tag;
    bool wears_glasses = false;
    std::optional<std::filesystem::path> transcript_path;
    /// Optional extras consumed by refine / eval.
    std::optional<std::filesystem::path> truth_labels_path;
    std::optional<std::filesystem::path> embeddings_path;
    std::optional<std::filesystem::path> blinks_path;
};

/// Parses a dataset manifest. Relative paths resolve against `base_dir`.
/// Throws ParseError naming a missing/invalid field and StructuralError on duplicate ids.
std::vector<SessionManifest> parse_dataset(std::string_view json_text, const std::filesystem::path& base_dir,
                                           const std::string& origin = "<manifest>");
std::vector<SessionManifest> load_dataset(const std::filesystem::path& path);

/// Serializes with paths made relative to `base_dir` where possible.
std::string dataset_to_json(const std::vector<SessionManifest>& sessions, const std::filesystem::path& base_dir);

enum class Partition { Train, Val, Test };
std::string_view to_string(Partition p);

struct SplitFractions {
    double train = 0.60;
    double val = 0.245;
    double test = 0.155;
};

/// subject_id -> partition (ordered by subject id).
using DatasetSplit = std::map<std::string, Partition>;

/// Seeded permutation of the distinct subjects, cut at rounded fraction counts
/// (val and test rounded, remainder to train).
DatasetSplit split_subjects(const std::vector<SessionManifest>& manifests, SplitFractions fractions,
                            std::uint64_t seed);

/// Same rule applied to an explicit subject list.
DatasetSplit split_subject_ids(std::vector<std::string> subjects, SplitFractions fractions, std::uint64_t seed);

std::string split_to_json(const DatasetSplit& split);

}  // namespace s2l::sessions
