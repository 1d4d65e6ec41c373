// CSV serialization of pipeline artifacts. Every file carries a stamp: the
// config manifest hash, the key of the stage that wrote it, and the key of
// the upstream stage it was computed from.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sltp/csv.hpp"
#include "sltp/graph.hpp"
#include "sltp/ltp.hpp"
#include "sltp/texton.hpp"

namespace sltp {

struct Stamp {
    std::string manifest;
    std::string stage;
    std::string upstream;
};

void write_stamp(CsvWriter& w, const Stamp& s);
Stamp read_stamp(const CsvTable& t);

/// Throws std::runtime_error naming `what` when `found` differs from `expected`.
void check_lineage(const std::string& what, const std::string& expected, const std::string& found);

void save_codebook(const std::filesystem::path& path, const TextonCodebook& cb, const Stamp& s);
TextonCodebook load_codebook(const std::filesystem::path& path, Stamp* stamp = nullptr);

/// One row per ROI; texture columns are written only when present.
void save_rois(const std::filesystem::path& path, std::span<const RoiRecord> rois, const Stamp& s);
std::vector<RoiRecord> load_rois(const std::filesystem::path& path, Stamp* stamp = nullptr);

/// Patterns in `path`; ROI memberships in `<stem>_labels.csv` next to it.
void save_model(const std::filesystem::path& path, const PatternModel& m, const Stamp& s);
PatternModel load_model(const std::filesystem::path& path, Stamp* stamp = nullptr);

void save_graph(const std::filesystem::path& edges, const std::filesystem::path& nodes, const SimilarityGraph& g,
                const Stamp& s);
void save_partition(const std::filesystem::path& path, const Partition& p, const Stamp& s);
Partition load_partition(const std::filesystem::path& path, Stamp* stamp = nullptr);

std::filesystem::path labels_path(const std::filesystem::path& model_path);

}  // namespace sltp
