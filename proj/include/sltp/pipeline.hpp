// End-to-end orchestration: ingestion, PDM/PDCM, sampling, textons, LTP
// learning, sLTP graph partitioning, labeling, density and evaluation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sltp/config.hpp"
#include "sltp/graph.hpp"
#include "sltp/labeling.hpp"
#include "sltp/ltp.hpp"
#include "sltp/pdcm.hpp"
#include "sltp/pdm.hpp"
#include "sltp/sampling.hpp"
#include "sltp/texton.hpp"

namespace sltp {

struct ScanEntry {
    std::string id;
    std::filesystem::path volume;
    std::filesystem::path lung;
    std::filesystem::path emph_alt;  // optional
    std::filesystem::path air;       // optional outside-air mask for calibration
};

/// CSV with columns id, volume, lung and optionally emph_alt, air. Relative
/// paths resolve against the list's directory.
std::vector<ScanEntry> read_scan_list(const std::filesystem::path& path);

struct LungData {
    int id = 0;
    LungSide side = LungSide::Right;
    Mask3D mask;
    PdcmField field;
    ReferenceSlices slices;
    std::vector<double> slice_max;
    std::vector<double> cum_volume;
    int solver_iterations = 0;
    double solver_residual = 0.0;
    bool solver_converged = true;
    std::vector<Voxel> centers;
};

struct ScanData {
    std::string id;
    int index = 0;
    Volume3D volume;
    Mask3D lung;
    Mask3D emph950;
    std::optional<Mask3D> emph_alt;
    std::optional<Volume<std::uint8_t>> planted;
    std::vector<LungData> lungs;

    const Mask3D* alt() const { return emph_alt ? &*emph_alt : nullptr; }
};

ScanData phantom_scan(const PipelineConfig& c, int index);
ScanData load_scan(const ScanEntry& e, const PipelineConfig& c, int index);

/// Up to two components holding at least 1% of the mask each, ordered by
/// centroid x; the lower-x lung is tagged Right (radiological display).
std::vector<std::pair<Mask3D, LungSide>> split_lungs(const Mask3D& lung);

PoissonOptions poisson_options(const PipelineConfig& c);
SursParams surs_params(const PipelineConfig& c, int scan, int lung);

/// Lung split, PDM and PDCM for every lung of the scan.
void prepare_scan(ScanData& s, const PipelineConfig& c);

/// SURS centers of every lung.
void sample_centers(ScanData& s, const PipelineConfig& c);

TextonCodebook train_codebook(std::span<const ScanData> scans, const PipelineConfig& c);

/// ROI records for every SURS center of every lung of `s`.
std::vector<RoiRecord> scan_rois(const ScanData& s, const TextonCodebook& codebook, const PipelineConfig& c);

struct TrainedPatterns {
    double W = 0.0;
    bool spatial_disabled = false;
    PatternModel initial;
    LambdaTuning tuning;
    PatternModel ltps;
    SimilarityGraph graph;
    Partition partition;
    PatternModel sltps;
};

/// LTP initialization, lambda tuning (or the configured lambda), replacement
/// graph, Infomap and sLTP finalization on retained training ROIs.
TrainedPatterns train_patterns(std::span<const RoiRecord> training, const PipelineConfig& c,
                               std::ostream* log = nullptr);

/// sLTP index per ROI; ROIs failing the emphysema gate get kNoEmphysema.
std::vector<int> label_rois(std::span<const RoiRecord> rois, const PatternModel& model);

/// Planted pattern (0-based) at each ROI center, kNoEmphysema where none.
std::vector<int> planted_labels(std::span<const ScanData> scans, std::span<const RoiRecord> rois);

/// Ordered stages; running a stage runs (or loads from cache) all before it.
enum class Stage { Pdcm, Sample, Textons, Features, Ltp, Sltp, Label, Density, Eval };
Stage parse_stage(const std::string& name);
std::string to_string(Stage s);

/// Validates the config, then runs every stage up to `last`. Stage outputs
/// live in `<out_dir>/<stage>/` and are reused when the stage key matches.
/// A failing stage leaves an INCOMPLETE marker and rethrows with its name.
void run_pipeline(const PipelineConfig& c, Stage last, std::ostream& log);

/// Writes volume, lung and planted-label files of phantom `index`.
void write_phantom(const PipelineConfig& c, int index, const std::filesystem::path& dir);

}  // namespace sltp
