// Pipeline configuration: key = value text files, flag overrides, and the
// manifest hash stamped on every artifact.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace sltp {

struct PipelineConfig {
    // Cohort: "phantom" or a scan-list CSV (id, volume, lung[, emph_alt][, air]).
    std::string input = "phantom";
    int phantom_count = 20;
    int phantom_size = 96;
    double phantom_spacing_mm = 2.5;
    bool flip_z = false;
    std::string out_dir;
    std::uint64_t seed = 1;
    int threads = 1;

    double emph_threshold_hu = -950.0;

    double poisson_tol = 1e-4;
    int poisson_max_iter = 10000;

    double roi_size_mm = 25.0;
    double beta1_mm = 25.0;
    int beta2 = 3;

    int textons = 40;
    int texton_edge = 3;
    int patches_per_roi = 48;
    int max_patches = 60000;
    int subregions = 36;

    int n_ltp = 100;
    int kmeans_restarts = 10;
    int lambda_points = 21;
    double lambda_max = 2.0;
    double lt = 0.01;
    double lambda = -1.0;  // >= 0 skips tuning
    int max_sweeps = 200;

    double eta = 0.5;
    int infomap_restarts = 10;

    int density_nr = 60;
    int density_niso = 5000;
    int density_grid_r = 60;
    int density_grid_phi = 90;

    std::string ground_truth;  // optional CSV: id + fraction columns
    int cv_folds = 4;
};

/// Throws std::invalid_argument for unknown keys or unparsable values.
void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value);

/// Reads "key = value" lines; '#' starts a comment.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Canonical "key=value" lines in declaration order.
std::string config_text(const PipelineConfig& c, bool include_runtime = false);

/// FNV-1a hash of the canonical text without runtime-only keys (threads,
/// out_dir), as 16 hex digits.
std::string config_hash(const PipelineConfig& c);
std::string hex64(std::uint64_t h);

/// Checks ranges and required paths; runs before any computation.
void validate_config(const PipelineConfig& c);

}  // namespace sltp
