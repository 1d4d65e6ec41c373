// Agreement and reproducibility statistics.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sltp/volume.hpp"

namespace sltp {

/// 2|a ∩ b| / (|a| + |b|); two empty masks give 1.
double dice(const Mask3D& a, const Mask3D& b);

/// Dice of the voxels carrying `value` in two label volumes.
double dice_of_label(const Mask3D& a, const Mask3D& b, std::uint8_t value);

/// Mean Dice over scans and over label values 2..(n_patterns + 1) present in
/// either labeling of a scan.
double mean_label_dice(std::span<const Mask3D> a, std::span<const Mask3D> b, std::size_t n_patterns);

/// Mean over patterns of the Spearman correlation of per-scan fractions.
/// Rows are scans, columns patterns; constant columns are skipped.
double mean_fraction_spearman(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

/// Average of |ref_k ∩ cand_pi(k)| / |ref_k| over candidates and reference
/// patterns, with pi from Hungarian matching on 1 - overlap. Unmatched
/// reference patterns count 0.
double reproducibility_ln(std::span<const int> reference, std::span<const std::vector<int>> candidates);

std::vector<double> midranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

/// p_e = 1 gives 1 when p_o = 1 and 0 otherwise.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

/// Two-way random-effects, absolute-agreement, single-measure ICC(2,1).
double icc21(std::span<const double> pred, std::span<const double> truth);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace sltp
