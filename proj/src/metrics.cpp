#include "sltp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "sltp/hungarian.hpp"

namespace sltp {

double dice(const Mask3D& a, const Mask3D& b) {
    if (a.dims() != b.dims()) throw std::invalid_argument("dice: dims mismatch");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0, y = b[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice_of_label(const Mask3D& a, const Mask3D& b, std::uint8_t value) {
    if (a.dims() != b.dims()) throw std::invalid_argument("dice: dims mismatch");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] == value, y = b[i] == value;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double mean_label_dice(std::span<const Mask3D> a, std::span<const Mask3D> b, std::size_t n_patterns) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mean_label_dice: scan lists differ");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        for (std::size_t k = 0; k < n_patterns; ++k) {
            const auto value = static_cast<std::uint8_t>(k + 2);
            const bool present = std::find(a[s].values().begin(), a[s].values().end(), value) != a[s].values().end() ||
                                 std::find(b[s].values().begin(), b[s].values().end(), value) != b[s].values().end();
            if (!present) continue;
            sum += dice_of_label(a[s], b[s], value);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 1.0;
}

double mean_fraction_spearman(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("mean_fraction_spearman: need >= 2 scans");
    const std::size_t k = a.front().size();
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> x, y;
        for (std::size_t s = 0; s < a.size(); ++s) {
            x.push_back(a[s].at(j));
            y.push_back(b[s].at(j));
        }
        const bool cx = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
        const bool cy = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
        if (cx || cy) continue;
        sum += spearman(x, y);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("mean_fraction_spearman: every column is constant");
    return sum / static_cast<double>(n);
}

double reproducibility_ln(std::span<const int> reference, std::span<const std::vector<int>> candidates) {
    if (reference.empty()) throw std::invalid_argument("reproducibility_ln: empty labeling");
    if (candidates.empty()) throw std::invalid_argument("reproducibility_ln: no candidate labelings");
    std::map<int, std::size_t> ref_ids;
    for (int l : reference) ref_ids.emplace(l, ref_ids.size());
    std::vector<std::size_t> ref_size(ref_ids.size(), 0);
    std::size_t next = 0;
    for (auto& [label, idx] : ref_ids) idx = next++;
    for (int l : reference) ++ref_size[ref_ids[l]];

    double total = 0.0;
    for (const auto& cand : candidates) {
        if (cand.size() != reference.size())
            throw std::invalid_argument("reproducibility_ln: labelings cover different ROI sets");
        std::map<int, std::size_t> cand_ids;
        for (int l : cand) cand_ids.emplace(l, 0);
        next = 0;
        for (auto& [label, idx] : cand_ids) idx = next++;
        CostMatrix overlap(ref_ids.size(), cand_ids.size(), 0.0);
        for (std::size_t i = 0; i < reference.size(); ++i) overlap(ref_ids[reference[i]], cand_ids[cand[i]]) += 1.0;
        CostMatrix cost(overlap.rows, overlap.cols);
        for (std::size_t r = 0; r < overlap.rows; ++r)
            for (std::size_t c = 0; c < overlap.cols; ++c) {
                overlap(r, c) /= static_cast<double>(ref_size[r]);
                cost(r, c) = 1.0 - overlap(r, c);
            }
        const auto match = hungarian_match(cost);
        for (std::size_t r = 0; r < overlap.rows; ++r)
            if (match.row_to_col[r] >= 0) total += overlap(r, static_cast<std::size_t>(match.row_to_col[r]));
    }
    return total / static_cast<double>(candidates.size() * ref_ids.size());
}

std::vector<double> midranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = rank;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: need equal lengths >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("correlation of a constant vector");
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need equal lengths >= 2");
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    return pearson(rx, ry);
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
    if (a.empty() || a.size() != b.size()) throw std::invalid_argument("cohen_kappa: need equal nonempty vectors");
    std::map<int, double> ma, mb;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma[a[i]] += 1.0;
        mb[b[i]] += 1.0;
        agree += a[i] == b[i];
    }
    const double n = static_cast<double>(a.size());
    const double po = agree / n;
    double pe = 0.0;
    for (const auto& [k, c] : ma) {
        auto it = mb.find(k);
        if (it != mb.end()) pe += (c / n) * (it->second / n);
    }
    if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

double icc21(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.size() < 2) throw std::invalid_argument("icc: need equal lengths >= 2");
    const std::size_t n = pred.size();
    const double k = 2.0;
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) grand += pred[i] + truth[i];
    grand /= k * static_cast<double>(n);
    const double mean_p = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
    const double mean_t = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(n);
    double ssr = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double row = 0.5 * (pred[i] + truth[i]);
        ssr += k * (row - grand) * (row - grand);
        sst += (pred[i] - grand) * (pred[i] - grand) + (truth[i] - grand) * (truth[i] - grand);
    }
    if (sst == 0.0) throw std::invalid_argument("icc: zero total variance");
    const double ssc = static_cast<double>(n) * ((mean_p - grand) * (mean_p - grand) + (mean_t - grand) * (mean_t - grand));
    const double sse = std::max(0.0, sst - ssr - ssc);
    const double msr = ssr / static_cast<double>(n - 1);
    const double msc = ssc / (k - 1.0);
    const double mse = sse / (static_cast<double>(n - 1) * (k - 1.0));
    const double den = msr + (k - 1.0) * mse + k * (msc - mse) / static_cast<double>(n);
    if (den == 0.0) throw std::invalid_argument("icc: degenerate variance components");
    return (msr - mse) / den;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.empty() || a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: bad input");
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return 0.5 * x * (x - 1.0); };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, c] : cells) index += c2(c);
    for (const auto& [key, c] : ra) sa += c2(c);
    for (const auto& [key, c] : rb) sb += c2(c);
    const double total = c2(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace sltp
