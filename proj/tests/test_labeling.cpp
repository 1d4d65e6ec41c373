#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sltp/labeling.hpp"

using namespace sltp;

namespace {

constexpr double pi = std::numbers::pi;

PatternModel two_patterns(double lambda, double W) {
    std::vector<RoiRecord> r{roi({1, 0, 0}, 0), roi({0.6, 0.4, 0}, 0), roi({0, 0.2, 0.8}, 7), roi({0, 0, 1}, 7)};
    auto m = build_patterns(r, std::vector<int>{0, 0, 1, 1});
    m.lambda = lambda;
    m.W = W;
    return m;
}

double cost_oracle(const RoiRecord& r, const Pattern& p, double lambda, double W) {
    double s = 0.0;
    for (std::size_t b = 0; b < p.spatial.size(); ++b) {
        const double d = (static_cast<int>(b) == r.subregion ? 1.0 : 0.0) - p.spatial[b];
        s += d * d;
    }
    return oracle::chi2(r.texture, p.texture) + lambda * W * s;
}

}  // namespace

TEST_SUITE("labeling") {

TEST_CASE("label encoding") {
    CHECK(encode_label(kNoEmphysema) == 1);
    CHECK(encode_label(0) == 2);
    CHECK(encode_label(253) == 255);
    CHECK_THROWS(encode_label(254));
    CHECK_THROWS(encode_label(-2));
    for (int k = -1; k < 254; ++k) CHECK(decode_label(encode_label(k)) == k);
    CHECK_THROWS(decode_label(0));
}

TEST_CASE("pattern assignment uses the mixed cost without penalty") {
    Rng rng(3);
    for (double lambda : {0.0, 0.7, 3.0}) {
        const auto m = two_patterns(lambda, 0.4);
        for (int t = 0; t < 200; ++t) {
            const double a = rng.uniform(), b = rng.uniform() * (1 - a);
            const auto r = roi({a, b, 1 - a - b}, static_cast<int>(rng.below(kSubregions)));
            int best = 0;
            double bc = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < m.size(); ++k) {
                const double c = cost_oracle(r, m.patterns[k], lambda, 0.4);
                if (c < bc) bc = c, best = static_cast<int>(k);
            }
            CHECK(assign_pattern(r, m) == best);
        }
    }
    // Far outside every d_max still gets a label.
    CHECK(assign_pattern(roi({0, 1, 0}, 3), two_patterns(0, 0)) == 0);
    // Equal cost goes to the lower index.
    auto tie = two_patterns(0, 0);
    tie.patterns[1].texture = tie.patterns[0].texture;
    CHECK(assign_pattern(roi({0, 0, 1}), tie) == 0);
    CHECK_THROWS(assign_pattern(roi({1}), PatternModel{}));
}

TEST_CASE("center labels respect the gate") {
    const auto m = two_patterns(0, 0);
    auto a = roi({1, 0, 0});
    auto b = roi({0, 0, 1});
    b.retained = false;
    a.center = {1, 2, 3};
    const std::vector<RoiRecord> rs{a, b};
    const auto c = label_centers(rs, m);
    CHECK(c[0].pattern == 0);
    CHECK(c[0].center == Voxel{1, 2, 3});
    CHECK(c[1].pattern == kNoEmphysema);
}

TEST_CASE("nearest-center fill") {
    Mask3D line({5, 1, 1}, {}, 1);
    const auto f = fill_labels(line, {{{0, 0, 0}, 3}, {{4, 0, 0}, kNoEmphysema}});
    CHECK(f.labels(0, 0, 0) == 5);
    CHECK(f.labels(1, 0, 0) == 5);
    CHECK(f.labels(2, 0, 0) == 5);  // equidistant: first center
    CHECK(f.labels(3, 0, 0) == 1);
    CHECK(f.provenance(0, 0, 0) == 1);
    CHECK(f.provenance(2, 0, 0) == 2);
    CHECK(f.provenance(4, 0, 0) == 1);
    CHECK_THROWS(fill_labels(line, {}));

    // Physical distance decides on anisotropic grids.
    Mask3D aniso({3, 3, 1}, {1.0, 3.0, 1.0}, 1);
    const auto g = fill_labels(aniso, {{{0, 0, 0}, 0}, {{2, 2, 0}, 1}});
    CHECK(g.labels(2, 0, 0) == 2);
    CHECK(g.labels(0, 2, 0) == 3);

    Rng rng(9);
    const auto ball = oracle::ball(16, 6.5, {1.0, 1.5, 2.0});
    std::vector<LabeledCenter> cs;
    for (int c = 0; c < 12; ++c)
        cs.push_back({Voxel{static_cast<std::int64_t>(rng.below(16)), static_cast<std::int64_t>(rng.below(16)),
                            static_cast<std::int64_t>(rng.below(16))},
                      static_cast<int>(rng.below(5)) - 1});
    const auto h = fill_labels(ball, cs, 3);
    for (std::size_t i = 0; i < ball.size(); ++i) {
        if (!ball[i]) {
            CHECK(h.labels[i] == 0);
            continue;
        }
        const auto v = ball.voxel(i);
        double best = std::numeric_limits<double>::infinity();
        int lab = 0;
        for (const auto& c : cs) {
            const double d = std::pow((c.center.x - v.x) * 1.0, 2) + std::pow((c.center.y - v.y) * 1.5, 2) +
                             std::pow((c.center.z - v.z) * 2.0, 2);
            if (d < best) best = d, lab = c.pattern;
        }
        CHECK(decode_label(h.labels[i]) == lab);
    }
    CHECK(fill_labels(ball, cs, 1).labels == h.labels);
}

TEST_CASE("scan labeling without emphysema and with one center") {
    PhantomSpec spec;
    spec.dims = {32, 32, 32};
    spec.spacing = {3, 3, 3};
    spec.patterns.clear();
    const auto ph = generate_phantom(spec);
    const auto pdm = compute_pdm(ph.lung);
    const auto field = assign_coordinates(pdm.umod, pdm.core, ph.lung);
    const auto emph = threshold_mask(ph.volume, ph.lung, -950.0f);
    REQUIRE(count_foreground(emph) == 0);
    SursParams surs;
    const auto shape = roi_shape(ph.lung.spacing(), surs.roi_size_mm);
    const auto centers = surs_sample(ph.lung, surs);
    const auto patches = sample_patches(ph.volume, centers, shape, PatchSampling{});
    const auto cb = train_texton_codebook(patches, 4, 1);
    const LabelInputs in{ph.volume, ph.lung, emph, nullptr, field};
    const auto out = label_scan(in, two_patterns(0, 0), cb, surs);
    for (std::size_t i = 0; i < ph.lung.size(); ++i) CHECK(out.labels[i] == (ph.lung[i] ? 1 : 0));
    const auto sig = signature(out.labels, ph.lung, 2);
    CHECK(sig == std::vector<double>{1.0, 0.0, 0.0});

    const auto one = fill_labels(ph.lung, {{pdm.core, 1}});
    for (std::size_t i = 0; i < ph.lung.size(); ++i)
        if (ph.lung[i]) CHECK(one.labels[i] == 3);
}

TEST_CASE("signatures") {
    Mask3D lung({4, 1, 1}, {}, 1);
    lung(3, 0, 0) = 0;
    Mask3D labels({4, 1, 1}, {}, 0);
    labels(0, 0, 0) = 1;
    labels(1, 0, 0) = 3;
    labels(2, 0, 0) = 3;
    const auto s = signature(labels, lung, 3);
    REQUIRE(s.size() == 4);
    CHECK(s[0] == doctest::Approx(1.0 / 3));
    CHECK(s[1] == 0.0);
    CHECK(s[2] == doctest::Approx(2.0 / 3));
    CHECK(s[3] == 0.0);
    CHECK_THROWS(signature(labels, lung, 0));
    CHECK_THROWS(signature(labels, Mask3D({4, 1, 1}, {}, 0), 3));
    CHECK_THROWS(signature(labels, Mask3D({5, 1, 1}, {}, 1), 3));

    const std::vector<std::vector<double>> sigs{{0.5, 0.5}, {1.0, 0.0}};
    const auto c = combine_signatures(sigs, std::vector<std::size_t>{100, 300});
    CHECK(c[0] == doctest::Approx(0.875));
    CHECK(c[1] == doctest::Approx(0.125));
    CHECK_THROWS(combine_signatures(sigs, std::vector<std::size_t>{0, 0}));
}

TEST_CASE("density projection examples") {
    Rng rng(4);
    std::vector<DensitySample> pool;
    for (int i = 0; i < 4000; ++i)
        pool.push_back({rng.uniform(), rng.uniform(0, 2 * pi), rng.uniform(-pi / 2, pi / 2), 0});
    DensityOptions o;
    o.n_r = 10;
    o.n_iso = 200;
    o.grid_r = 6;
    o.grid_phi = 8;
    const auto d = density_projection(pool, 2, o);
    for (std::size_t c = 0; c < 48; ++c) {
        if (d.cell_count[c] == 0) {
            CHECK(std::isnan(d.density[c]));
            continue;
        }
        CHECK(d.density[c] == doctest::Approx(1.0));
        CHECK(d.density[48 + c] == 0.0);
    }
    CHECK(d.pattern_total[1] == 0);
    CHECK_THROWS(density_projection({}, 1, o));
    pool[0].pattern = 2;
    CHECK_THROWS(density_projection(pool, 2, o));
}

TEST_CASE("density projection recounts from its points") {
    Rng rng(5);
    std::vector<DensitySample> pool;
    for (int i = 0; i < 6000; ++i) {
        // Pattern 0 sits near the apex, pattern 1 anywhere.
        const bool apical = rng.uniform() < 0.4;
        const double phi = apical ? rng.uniform(pi / 4, pi / 2) : rng.uniform(-pi / 2, pi / 2);
        pool.push_back({std::cbrt(rng.uniform()), rng.uniform(0, 2 * pi), phi, apical ? 0 : 1});
    }
    DensityOptions o;
    o.n_r = 12;
    o.n_iso = 300;
    o.grid_r = 10;
    o.grid_phi = 16;
    o.seed = 2;
    const auto d = density_projection(pool, 2, o);

    // Per-bin subsample sizes.
    std::vector<std::size_t> in_bin(o.n_r, 0);
    for (const auto& s : pool) ++in_bin[std::min<std::size_t>(static_cast<std::size_t>(s.r * o.n_r), o.n_r - 1)];
    std::size_t expect = 0;
    for (std::size_t b = 0; b < o.n_r; ++b)
        expect += std::min<std::size_t>(in_bin[b], static_cast<std::size_t>(std::llround(
                                                       (b + 0.5) / (o.n_r - 0.5) * static_cast<double>(o.n_iso))));
    CHECK(d.points.size() == expect);

    // Cells and densities rebuilt from the returned points.
    const std::size_t cells = o.grid_r * o.grid_phi;
    std::vector<double> cnt(cells, 0.0), pk(2 * cells, 0.0), tot(2, 0.0);
    for (const auto& p : d.points) {
        CHECK(p.r_prime >= 0.0);
        CHECK(p.r_prime <= 1.0 + 1e-12);
        const auto ir = std::min<std::size_t>(static_cast<std::size_t>(p.r_prime * o.grid_r), o.grid_r - 1);
        const auto ip = std::min<std::size_t>(static_cast<std::size_t>((p.phi_prime + pi) / (2 * pi) * o.grid_phi),
                                              o.grid_phi - 1);
        cnt[ir * o.grid_phi + ip] += 1;
        pk[static_cast<std::size_t>(p.pattern) * cells + ir * o.grid_phi + ip] += 1;
        tot[static_cast<std::size_t>(p.pattern)] += 1;
    }
    const double n = static_cast<double>(d.points.size());
    double upper0 = 0.0, upper1 = 0.0;
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t c = 0; c < cells; ++c) {
            CHECK(static_cast<double>(d.cell_count[c]) == cnt[c]);
            if (cnt[c] == 0) continue;
            CHECK(d.density[k * cells + c] == doctest::Approx(pk[k * cells + c] / tot[k] / (cnt[c] / n)));
            if (c % o.grid_phi >= o.grid_phi / 2) (k == 0 ? upper0 : upper1) += pk[k * cells + c] / tot[k];
        }
    // Densities weighted by pattern shares recover the cell distribution.
    for (std::size_t c = 0; c < cells; ++c) {
        if (cnt[c] == 0) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < 2; ++k) s += d.density[k * cells + c] * (cnt[c] / n) * (tot[k] / n);
        CHECK(s == doctest::Approx(cnt[c] / n).epsilon(1e-12));
    }
    // Upper half-plane (z > 0) holds nearly all apical samples.
    CHECK(upper0 > 0.95);
    CHECK(upper1 < 0.7);
    CHECK(density_projection(pool, 2, o).points.size() == d.points.size());
}

}  // TEST_SUITE
