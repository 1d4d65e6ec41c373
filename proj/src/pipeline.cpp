#include "sltp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sltp/artifacts.hpp"
#include "sltp/csv.hpp"
#include "sltp/features.hpp"
#include "sltp/metrics.hpp"
#include "sltp/phantom.hpp"
#include "sltp/random.hpp"
#include "sltp/regression.hpp"

namespace fs = std::filesystem;

namespace sltp {

std::vector<ScanEntry> read_scan_list(const fs::path& path) {
    const auto t = read_csv(path);
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) -> fs::path {
        if (p.empty()) return {};
        const fs::path q(p);
        return q.is_absolute() ? q : base / q;
    };
    auto optional_column = [&](const std::string& name) -> long {
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == name) return static_cast<long>(i);
        return -1;
    };
    const auto ci = t.column("id"), cv = t.column("volume"), cl = t.column("lung");
    const auto ca = optional_column("emph_alt"), cair = optional_column("air");
    std::vector<ScanEntry> out;
    for (const auto& row : t.rows) {
        ScanEntry e{row[ci], resolve(row[cv]), resolve(row[cl]), {}, {}};
        if (ca >= 0) e.emph_alt = resolve(row[static_cast<std::size_t>(ca)]);
        if (cair >= 0) e.air = resolve(row[static_cast<std::size_t>(cair)]);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw std::invalid_argument("scan list is empty: " + path.string());
    return out;
}

namespace {

std::string phantom_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "phantom_%03d", index);
    return buf;
}

Phantom make_phantom(const PipelineConfig& c, int index) {
    const auto n = static_cast<std::int64_t>(c.phantom_size);
    const double s = c.phantom_spacing_mm;
    return generate_phantom(
        three_pattern_spec({n, n, n}, {s, s, s}, stream_seed(c.seed, "phantom", static_cast<std::uint64_t>(index))));
}

}  // namespace

ScanData phantom_scan(const PipelineConfig& c, int index) {
    auto ph = make_phantom(c, index);
    ScanData s;
    s.id = phantom_id(index);
    s.index = index;
    s.volume = std::move(ph.volume);
    s.lung = std::move(ph.lung);
    s.planted = std::move(ph.planted);
    if (c.flip_z) {
        s.volume = flip_z(s.volume);
        s.lung = flip_z(s.lung);
        s.planted = flip_z(*s.planted);
    }
    s.emph950 = threshold_mask(s.volume, s.lung, static_cast<float>(c.emph_threshold_hu));
    return s;
}

void write_phantom(const PipelineConfig& c, int index, const fs::path& dir) {
    auto ph = make_phantom(c, index);
    fs::create_directories(dir);
    const auto id = phantom_id(index);
    save_volume(ph.volume, dir / (id + "_volume.mhd"));
    save_volume(ph.lung, dir / (id + "_lung.mhd"));
    save_volume(ph.planted, dir / (id + "_planted.mhd"));
}

ScanData load_scan(const ScanEntry& e, const PipelineConfig& c, int index) {
    ScanData s;
    s.id = e.id;
    s.index = index;
    s.volume = load_volume(e.volume);
    s.lung = load_mask(e.lung);
    if (!s.volume.same_grid(s.lung)) throw std::invalid_argument(e.id + ": volume and lung mask grids differ");
    if (!e.air.empty()) {
        const auto air = load_mask(e.air);
        s.volume = apply_shift(s.volume, outside_air_shift(s.volume, air));
    }
    if (!e.emph_alt.empty()) {
        s.emph_alt = load_mask(e.emph_alt);
        if (!s.emph_alt->same_grid(s.lung)) throw std::invalid_argument(e.id + ": emph_alt grid differs");
    }
    if (c.flip_z) {
        s.volume = flip_z(s.volume);
        s.lung = flip_z(s.lung);
        if (s.emph_alt) s.emph_alt = flip_z(*s.emph_alt);
    }
    s.emph950 = threshold_mask(s.volume, s.lung, static_cast<float>(c.emph_threshold_hu));
    return s;
}

std::vector<std::pair<Mask3D, LungSide>> split_lungs(const Mask3D& lung) {
    const auto comps = connected_components(lung);
    const std::size_t total = count_foreground(lung);
    if (total == 0) throw std::invalid_argument("lung mask is empty");
    std::vector<std::pair<double, int>> keep;  // (centroid x, component id)
    for (std::size_t k = 0; k < comps.sizes.size() && keep.size() < 2; ++k) {
        if (static_cast<double>(comps.sizes[k]) < 0.01 * static_cast<double>(total)) break;
        keep.push_back({0.0, static_cast<int>(k + 1)});
    }
    std::vector<Mask3D> masks;
    for (auto& [cx, id] : keep) {
        Mask3D m(lung.dims(), lung.spacing(), 0);
        double sx = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < lung.size(); ++i) {
            if (comps.labels[i] != id) continue;
            m[i] = 1;
            sx += static_cast<double>(lung.voxel(i).x);
            ++n;
        }
        cx = sx / static_cast<double>(n);
        masks.push_back(std::move(m));
    }
    std::vector<std::size_t> order(keep.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return keep[a].first < keep[b].first; });
    std::vector<std::pair<Mask3D, LungSide>> out;
    const double mid = 0.5 * static_cast<double>(lung.dims().nx - 1);
    for (std::size_t r = 0; r < order.size(); ++r) {
        LungSide side;
        if (order.size() == 2)
            side = r == 0 ? LungSide::Right : LungSide::Left;
        else
            side = keep[order[r]].first <= mid ? LungSide::Right : LungSide::Left;
        out.push_back({std::move(masks[order[r]]), side});
    }
    return out;
}

PoissonOptions poisson_options(const PipelineConfig& c) {
    PoissonOptions o;
    o.tol = c.poisson_tol;
    o.max_iter = c.poisson_max_iter;
    o.threads = c.threads;
    return o;
}

SursParams surs_params(const PipelineConfig& c, int scan, int lung) {
    SursParams p;
    p.roi_size_mm = c.roi_size_mm;
    p.beta1_mm = c.beta1_mm;
    p.beta2 = c.beta2;
    p.seed = stream_seed(c.seed, "surs-lung", static_cast<std::uint64_t>(scan) * 4 + static_cast<std::uint64_t>(lung));
    return p;
}

void prepare_scan(ScanData& s, const PipelineConfig& c) {
    s.lungs.clear();
    int id = 0;
    for (auto& [mask, side] : split_lungs(s.lung)) {
        LungData l;
        l.id = id++;
        l.side = side;
        const auto pdm = compute_pdm(mask, poisson_options(c));
        l.field = assign_coordinates(pdm.umod, pdm.core, mask, side);
        l.slices = pdm.slices;
        l.slice_max = pdm.slice_max;
        l.cum_volume = pdm.cum_volume;
        l.solver_iterations = pdm.solver_iterations;
        l.solver_residual = pdm.solver_residual;
        l.solver_converged = pdm.solver_converged;
        l.mask = std::move(mask);
        s.lungs.push_back(std::move(l));
    }
}

void sample_centers(ScanData& s, const PipelineConfig& c) {
    for (auto& l : s.lungs) l.centers = surs_sample(l.mask, surs_params(c, s.index, l.id));
}

TextonCodebook train_codebook(std::span<const ScanData> scans, const PipelineConfig& c) {
    PatchSampling ps;
    ps.per_roi = static_cast<std::size_t>(c.patches_per_roi);
    ps.seed = stream_seed(c.seed, "texton-patches");
    std::vector<double> patches;
    std::uint64_t item = 0;
    for (const auto& s : scans) {
        const auto shape = roi_shape(s.volume.spacing(), c.roi_size_mm);
        for (const auto& l : s.lungs) {
            std::vector<Voxel> retained;
            for (const auto& v : l.centers)
                if (gate_roi(v, shape, s.emph950, s.alt(), l.mask).retained) retained.push_back(v);
            const auto p = sample_patches(s.volume, retained, shape, ps, item);
            item += retained.size();
            patches.insert(patches.end(), p.begin(), p.end());
        }
    }
    if (patches.empty()) throw std::runtime_error("no emphysema-gated ROIs available for texton training");
    const auto thinned = thin_patches(patches, static_cast<std::size_t>(c.max_patches));
    return train_texton_codebook(thinned, c.textons, c.seed, c.threads);
}

std::vector<RoiRecord> scan_rois(const ScanData& s, const TextonCodebook& codebook, const PipelineConfig& c) {
    const auto shape = roi_shape(s.volume.spacing(), c.roi_size_mm);
    std::vector<RoiRecord> out;
    for (const auto& l : s.lungs) {
        auto r = extract_rois(s.volume, l.mask, s.emph950, s.alt(), l.field, codebook, l.centers, shape, s.index, l.id,
                              c.threads);
        out.insert(out.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    return out;
}

TrainedPatterns train_patterns(std::span<const RoiRecord> training, const PipelineConfig& c, std::ostream* log) {
    TrainedPatterns t;
    try {
        t.W = compute_W(training);
    } catch (const std::domain_error&) {
        t.W = 0.0;
        t.spatial_disabled = true;
        if (log) *log << "warning: all training ROIs share one sub-region; spatial term disabled\n";
    }
    t.initial = init_ltps(training, c.n_ltp, c.seed, c.threads, c.kmeans_restarts);
    AugmentOptions ao;
    ao.max_sweeps = c.max_sweeps;
    ao.threads = c.threads;
    if (c.lambda >= 0.0) {
        t.tuning.baseline = augment_ltps(t.initial, training, 0.0, t.W, ao);
        t.tuning.baseline_ssw = ssw_texture(t.tuning.baseline, training);
        t.tuning.lambda = c.lambda;
        t.tuning.grid = {c.lambda};
        t.tuning.model = c.lambda == 0.0 ? t.tuning.baseline : augment_ltps(t.tuning.baseline, training, c.lambda, t.W, ao);
        const double ssw = ssw_texture(t.tuning.model, training);
        t.tuning.delta = {t.tuning.baseline_ssw > 0.0 ? (ssw - t.tuning.baseline_ssw) / t.tuning.baseline_ssw : 0.0};
    } else {
        const auto grid = default_lambda_grid(c.lambda_points, c.lambda_max);
        t.tuning = tune_lambda(training, t.initial, grid, c.lt, t.W, ao);
        if (t.tuning.fallback && log) *log << "warning: no lambda met the homogeneity bound; using lambda = 0\n";
    }
    t.ltps = t.tuning.model;
    t.ltps.lambda = t.tuning.lambda;
    if (!t.ltps.converged && log) *log << "warning: LTP augmentation hit max_sweeps\n";
    const auto counts = replacement_counts(t.ltps, training, c.threads);
    std::vector<std::size_t> members;
    for (const auto& p : t.ltps.patterns) members.push_back(p.members.size());
    t.graph = build_similarity_graph(counts, members, c.eta);
    t.partition = infomap_partition(t.graph.weights, InfomapMode::Greedy, stream_seed(c.seed, "infomap"),
                                    c.infomap_restarts);
    t.sltps = finalize_sltps(t.partition, t.ltps, training);
    return t;
}

std::vector<int> label_rois(std::span<const RoiRecord> rois, const PatternModel& model) {
    std::vector<int> out(rois.size());
    for (std::size_t i = 0; i < rois.size(); ++i)
        out[i] = rois[i].retained ? assign_pattern(rois[i], model) : kNoEmphysema;
    return out;
}

std::vector<int> planted_labels(std::span<const ScanData> scans, std::span<const RoiRecord> rois) {
    std::vector<int> out(rois.size(), kNoEmphysema);
    for (std::size_t i = 0; i < rois.size(); ++i) {
        const auto& s = scans[static_cast<std::size_t>(rois[i].scan)];
        if (!s.planted) throw std::invalid_argument("planted_labels: scan has no planted labels");
        const auto v = (*s.planted)(rois[i].center);
        out[i] = v == 0 ? kNoEmphysema : static_cast<int>(v) - 1;
    }
    return out;
}

Stage parse_stage(const std::string& name) {
    static const std::map<std::string, Stage> names{
        {"pdcm", Stage::Pdcm},   {"sample", Stage::Sample}, {"textons", Stage::Textons},
        {"features", Stage::Features}, {"ltp", Stage::Ltp}, {"sltp", Stage::Sltp},
        {"label", Stage::Label}, {"density", Stage::Density}, {"eval", Stage::Eval}};
    auto it = names.find(name);
    if (it == names.end()) throw std::invalid_argument("unknown stage: " + name);
    return it->second;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Pdcm: return "pdcm";
        case Stage::Sample: return "sample";
        case Stage::Textons: return "textons";
        case Stage::Features: return "features";
        case Stage::Ltp: return "ltp";
        case Stage::Sltp: return "sltp";
        case Stage::Label: return "label";
        case Stage::Density: return "density";
        case Stage::Eval: return "eval";
    }
    return "?";
}

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
}

std::string key_of(const std::string& upstream, const std::string& params) {
    return hex64(fnv1a64(params, fnv1a64(upstream)));
}

std::string join(std::initializer_list<std::string> parts) {
    std::string s;
    for (const auto& p : parts) s += p + ";";
    return s;
}

std::string num(double x) { return format_double(x); }

// 8-bit heatmap scaled to the finite range of the grid; missing cells are black.
void write_pgm(const Grid2D& g, const fs::path& path) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : g.values)
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << g.cols << " " << g.rows << "\n255\n";
    for (double v : g.values) {
        unsigned char c = 0;
        if (std::isfinite(v)) c = static_cast<unsigned char>(hi > lo ? 1.0 + 254.0 * (v - lo) / (hi - lo) : 128.0);
        out.put(static_cast<char>(c));
    }
}

class Runner {
public:
    Runner(const PipelineConfig& c, std::ostream& log) : c_(c), log_(log), root_(c.out_dir) {
        manifest_ = config_hash(c);
    }

    void run(Stage last) {
        fs::create_directories(root_);
        write_text(root_ / "manifest.txt", "# manifest=" + manifest_ + "\n" + config_text(c_));
        ingest();
        step(Stage::Pdcm, last, [&] { return pdcm(); });
        step(Stage::Sample, last, [&] { return sample(); });
        step(Stage::Textons, last, [&] { return textons(); });
        step(Stage::Features, last, [&] { return features(); });
        step(Stage::Ltp, last, [&] { return ltp(); });
        step(Stage::Sltp, last, [&] { return sltp(); });
        step(Stage::Label, last, [&] { return label(); });
        step(Stage::Density, last, [&] { return density(); });
        step(Stage::Eval, last, [&] { return eval(); });
    }

private:
    template <class F>
    void step(Stage s, Stage last, F&& body) {
        if (static_cast<int>(s) > static_cast<int>(last)) return;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body();
            const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            log_ << "[" << to_string(s) << "] done in " << std::fixed << std::setprecision(1) << dt.count() << " s\n"
                 << std::defaultfloat;
        } catch (const std::exception& e) {
            const auto dir = root_ / to_string(s);
            fs::create_directories(dir);
            write_text(dir / "INCOMPLETE", std::string(e.what()) + "\n");
            throw std::runtime_error("stage " + to_string(s) + " failed: " + e.what());
        }
    }

    fs::path dir(Stage s) const { return root_ / to_string(s); }

    bool cached(Stage s, const std::string& key) const {
        const auto d = dir(s);
        return fs::exists(d / "key") && !fs::exists(d / "INCOMPLETE") && read_text(d / "key") == key + "\n";
    }

    void begin(Stage s) {
        const auto d = dir(s);
        fs::create_directories(d);
        fs::remove(d / "key");
        write_text(d / "INCOMPLETE", "running\n");
        log_ << "[" << to_string(s) << "] computing\n";
    }

    void finish(Stage s, const std::string& key) {
        write_text(dir(s) / "key", key + "\n");
        fs::remove(dir(s) / "INCOMPLETE");
    }

    Stamp stamp(const std::string& stage, const std::string& upstream) const { return {manifest_, stage, upstream}; }

    void ingest() {
        validate_config(c_);
        std::string params = join({c_.input, std::to_string(c_.phantom_count), std::to_string(c_.phantom_size),
                                   num(c_.phantom_spacing_mm), c_.flip_z ? "1" : "0", std::to_string(c_.seed),
                                   num(c_.emph_threshold_hu)});
        scans_.clear();
        if (c_.input == "phantom") {
            for (int i = 0; i < c_.phantom_count; ++i) scans_.push_back(phantom_scan(c_, i));
        } else {
            params += read_text(c_.input);
            const auto entries = read_scan_list(c_.input);
            for (std::size_t i = 0; i < entries.size(); ++i)
                scans_.push_back(load_scan(entries[i], c_, static_cast<int>(i)));
        }
        ingest_key_ = key_of("ingest", params);
        log_ << "[ingest] " << scans_.size() << " scans\n";
    }

    // Volumes of one lung in the pdcm cache.
    fs::path lung_file(const ScanData& s, int lung, const std::string& what) const {
        return dir(Stage::Pdcm) / (s.id + "_lung" + std::to_string(lung) + "_" + what + ".mhd");
    }

    void pdcm() {
        pdcm_key_ = key_of(ingest_key_, join({num(c_.poisson_tol), std::to_string(c_.poisson_max_iter)}));
        if (cached(Stage::Pdcm, pdcm_key_)) {
            const auto t = read_csv(dir(Stage::Pdcm) / "lungs.csv");
            check_lineage("pdcm/lungs.csv", pdcm_key_, read_stamp(t).stage);
            for (auto& s : scans_) s.lungs.clear();
            for (const auto& row : t.rows) {
                auto& s = scans_.at(static_cast<std::size_t>(parse_int(row[t.column("scan")])));
                LungData l;
                l.id = static_cast<int>(parse_int(row[t.column("lung")]));
                l.side = row[t.column("side")] == "right" ? LungSide::Right : LungSide::Left;
                l.mask = load_mask(lung_file(s, l.id, "mask"));
                const Voxel core{parse_int(row[t.column("core_x")]), parse_int(row[t.column("core_y")]),
                                 parse_int(row[t.column("core_z")])};
                l.field = PdcmField{load_volume(lung_file(s, l.id, "r")), load_volume(lung_file(s, l.id, "theta")),
                                    load_volume(lung_file(s, l.id, "phi")), l.mask, core, l.side};
                l.slices.upper = static_cast<std::size_t>(parse_int(row[t.column("i_u")]));
                l.slices.lower = static_cast<std::size_t>(parse_int(row[t.column("i_d")]));
                l.solver_iterations = static_cast<int>(parse_int(row[t.column("iterations")]));
                l.solver_residual = parse_double(row[t.column("residual")]);
                l.solver_converged = row[t.column("converged")] == "1";
                s.lungs.push_back(std::move(l));
            }
            log_ << "[pdcm] cached\n";
            return;
        }
        begin(Stage::Pdcm);
        CsvWriter lungs(dir(Stage::Pdcm) / "lungs.csv");
        write_stamp(lungs, stamp(pdcm_key_, ingest_key_));
        lungs.header({"scan", "id", "lung", "side", "voxels", "core_x", "core_y", "core_z", "i_u_candidate",
                      "i_d_candidate", "i_u", "i_d", "iterations", "residual", "converged"});
        CsvWriter slices(dir(Stage::Pdcm) / "slices.csv");
        write_stamp(slices, stamp(pdcm_key_, ingest_key_));
        slices.header({"scan", "lung", "slice", "max_u2d", "cum_volume"});
        std::vector<Grid2D> angular, radial;
        for (auto& s : scans_) {
            prepare_scan(s, c_);
            for (const auto& l : s.lungs) {
                if (!l.solver_converged)
                    log_ << "warning: Poisson solver did not converge for " << s.id << " lung " << l.id
                         << " (residual " << l.solver_residual << ")\n";
                lungs.row({std::to_string(s.index), s.id, std::to_string(l.id), to_string(l.side),
                           std::to_string(count_foreground(l.mask)), std::to_string(l.field.core.x),
                           std::to_string(l.field.core.y), std::to_string(l.field.core.z),
                           std::to_string(l.slices.apical_candidate), std::to_string(l.slices.basal_candidate),
                           std::to_string(l.slices.upper), std::to_string(l.slices.lower),
                           std::to_string(l.solver_iterations), num(l.solver_residual),
                           l.solver_converged ? "1" : "0"});
                for (std::size_t z = 0; z < l.slice_max.size(); ++z)
                    slices.row({std::to_string(s.index), std::to_string(l.id), std::to_string(z), num(l.slice_max[z]),
                                num(l.cum_volume[z])});
                save_volume(l.mask, lung_file(s, l.id, "mask"));
                save_volume(l.field.r, lung_file(s, l.id, "r"));
                save_volume(l.field.theta, lung_file(s, l.id, "theta"));
                save_volume(l.field.phi, lung_file(s, l.id, "phi"));
                angular.push_back(angular_projection(s.volume, l.field));
                radial.push_back(radial_projection(s.volume, l.field));
            }
        }
        lungs.close();
        slices.close();
        write_projections(angular, radial);
        finish(Stage::Pdcm, pdcm_key_);
    }

    void write_projections(const std::vector<Grid2D>& angular, const std::vector<Grid2D>& radial) {
        const Grid2D zero_a{angular.front().rows, angular.front().cols,
                            std::vector<double>(angular.front().values.size(), 0.0)};
        const Grid2D zero_r{1, radial.front().cols, std::vector<double>(radial.front().values.size(), 0.0)};
        const auto pa = population_projection(angular, zero_a);
        const auto pr = population_projection(radial, zero_r);
        const auto th = theta_midpoints(pa.rows), ph = phi_midpoints(pa.cols), rm = radial_midpoints(pr.cols);
        CsvWriter a(dir(Stage::Pdcm) / "projection_angular.csv");
        write_stamp(a, stamp(pdcm_key_, ingest_key_));
        a.header({"theta", "phi", "mean_hu"});
        for (std::size_t i = 0; i < pa.rows; ++i)
            for (std::size_t j = 0; j < pa.cols; ++j) a.row({num(th[i]), num(ph[j]), num(pa.at(i, j))});
        a.close();
        CsvWriter r(dir(Stage::Pdcm) / "projection_radial.csv");
        write_stamp(r, stamp(pdcm_key_, ingest_key_));
        r.header({"r", "mean_hu"});
        for (std::size_t j = 0; j < pr.cols; ++j) r.row({num(rm[j]), num(pr.at(0, j))});
        r.close();
        write_pgm(pa, dir(Stage::Pdcm) / "projection_angular.pgm");
    }

    void sample() {
        sample_key_ = key_of(pdcm_key_, join({num(c_.roi_size_mm), num(c_.beta1_mm), std::to_string(c_.beta2),
                                              std::to_string(c_.seed)}));
        const auto path = dir(Stage::Sample) / "centers.csv";
        if (cached(Stage::Sample, sample_key_)) {
            const auto t = read_csv(path);
            check_lineage("sample/centers.csv", sample_key_, read_stamp(t).stage);
            for (auto& s : scans_)
                for (auto& l : s.lungs) l.centers.clear();
            for (const auto& row : t.rows) {
                auto& s = scans_.at(static_cast<std::size_t>(parse_int(row[0])));
                auto& l = s.lungs.at(static_cast<std::size_t>(parse_int(row[1])));
                l.centers.push_back({parse_int(row[2]), parse_int(row[3]), parse_int(row[4])});
            }
            log_ << "[sample] cached\n";
            return;
        }
        begin(Stage::Sample);
        CsvWriter w(path);
        write_stamp(w, stamp(sample_key_, pdcm_key_));
        w.header({"scan", "lung", "x", "y", "z", "subregion", "frac950", "frac_alt", "retained"});
        std::size_t total = 0, kept = 0;
        for (auto& s : scans_) {
            sample_centers(s, c_);
            const auto shape = roi_shape(s.volume.spacing(), c_.roi_size_mm);
            for (const auto& l : s.lungs) {
                for (const auto& v : l.centers) {
                    const auto g = gate_roi(v, shape, s.emph950, s.alt(), l.mask);
                    ++total;
                    kept += g.retained;
                    w.row({std::to_string(s.index), std::to_string(l.id), std::to_string(v.x), std::to_string(v.y),
                           std::to_string(v.z), std::to_string(center_subregion(v, l.field)), num(g.frac950),
                           num(g.frac_alt), g.retained ? "1" : "0"});
                }
            }
        }
        w.close();
        log_ << "[sample] " << total << " centers, " << kept << " retained\n";
        finish(Stage::Sample, sample_key_);
    }

    void textons() {
        textons_key_ = key_of(sample_key_, join({std::to_string(c_.textons), std::to_string(c_.patches_per_roi),
                                                 std::to_string(c_.max_patches), std::to_string(c_.seed)}));
        const auto path = dir(Stage::Textons) / "codebook.csv";
        if (cached(Stage::Textons, textons_key_)) {
            Stamp st;
            codebook_ = load_codebook(path, &st);
            check_lineage("textons/codebook.csv", textons_key_, st.stage);
            log_ << "[textons] cached\n";
            return;
        }
        begin(Stage::Textons);
        codebook_ = train_codebook(scans_, c_);
        save_codebook(path, codebook_, stamp(textons_key_, sample_key_));
        finish(Stage::Textons, textons_key_);
    }

    void features() {
        features_key_ = key_of(textons_key_, "features");
        const auto path = dir(Stage::Features) / "rois.csv";
        if (cached(Stage::Features, features_key_)) {
            Stamp st;
            rois_ = load_rois(path, &st);
            check_lineage("features/rois.csv", features_key_, st.stage);
            check_lineage("codebook behind features/rois.csv", textons_key_, st.upstream);
            log_ << "[features] cached\n";
        } else {
            begin(Stage::Features);
            rois_.clear();
            for (const auto& s : scans_) {
                auto r = scan_rois(s, codebook_, c_);
                rois_.insert(rois_.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
            }
            save_rois(path, rois_, stamp(features_key_, textons_key_));
            finish(Stage::Features, features_key_);
        }
        training_.clear();
        for (const auto& r : rois_)
            if (r.retained) training_.push_back(r);
        log_ << "[features] " << rois_.size() << " ROIs, " << training_.size() << " for training\n";
    }

    void ltp() {
        ltp_key_ = key_of(features_key_, join({std::to_string(c_.n_ltp), std::to_string(c_.kmeans_restarts),
                                               std::to_string(c_.lambda_points), num(c_.lambda_max), num(c_.lt),
                                               num(c_.lambda), std::to_string(c_.max_sweeps), num(c_.eta),
                                               std::to_string(c_.infomap_restarts), std::to_string(c_.seed)}));
        // The ltp stage also runs the graph step so that both share one training pass.
        const auto model_path = dir(Stage::Ltp) / "model.csv";
        if (cached(Stage::Ltp, ltp_key_)) {
            Stamp st;
            trained_.ltps = load_model(model_path, &st);
            check_lineage("ltp/model.csv", ltp_key_, st.stage);
            check_lineage("features behind ltp/model.csv", features_key_, st.upstream);
            log_ << "[ltp] cached\n";
            return;
        }
        begin(Stage::Ltp);
        trained_ = train_patterns(training_, c_, &log_);
        trained_valid_ = true;
        const auto st = stamp(ltp_key_, features_key_);
        save_model(model_path, trained_.ltps, st);
        CsvWriter w(dir(Stage::Ltp) / "lambda_tuning.csv");
        write_stamp(w, st);
        w.meta("W", num(trained_.W));
        w.meta("lambda", num(trained_.tuning.lambda));
        w.meta("fallback", trained_.tuning.fallback ? "1" : "0");
        w.meta("baseline_ssw", num(trained_.tuning.baseline_ssw));
        w.header({"lambda", "delta_ssw"});
        for (std::size_t i = 0; i < trained_.tuning.grid.size(); ++i)
            w.row({num(trained_.tuning.grid[i]), num(trained_.tuning.delta[i])});
        w.close();
        log_ << "[ltp] " << trained_.ltps.size() << " LTPs, lambda = " << trained_.tuning.lambda
             << ", W = " << trained_.W << "\n";
        finish(Stage::Ltp, ltp_key_);
    }

    void sltp() {
        sltp_key_ = key_of(ltp_key_, "sltp");
        const auto model_path = dir(Stage::Sltp) / "model.csv";
        if (cached(Stage::Sltp, sltp_key_)) {
            Stamp st;
            sltps_ = load_model(model_path, &st);
            check_lineage("sltp/model.csv", sltp_key_, st.stage);
            check_lineage("ltp model behind sltp/model.csv", ltp_key_, st.upstream);
            log_ << "[sltp] cached\n";
            return;
        }
        begin(Stage::Sltp);
        if (!trained_valid_) {
            // LTPs came from cache; rebuild the graph from them.
            const auto counts = replacement_counts(trained_.ltps, training_, c_.threads);
            std::vector<std::size_t> members;
            for (const auto& p : trained_.ltps.patterns) members.push_back(p.members.size());
            trained_.graph = build_similarity_graph(counts, members, c_.eta);
            trained_.partition = infomap_partition(trained_.graph.weights, InfomapMode::Greedy,
                                                   stream_seed(c_.seed, "infomap"), c_.infomap_restarts);
            trained_.sltps = finalize_sltps(trained_.partition, trained_.ltps, training_);
        }
        sltps_ = trained_.sltps;
        const auto st = stamp(sltp_key_, ltp_key_);
        save_graph(dir(Stage::Sltp) / "graph_edges.csv", dir(Stage::Sltp) / "graph_nodes.csv", trained_.graph, st);
        save_partition(dir(Stage::Sltp) / "partition.csv", trained_.partition, st);
        save_model(model_path, sltps_, st);
        log_ << "[sltp] " << sltps_.size() << " sLTPs (codelength " << trained_.partition.codelength << " bits)\n";
        finish(Stage::Sltp, sltp_key_);
    }

    void label() {
        label_key_ = key_of(sltp_key_, "label");
        roi_labels_ = label_rois(rois_, sltps_);
        if (cached(Stage::Label, label_key_)) {
            const auto t = read_csv(dir(Stage::Label) / "signatures.csv");
            check_lineage("label/signatures.csv", label_key_, read_stamp(t).stage);
            signatures_.clear();
            const auto first = t.column("no_emphysema");
            for (const auto& row : t.rows) {
                if (row[t.column("lung")] != "both") continue;
                std::vector<double> v;
                for (std::size_t j = first; j < row.size(); ++j) v.push_back(parse_double(row[j]));
                signatures_.push_back(std::move(v));
            }
            log_ << "[label] cached\n";
            return;
        }
        begin(Stage::Label);
        const auto st = stamp(label_key_, sltp_key_);
        CsvWriter rl(dir(Stage::Label) / "roi_labels.csv");
        write_stamp(rl, st);
        rl.header({"scan", "lung", "x", "y", "z", "sltp"});
        for (std::size_t i = 0; i < rois_.size(); ++i) {
            const auto& r = rois_[i];
            rl.row({std::to_string(r.scan), std::to_string(r.lung), std::to_string(r.center.x),
                    std::to_string(r.center.y), std::to_string(r.center.z),
                    roi_labels_[i] < 0 ? "none" : std::to_string(roi_labels_[i] + 1)});
        }
        rl.close();

        const std::size_t k = sltps_.size();
        CsvWriter sig(dir(Stage::Label) / "signatures.csv");
        write_stamp(sig, st);
        std::vector<std::string> head{"scan", "id", "lung", "voxels", "no_emphysema"};
        for (std::size_t j = 0; j < k; ++j) head.push_back("sltp_" + std::to_string(j + 1));
        sig.header(head);
        signatures_.clear();
        std::size_t offset = 0;
        for (const auto& s : scans_) {
            std::vector<std::vector<double>> per_lung;
            std::vector<std::size_t> voxels;
            for (const auto& l : s.lungs) {
                std::vector<LabeledCenter> centers(l.centers.size());
                for (std::size_t i = 0; i < l.centers.size(); ++i) {
                    centers[i].center = l.centers[i];
                    centers[i].pattern = roi_labels_[offset + i];
                }
                offset += l.centers.size();
                const auto lm = fill_labels(l.mask, std::move(centers), c_.threads);
                save_volume(lm.labels, dir(Stage::Label) / (s.id + "_lung" + std::to_string(l.id) + "_labels.mhd"));
                per_lung.push_back(signature(lm.labels, l.mask, k));
                voxels.push_back(count_foreground(l.mask));
                std::vector<std::string> row{std::to_string(s.index), s.id, to_string(l.side),
                                             std::to_string(voxels.back())};
                for (double v : per_lung.back()) row.push_back(num(v));
                sig.row(row);
            }
            const auto both = combine_signatures(per_lung, voxels);
            std::size_t total = 0;
            for (auto v : voxels) total += v;
            std::vector<std::string> row{std::to_string(s.index), s.id, "both", std::to_string(total)};
            for (double v : both) row.push_back(num(v));
            sig.row(row);
            signatures_.push_back(both);
        }
        sig.close();
        finish(Stage::Label, label_key_);
    }

    void density() {
        density_key_ = key_of(label_key_, join({std::to_string(c_.density_nr), std::to_string(c_.density_niso),
                                                std::to_string(c_.density_grid_r), std::to_string(c_.density_grid_phi)}));
        if (cached(Stage::Density, density_key_)) {
            log_ << "[density] cached\n";
            return;
        }
        begin(Stage::Density);
        std::vector<DensitySample> pool;
        for (std::size_t i = 0; i < rois_.size(); ++i) {
            if (roi_labels_[i] < 0) continue;
            const auto& r = rois_[i];
            const auto& f = scans_[static_cast<std::size_t>(r.scan)].lungs[static_cast<std::size_t>(r.lung)].field;
            const auto v = f.lung.index(r.center);
            pool.push_back({f.r[v], f.theta[v], f.phi[v], roi_labels_[i]});
        }
        const auto st = stamp(density_key_, label_key_);
        CsvWriter g(dir(Stage::Density) / "grid.csv");
        write_stamp(g, st);
        g.header({"sltp", "r_bin", "phi_bin", "r_mid", "phi_mid", "count", "density"});
        CsvWriter p(dir(Stage::Density) / "points.csv");
        write_stamp(p, st);
        p.header({"sltp", "r_prime", "phi_prime", "density"});
        if (!pool.empty()) {
            DensityOptions o;
            o.n_r = static_cast<std::size_t>(c_.density_nr);
            o.n_iso = static_cast<std::size_t>(c_.density_niso);
            o.grid_r = static_cast<std::size_t>(c_.density_grid_r);
            o.grid_phi = static_cast<std::size_t>(c_.density_grid_phi);
            o.seed = stream_seed(c_.seed, "density");
            const auto d = density_projection(pool, sltps_.size(), o);
            const double pi = 3.14159265358979323846;
            for (std::size_t k = 0; k < d.n_patterns; ++k)
                for (std::size_t ir = 0; ir < d.grid_r; ++ir)
                    for (std::size_t ip = 0; ip < d.grid_phi; ++ip) {
                        const auto cell = d.cell(ir, ip);
                        if (d.cell_count[cell] == 0) continue;
                        g.row({std::to_string(k + 1), std::to_string(ir), std::to_string(ip),
                               num((ir + 0.5) / static_cast<double>(d.grid_r)),
                               num(-pi + 2.0 * pi * (ip + 0.5) / static_cast<double>(d.grid_phi)),
                               std::to_string(d.pattern_count[k * d.grid_r * d.grid_phi + cell]),
                               num(d.density[k * d.grid_r * d.grid_phi + cell])});
                    }
            for (const auto& q : d.points)
                p.row({std::to_string(q.pattern + 1), num(q.r_prime), num(q.phi_prime), num(q.density)});
        } else {
            log_ << "warning: no sLTP-labeled ROIs; density tables are empty\n";
        }
        g.close();
        p.close();
        finish(Stage::Density, density_key_);
    }

    void eval() {
        std::string gt_text = c_.ground_truth.empty() ? "" : read_text(c_.ground_truth);
        eval_key_ = key_of(label_key_, join({c_.ground_truth, gt_text, std::to_string(c_.cv_folds)}));
        if (cached(Stage::Eval, eval_key_)) {
            log_ << "[eval] cached\n";
            return;
        }
        begin(Stage::Eval);
        CsvWriter w(dir(Stage::Eval) / "report.csv");
        write_stamp(w, stamp(eval_key_, label_key_));
        w.header({"metric", "value"});
        w.row({"scans", std::to_string(scans_.size())});
        w.row({"rois", std::to_string(rois_.size())});
        w.row({"training_rois", std::to_string(training_.size())});
        w.row({"sltps", std::to_string(sltps_.size())});
        w.row({"lambda", num(sltps_.lambda)});
        w.row({"W", num(sltps_.W)});
        const bool phantoms = std::all_of(scans_.begin(), scans_.end(), [](const auto& s) { return s.planted.has_value(); });
        if (phantoms) {
            const auto planted = planted_labels(scans_, rois_);
            std::vector<int> a, b;
            for (std::size_t i = 0; i < rois_.size(); ++i) {
                if (roi_labels_[i] < 0 || planted[i] < 0) continue;
                a.push_back(roi_labels_[i]);
                b.push_back(planted[i]);
            }
            if (!a.empty()) {
                w.row({"planted_rois", std::to_string(a.size())});
                w.row({"ari_planted", num(adjusted_rand_index(a, b))});
            }
        }
        if (!c_.ground_truth.empty()) evaluate_ground_truth(w);
        w.close();
        finish(Stage::Eval, eval_key_);
    }

    void evaluate_ground_truth(CsvWriter& w) {
        const auto t = read_csv(c_.ground_truth);
        const auto cid = t.column("id");
        std::map<std::string, std::size_t> by_id;
        for (std::size_t i = 0; i < scans_.size(); ++i) by_id[scans_[i].id] = i;
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < t.header.size(); ++j)
            if (j != cid) cols.push_back(j);
        std::vector<std::pair<std::size_t, const std::vector<std::string>*>> rows;
        for (const auto& row : t.rows) {
            auto it = by_id.find(row[cid]);
            if (it != by_id.end()) rows.push_back({it->second, &row});
        }
        if (rows.size() < static_cast<std::size_t>(c_.cv_folds))
            throw std::invalid_argument("ground truth covers fewer scans than cv_folds");
        Matrix X(rows.size(), signatures_.front().size()), Y(rows.size(), cols.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t j = 0; j < X.cols; ++j) X(r, j) = signatures_[rows[r].first][j];
            for (std::size_t j = 0; j < cols.size(); ++j) Y(r, j) = parse_double((*rows[r].second)[cols[j]]);
        }
        const auto cv = cross_validate(X, Y, c_.cv_folds, stream_seed(c_.seed, "cv"));
        const auto fit = fit_constrained_regression(X, Y);
        w.row({"regression_objective", num(fit.objective)});
        for (std::size_t j = 0; j < cols.size(); ++j) w.row({"icc21_" + t.header[cols[j]], num(cv.icc[j])});
    }

    const PipelineConfig& c_;
    std::ostream& log_;
    fs::path root_;
    std::string manifest_;
    std::string ingest_key_, pdcm_key_, sample_key_, textons_key_, features_key_, ltp_key_, sltp_key_, label_key_,
        density_key_, eval_key_;
    std::vector<ScanData> scans_;
    TextonCodebook codebook_;
    std::vector<RoiRecord> rois_, training_;
    TrainedPatterns trained_;
    bool trained_valid_ = false;
    PatternModel sltps_;
    std::vector<int> roi_labels_;
    std::vector<std::vector<double>> signatures_;
};

}  // namespace

void run_pipeline(const PipelineConfig& c, Stage last, std::ostream& log) {
    validate_config(c);
    Runner(c, log).run(last);
}

}  // namespace sltp
