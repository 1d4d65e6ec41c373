#include "sltp/artifacts.hpp"

#include <stdexcept>

namespace sltp {

namespace {

std::string b(bool v) { return v ? "1" : "0"; }

std::vector<double> numbers(const std::vector<std::string>& row, std::size_t from, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = parse_double(row[from + i]);
    return out;
}

std::size_t prefixed_columns(const CsvTable& t, const std::string& prefix) {
    std::size_t n = 0;
    while (true) {
        bool found = false;
        for (const auto& h : t.header)
            if (h == prefix + std::to_string(n)) found = true;
        if (!found) return n;
        ++n;
    }
}

}  // namespace

void write_stamp(CsvWriter& w, const Stamp& s) {
    w.meta("manifest", s.manifest);
    w.meta("stage", s.stage);
    w.meta("upstream", s.upstream);
}

Stamp read_stamp(const CsvTable& t) {
    Stamp s;
    if (t.meta.count("manifest")) s.manifest = t.meta.at("manifest");
    if (t.meta.count("stage")) s.stage = t.meta.at("stage");
    if (t.meta.count("upstream")) s.upstream = t.meta.at("upstream");
    return s;
}

void check_lineage(const std::string& what, const std::string& expected, const std::string& found) {
    if (expected != found)
        throw std::runtime_error("lineage mismatch for " + what + ": expected " + expected + ", found " +
                                 (found.empty() ? "<none>" : found));
}

void save_codebook(const std::filesystem::path& path, const TextonCodebook& cb, const Stamp& s) {
    CsvWriter w(path);
    write_stamp(w, s);
    w.meta("k", std::to_string(cb.k));
    w.meta("seed", std::to_string(cb.seed));
    w.meta("objective", format_double(cb.objective));
    std::vector<std::string> head{"texton"};
    for (int i = 0; i < kPatchSize; ++i) head.push_back("v" + std::to_string(i));
    w.header(head);
    for (int j = 0; j < cb.k; ++j) {
        std::vector<std::string> row{std::to_string(j)};
        for (double x : cb.texton(j)) row.push_back(format_double(x));
        w.row(row);
    }
    w.close();
}

TextonCodebook load_codebook(const std::filesystem::path& path, Stamp* stamp) {
    const auto t = read_csv(path);
    if (stamp) *stamp = read_stamp(t);
    TextonCodebook cb;
    cb.k = static_cast<int>(parse_int(t.meta_value("k")));
    cb.seed = std::stoull(t.meta_value("seed"));
    cb.objective = parse_double(t.meta_value("objective"));
    if (t.rows.size() != static_cast<std::size_t>(cb.k)) throw IoError(path.string() + ": texton count mismatch");
    const auto first = t.column("v0");
    for (const auto& row : t.rows) {
        const auto v = numbers(row, first, kPatchSize);
        cb.textons.insert(cb.textons.end(), v.begin(), v.end());
    }
    return cb;
}

void save_rois(const std::filesystem::path& path, std::span<const RoiRecord> rois, const Stamp& s) {
    CsvWriter w(path);
    write_stamp(w, s);
    const std::size_t bins = rois.empty() ? 0 : rois.front().texture.size();
    std::vector<std::string> head{"scan", "lung", "x", "y", "z", "subregion", "frac950", "frac_alt", "retained"};
    for (std::size_t i = 0; i < bins; ++i) head.push_back("t" + std::to_string(i));
    w.header(head);
    for (const auto& r : rois) {
        if (r.texture.size() != bins) throw std::invalid_argument("save_rois: ragged texture histograms");
        std::vector<std::string> row{std::to_string(r.scan),      std::to_string(r.lung),
                                     std::to_string(r.center.x),  std::to_string(r.center.y),
                                     std::to_string(r.center.z),  std::to_string(r.subregion),
                                     format_double(r.frac950),    format_double(r.frac_alt),
                                     b(r.retained)};
        for (double x : r.texture) row.push_back(format_double(x));
        w.row(row);
    }
    w.close();
}

std::vector<RoiRecord> load_rois(const std::filesystem::path& path, Stamp* stamp) {
    const auto t = read_csv(path);
    if (stamp) *stamp = read_stamp(t);
    const auto bins = prefixed_columns(t, "t");
    const std::size_t first = bins ? t.column("t0") : 0;
    const auto cs = t.column("scan"), cl = t.column("lung"), cx = t.column("x"), cy = t.column("y"),
               cz = t.column("z"), csub = t.column("subregion"), c950 = t.column("frac950"),
               calt = t.column("frac_alt"), cret = t.column("retained");
    std::vector<RoiRecord> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        RoiRecord r;
        r.scan = static_cast<int>(parse_int(row[cs]));
        r.lung = static_cast<int>(parse_int(row[cl]));
        r.center = {parse_int(row[cx]), parse_int(row[cy]), parse_int(row[cz])};
        r.subregion = static_cast<int>(parse_int(row[csub]));
        r.frac950 = parse_double(row[c950]);
        r.frac_alt = parse_double(row[calt]);
        r.retained = row[cret] == "1";
        if (bins) r.texture = numbers(row, first, bins);
        out.push_back(std::move(r));
    }
    return out;
}

std::filesystem::path labels_path(const std::filesystem::path& model_path) {
    auto p = model_path;
    p.replace_filename(model_path.stem().string() + "_labels.csv");
    return p;
}

void save_model(const std::filesystem::path& path, const PatternModel& m, const Stamp& s) {
    CsvWriter w(path);
    write_stamp(w, s);
    w.meta("lambda", format_double(m.lambda));
    w.meta("W", format_double(m.W));
    w.meta("penalty", b(m.penalty));
    w.meta("sweeps", std::to_string(m.sweeps));
    w.meta("converged", b(m.converged));
    const std::size_t bins = m.patterns.empty() ? 0 : m.patterns.front().texture.size();
    std::vector<std::string> head{"pattern", "members", "d_max"};
    for (std::size_t i = 0; i < bins; ++i) head.push_back("t" + std::to_string(i));
    for (int i = 0; i < kSubregions; ++i) head.push_back("s" + std::to_string(i));
    w.header(head);
    for (std::size_t k = 0; k < m.patterns.size(); ++k) {
        const auto& p = m.patterns[k];
        std::vector<std::string> row{std::to_string(k), std::to_string(p.members.size()), format_double(p.d_max)};
        for (double x : p.texture) row.push_back(format_double(x));
        for (double x : p.spatial) row.push_back(format_double(x));
        w.row(row);
    }
    w.close();

    CsvWriter l(labels_path(path));
    write_stamp(l, s);
    l.header({"roi", "pattern"});
    for (std::size_t i = 0; i < m.labels.size(); ++i) l.row({std::to_string(i), std::to_string(m.labels[i])});
    l.close();
}

PatternModel load_model(const std::filesystem::path& path, Stamp* stamp) {
    const auto t = read_csv(path);
    const auto st = read_stamp(t);
    if (stamp) *stamp = st;
    PatternModel m;
    m.lambda = parse_double(t.meta_value("lambda"));
    m.W = parse_double(t.meta_value("W"));
    m.penalty = t.meta_value("penalty") == "1";
    m.sweeps = static_cast<int>(parse_int(t.meta_value("sweeps")));
    m.converged = t.meta_value("converged") == "1";
    const auto bins = prefixed_columns(t, "t");
    const auto ft = bins ? t.column("t0") : 0, fs = t.column("s0"), cd = t.column("d_max");
    for (const auto& row : t.rows) {
        Pattern p;
        p.texture = numbers(row, ft, bins);
        p.spatial = numbers(row, fs, kSubregions);
        p.d_max = parse_double(row[cd]);
        m.patterns.push_back(std::move(p));
    }
    const auto l = read_csv(labels_path(path));
    check_lineage("model labels of " + path.string(), st.stage, read_stamp(l).stage);
    const auto cp = l.column("pattern");
    for (const auto& row : l.rows) {
        const auto k = static_cast<int>(parse_int(row[cp]));
        if (k < 0 || static_cast<std::size_t>(k) >= m.patterns.size()) throw IoError("model label out of range");
        m.patterns[static_cast<std::size_t>(k)].members.push_back(m.labels.size());
        m.labels.push_back(k);
    }
    return m;
}

void save_graph(const std::filesystem::path& edges, const std::filesystem::path& nodes, const SimilarityGraph& g,
                const Stamp& s) {
    CsvWriter e(edges);
    write_stamp(e, s);
    e.meta("eta", format_double(g.eta));
    e.header({"i", "j", "weight"});
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = i + 1; j < g.n; ++j)
            if (g.weights(i, j) > 0.0) e.row({std::to_string(i), std::to_string(j), format_double(g.weights(i, j))});
    e.close();

    CsvWriter n(nodes);
    write_stamp(n, s);
    n.header({"ltp", "members", "replaced", "ratio", "active"});
    for (std::size_t i = 0; i < g.n; ++i) {
        double replaced = 0.0;
        for (std::size_t j = 0; j < g.n; ++j) replaced += g.counts(i, j);
        n.row({std::to_string(i), std::to_string(g.members[i]), format_double(replaced), format_double(g.ratio[i]),
               b(g.active[i])});
    }
    n.close();
}

void save_partition(const std::filesystem::path& path, const Partition& p, const Stamp& s) {
    CsvWriter w(path);
    write_stamp(w, s);
    w.meta("codelength_bits", format_double(p.codelength));
    w.meta("modules", std::to_string(p.module_count));
    w.header({"ltp", "sltp"});
    for (std::size_t i = 0; i < p.modules.size(); ++i) w.row({std::to_string(i), std::to_string(p.modules[i])});
    w.close();
}

Partition load_partition(const std::filesystem::path& path, Stamp* stamp) {
    const auto t = read_csv(path);
    if (stamp) *stamp = read_stamp(t);
    Partition p;
    p.codelength = parse_double(t.meta_value("codelength_bits"));
    p.module_count = static_cast<std::size_t>(parse_int(t.meta_value("modules")));
    const auto c = t.column("sltp");
    for (const auto& row : t.rows) p.modules.push_back(static_cast<int>(parse_int(row[c])));
    return p;
}

}  // namespace sltp
