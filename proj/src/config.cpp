#include "sltp/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "sltp/csv.hpp"
#include "sltp/random.hpp"
#include "sltp/volume.hpp"

namespace sltp {

namespace {

template <class C, class F>
void visit(C& c, F&& f) {
    f("input", c.input);
    f("phantom_count", c.phantom_count);
    f("phantom_size", c.phantom_size);
    f("phantom_spacing_mm", c.phantom_spacing_mm);
    f("flip_z", c.flip_z);
    f("out_dir", c.out_dir);
    f("seed", c.seed);
    f("threads", c.threads);
    f("emph_threshold_hu", c.emph_threshold_hu);
    f("poisson_tol", c.poisson_tol);
    f("poisson_max_iter", c.poisson_max_iter);
    f("roi_size_mm", c.roi_size_mm);
    f("beta1_mm", c.beta1_mm);
    f("beta2", c.beta2);
    f("textons", c.textons);
    f("texton_edge", c.texton_edge);
    f("patches_per_roi", c.patches_per_roi);
    f("max_patches", c.max_patches);
    f("subregions", c.subregions);
    f("n_ltp", c.n_ltp);
    f("kmeans_restarts", c.kmeans_restarts);
    f("lambda_points", c.lambda_points);
    f("lambda_max", c.lambda_max);
    f("lt", c.lt);
    f("lambda", c.lambda);
    f("max_sweeps", c.max_sweeps);
    f("eta", c.eta);
    f("infomap_restarts", c.infomap_restarts);
    f("density_nr", c.density_nr);
    f("density_niso", c.density_niso);
    f("density_grid_r", c.density_grid_r);
    f("density_grid_phi", c.density_grid_phi);
    f("ground_truth", c.ground_truth);
    f("cv_folds", c.cv_folds);
}

bool runtime_only(const std::string& key) { return key == "threads" || key == "out_dir"; }

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
std::string to_text(const T& v) {
    if constexpr (std::is_same_v<T, std::string>)
        return v;
    else if constexpr (std::is_same_v<T, bool>)
        return v ? "true" : "false";
    else if constexpr (std::is_floating_point_v<T>)
        return format_double(v);
    else
        return std::to_string(v);
}

template <class T>
void from_text(const std::string& key, const std::string& s, T& v) {
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            v = s;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (s == "true" || s == "1") v = true;
            else if (s == "false" || s == "0") v = false;
            else throw std::invalid_argument(s);
        } else if constexpr (std::is_floating_point_v<T>) {
            v = parse_double(s);
        } else if constexpr (std::is_unsigned_v<T>) {
            std::size_t pos = 0;
            v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
        } else {
            v = static_cast<T>(parse_int(s));
        }
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value for " + key + ": '" + s + "'");
    }
}

}  // namespace

void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
    bool found = false;
    visit(c, [&](const char* name, auto& field) {
        if (key == name) {
            from_text(key, value, field);
            found = true;
        }
    });
    if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": expected key = value");
        set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

std::string config_text(const PipelineConfig& c, bool include_runtime) {
    std::string out;
    visit(c, [&](const char* name, const auto& field) {
        if (!include_runtime && runtime_only(name)) return;
        out += std::string(name) + "=" + to_text(field) + "\n";
    });
    return out;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const PipelineConfig& c) { return hex64(fnv1a64(config_text(c))); }

void validate_config(const PipelineConfig& c) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw std::invalid_argument("config: " + msg);
    };
    require(!c.out_dir.empty(), "out_dir is required");
    if (c.input != "phantom") require(std::filesystem::exists(c.input), "scan list not found: " + c.input);
    if (!c.ground_truth.empty())
        require(std::filesystem::exists(c.ground_truth), "ground truth not found: " + c.ground_truth);
    require(c.phantom_count >= 1, "phantom_count must be >= 1");
    require(c.phantom_size >= 16, "phantom_size must be >= 16");
    require(c.phantom_spacing_mm > 0.0, "phantom_spacing_mm must be positive");
    require(c.threads >= 1, "threads must be >= 1");
    require(c.poisson_tol > 0.0 && c.poisson_max_iter >= 1, "bad Poisson tolerances");
    require(c.roi_size_mm > 0.0, "roi_size_mm must be positive");
    require(c.beta1_mm >= 0.0, "beta1_mm must be >= 0");
    require(c.beta2 >= 1, "beta2 must be >= 1");
    require(c.textons >= 1, "textons must be >= 1");
    require(c.texton_edge == 3, "texton_edge must be 3");
    require(c.subregions == 36, "subregions must be 36");
    require(c.patches_per_roi >= 1 && c.max_patches >= c.textons, "bad patch sampling limits");
    require(c.n_ltp >= 1, "n_ltp must be >= 1");
    require(c.kmeans_restarts >= 1, "kmeans_restarts must be >= 1");
    require(c.lambda_points >= 1 && c.lambda_max >= 0.0, "bad lambda grid");
    require(c.lt > 0.0, "lt must be positive");
    require(c.max_sweeps >= 1, "max_sweeps must be >= 1");
    require(c.eta >= 0.0 && c.eta <= 1.0, "eta must be in [0, 1]");
    require(c.infomap_restarts >= 1, "infomap_restarts must be >= 1");
    require(c.density_nr >= 1 && c.density_niso >= 1 && c.density_grid_r >= 1 && c.density_grid_phi >= 1,
            "bad density grid");
    require(c.cv_folds >= 2, "cv_folds must be >= 2");
}

}  // namespace sltp
