#include "sltp/volume.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

namespace sltp {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

ElementType parse_element_type(const std::string& s) {
    if (s == "FLOAT32" || s == "MET_FLOAT") return ElementType::Float32;
    if (s == "UINT8" || s == "MET_UCHAR") return ElementType::UInt8;
    throw IoError("unsupported element type: " + s);
}

std::size_t element_size(ElementType t) { return t == ElementType::Float32 ? 4 : 1; }

std::vector<char> read_payload(const VolumeHeader& h) {
    std::ifstream in(h.data_file, std::ios::binary);
    if (!in) throw IoError("cannot open raw payload: " + h.data_file.string());
    in.seekg(0, std::ios::end);
    const auto actual = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = h.dims.count() * element_size(h.type);
    if (actual != expected) {
        throw IoError("payload size mismatch for " + h.data_file.string() + ": expected " +
                      std::to_string(expected) + " bytes, found " + std::to_string(actual));
    }
    in.seekg(0, std::ios::beg);
    std::vector<char> bytes(expected);
    in.read(bytes.data(), static_cast<std::streamsize>(expected));
    if (!in) throw IoError("short read on " + h.data_file.string());
    return bytes;
}

std::vector<float> decode_float32(const std::vector<char>& bytes) {
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t w;
        std::memcpy(&w, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
        std::memcpy(&out[i], &w, 4);
    }
    return out;
}

void write_header(const fs::path& header_path, const Dims& d, const Spacing& s, const char* type,
                  const fs::path& raw_name) {
    std::ofstream out(header_path);
    if (!out) throw IoError("cannot write header: " + header_path.string());
    out.precision(17);
    out << "NDims = 3\n"
        << "DimSize = " << d.nx << ' ' << d.ny << ' ' << d.nz << '\n'
        << "ElementSpacing = " << s.sx << ' ' << s.sy << ' ' << s.sz << '\n'
        << "ElementType = " << type << '\n'
        << "ElementDataFile = " << raw_name.string() << '\n';
    if (!out) throw IoError("failed writing header: " + header_path.string());
}

void write_raw(const fs::path& raw_path, const char* bytes, std::size_t n) {
    std::ofstream out(raw_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write raw payload: " + raw_path.string());
    out.write(bytes, static_cast<std::streamsize>(n));
    if (!out) throw IoError("failed writing raw payload: " + raw_path.string());
}

fs::path raw_path_for(const fs::path& header_path) {
    auto p = header_path;
    p.replace_extension(".raw");
    return p;
}

}  // namespace

VolumeHeader read_header(const fs::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open header: " + header_path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError(std::string("header missing key ") + key);
        return it->second;
    };
    if (need("NDims") != "3") throw IoError("only NDims = 3 is supported");

    VolumeHeader h;
    {
        std::istringstream ss(need("DimSize"));
        if (!(ss >> h.dims.nx >> h.dims.ny >> h.dims.nz)) throw IoError("malformed DimSize");
    }
    {
        std::istringstream ss(need("ElementSpacing"));
        if (!(ss >> h.spacing.sx >> h.spacing.sy >> h.spacing.sz))
            throw IoError("malformed ElementSpacing");
    }
    if (h.dims.nx <= 0 || h.dims.ny <= 0 || h.dims.nz <= 0) throw IoError("DimSize must be positive");
    h.type = parse_element_type(need("ElementType"));
    h.data_file = header_path.parent_path() / need("ElementDataFile");
    return h;
}

Volume3D load_volume(const fs::path& header_path) {
    const auto h = read_header(header_path);
    const auto bytes = read_payload(h);
    if (h.type == ElementType::Float32) return Volume3D(h.dims, h.spacing, decode_float32(bytes));
    std::vector<float> data(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        data[i] = static_cast<float>(static_cast<std::uint8_t>(bytes[i]));
    return Volume3D(h.dims, h.spacing, std::move(data));
}

Mask3D load_mask(const fs::path& header_path) {
    const auto h = read_header(header_path);
    const auto bytes = read_payload(h);
    std::vector<std::uint8_t> data(h.dims.count());
    if (h.type == ElementType::UInt8) {
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = bytes[i] != 0 ? 1 : 0;
    } else {
        const auto f = decode_float32(bytes);
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = f[i] != 0.0f ? 1 : 0;
    }
    return Mask3D(h.dims, h.spacing, std::move(data));
}

void save_volume(const Volume3D& v, const fs::path& header_path) {
    const auto raw = raw_path_for(header_path);
    std::vector<char> bytes(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t w;
        std::memcpy(&w, &v[i], 4);
        if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
        std::memcpy(bytes.data() + 4 * i, &w, 4);
    }
    write_raw(raw, bytes.data(), bytes.size());
    write_header(header_path, v.dims(), v.spacing(), "FLOAT32", raw.filename());
}

void save_volume(const Mask3D& v, const fs::path& header_path) {
    const auto raw = raw_path_for(header_path);
    write_raw(raw, reinterpret_cast<const char*>(v.data().data()), v.size());
    write_header(header_path, v.dims(), v.spacing(), "UINT8", raw.filename());
}

std::size_t count_foreground(const Mask3D& m) {
    return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                  [](std::uint8_t b) { return b != 0; }));
}

Mask3D threshold_mask(const Volume3D& v, const Mask3D& lung, float threshold_hu) {
    if (v.dims() != lung.dims()) throw std::invalid_argument("threshold_mask: dims mismatch");
    Mask3D out(lung.dims(), lung.spacing());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (lung[i] && v[i] < threshold_hu) ? 1 : 0;
    return out;
}

double percent_emphysema(const Mask3D& emph, const Mask3D& region) {
    if (emph.dims() != region.dims()) throw std::invalid_argument("percent_emphysema: dims mismatch");
    std::size_t in_region = 0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (!region[i]) continue;
        ++in_region;
        if (emph[i]) ++hit;
    }
    if (in_region == 0) throw std::invalid_argument("percent_emphysema: empty region");
    return static_cast<double>(hit) / static_cast<double>(in_region);
}

double outside_air_shift(const Volume3D& v, const Mask3D& air) {
    if (v.dims() != air.dims()) throw std::invalid_argument("outside_air_shift: dims mismatch");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!air[i]) continue;
        sum += v[i];
        ++n;
    }
    if (n == 0) throw std::invalid_argument("outside_air_shift: empty air mask");
    return -1000.0 - sum / static_cast<double>(n);
}

Volume3D apply_shift(const Volume3D& v, double shift_hu) {
    Volume3D out = v;
    for (auto& x : out.data()) x = static_cast<float>(x + shift_hu);
    return out;
}

Components connected_components(const Mask3D& m) {
    const auto& d = m.dims();
    Volume<std::int32_t> raw(d, m.spacing(), 0);
    std::vector<std::size_t> sizes;
    std::queue<std::size_t> q;
    std::int32_t next = 0;
    for (std::size_t start = 0; start < m.size(); ++start) {
        if (!m[start] || raw[start] != 0) continue;
        ++next;
        std::size_t count = 0;
        raw[start] = next;
        q.push(start);
        while (!q.empty()) {
            const auto cur = q.front();
            q.pop();
            ++count;
            const auto v = m.voxel(cur);
            const std::int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                            {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
            for (const auto& o : off) {
                const std::int64_t x = v.x + o[0], y = v.y + o[1], z = v.z + o[2];
                if (!m.contains(x, y, z)) continue;
                const auto ni = m.index(x, y, z);
                if (m[ni] && raw[ni] == 0) {
                    raw[ni] = next;
                    q.push(ni);
                }
            }
        }
        sizes.push_back(count);
    }
    // Relabel so that component 1 is the largest; ties keep discovery order.
    std::vector<std::size_t> order(sizes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    std::vector<std::int32_t> remap(sizes.size() + 1, 0);
    Components out{Volume<std::int32_t>(d, m.spacing(), 0), {}};
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        remap[order[rank] + 1] = static_cast<std::int32_t>(rank + 1);
        out.sizes.push_back(sizes[order[rank]]);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) out.labels[i] = remap[raw[i]];
    return out;
}

}  // namespace sltp
