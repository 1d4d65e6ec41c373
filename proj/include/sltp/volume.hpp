// Volume and mask containers, MetaImage-style I/O, and simple intensity
// operations on lung CT volumes.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sltp {

struct Dims {
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    std::int64_t nz = 0;

    std::size_t count() const { return static_cast<std::size_t>(nx * ny * nz); }
    bool operator==(const Dims&) const = default;
};

/// Physical voxel size in mm.
struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool operator==(const Spacing&) const = default;
};

struct Voxel {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;

    bool operator==(const Voxel&) const = default;
};

/// Dense 3D grid stored x-fastest, then y, then z. Axial slices are planes of
/// constant z, with z = 0 at the apex.
template <class T>
class Volume {
public:
    using value_type = T;

    Volume() = default;

    Volume(Dims dims, Spacing spacing, T fill = T{})
        : dims_(dims), spacing_(spacing) {
        validate();
        data_.assign(dims_.count(), fill);
    }

    Volume(Dims dims, Spacing spacing, std::vector<T> data)
        : dims_(dims), spacing_(spacing), data_(std::move(data)) {
        validate();
        if (data_.size() != dims_.count()) {
            throw std::invalid_argument("Volume: data length does not match dims");
        }
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return static_cast<std::size_t>(x + dims_.nx * (y + dims_.ny * z));
    }
    std::size_t index(const Voxel& v) const { return index(v.x, v.y, v.z); }

    Voxel voxel(std::size_t i) const {
        const auto ii = static_cast<std::int64_t>(i);
        return {ii % dims_.nx, (ii / dims_.nx) % dims_.ny, ii / (dims_.nx * dims_.ny)};
    }

    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
    }
    bool contains(const Voxel& v) const { return contains(v.x, v.y, v.z); }

    T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) { return data_[index(x, y, z)]; }
    const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return data_[index(x, y, z)];
    }
    T& operator()(const Voxel& v) { return data_[index(v)]; }
    const T& operator()(const Voxel& v) const { return data_[index(v)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    const std::vector<T>& values() const { return data_; }

    template <class U>
    bool same_grid(const Volume<U>& other) const {
        return dims_ == other.dims() && spacing_ == other.spacing();
    }

    bool operator==(const Volume&) const = default;

private:
    void validate() const {
        if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0) {
            throw std::invalid_argument("Volume: dims must be positive");
        }
        if (!(spacing_.sx > 0.0 && spacing_.sy > 0.0 && spacing_.sz > 0.0)) {
            throw std::invalid_argument("Volume: spacing must be positive");
        }
    }

    Dims dims_{};
    Spacing spacing_{};
    std::vector<T> data_;
};

using Volume3D = Volume<float>;
using Mask3D = Volume<std::uint8_t>;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ElementType { Float32, UInt8 };

struct VolumeHeader {
    Dims dims;
    Spacing spacing;
    ElementType type = ElementType::Float32;
    std::filesystem::path data_file;
};

VolumeHeader read_header(const std::filesystem::path& header_path);

/// Reads a header + raw payload. UINT8 payloads are widened to float.
Volume3D load_volume(const std::filesystem::path& header_path);
/// Reads a header + raw payload as a binary mask (nonzero -> 1).
Mask3D load_mask(const std::filesystem::path& header_path);

/// Writes `<path>` (text header) and `<stem>.raw` next to it.
void save_volume(const Volume3D& v, const std::filesystem::path& header_path);
void save_volume(const Mask3D& v, const std::filesystem::path& header_path);

std::size_t count_foreground(const Mask3D& m);

/// Lung voxels with intensity strictly below `threshold_hu`.
Mask3D threshold_mask(const Volume3D& v, const Mask3D& lung, float threshold_hu);

/// |emph ∩ region| / |region|.
double percent_emphysema(const Mask3D& emph, const Mask3D& region);

/// Additive shift that moves the mean intensity inside `air` to -1000 HU.
double outside_air_shift(const Volume3D& v, const Mask3D& air);
Volume3D apply_shift(const Volume3D& v, double shift_hu);

/// Reverses slice order (feet-first to head-first).
template <class T>
Volume<T> flip_z(const Volume<T>& v) {
    Volume<T> out(v.dims(), v.spacing());
    const auto& d = v.dims();
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) out(x, y, d.nz - 1 - z) = v(x, y, z);
    return out;
}

/// 6-connected components of a mask, largest first. Component ids start at 1.
struct Components {
    Volume<std::int32_t> labels;
    std::vector<std::size_t> sizes;  // sizes[i] = voxel count of component i+1
};
Components connected_components(const Mask3D& m);

}  // namespace sltp
