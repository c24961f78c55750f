#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace patchnet::data {

// Macro grid shared by every record of a dataset. 1D: ny == 1 and `y` empty.
struct Geometry {
    std::size_t dim = 1;
    std::size_t nx = 0;
    std::size_t ny = 1;
    std::vector<double> x;
    std::vector<double> y;
    bool periodic = false;
    // 1D Dirichlet problems: first and last nodes are fixed boundary values.
    bool dirichlet_ends = false;

    std::size_t points() const { return nx * ny; }
    bool operator==(const Geometry&) const = default;
};

struct Record {
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> dudt;

    bool operator==(const Record&) const = default;
};

struct Trajectory {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<Record> records;

    bool operator==(const Trajectory&) const = default;
};

struct Provenance {
    std::string scheme;
    std::string config_hash;
    std::uint64_t seed = 0;

    bool operator==(const Provenance&) const = default;
};

struct SnapshotDataset {
    Geometry geometry;
    Provenance provenance;
    std::vector<Trajectory> trajectories;

    std::size_t record_count() const;
    // Throws InputError on inconsistent shapes or unordered times.
    void validate() const;
    bool operator==(const SnapshotDataset&) const = default;
};

// CSV body plus a JSON sidecar holding geometry and provenance. Values are
// written with 17 significant digits, so reading back is bit-exact.
void write_dataset(const SnapshotDataset& dataset, const std::filesystem::path& csv_path,
                   const std::filesystem::path& meta_path);
SnapshotDataset read_dataset(const std::filesystem::path& csv_path, const std::filesystem::path& meta_path);

std::string format_double(double v);

}  // namespace patchnet::data
