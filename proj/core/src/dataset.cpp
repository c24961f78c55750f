#include "patchnet/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "patchnet/errors.hpp"

namespace patchnet::data {

using nlohmann::json;

std::size_t SnapshotDataset::record_count() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.records.size();
    return n;
}

void SnapshotDataset::validate() const {
    const auto& g = geometry;
    if (g.dim != 1 && g.dim != 2) throw InputError("dataset: dimension must be 1 or 2");
    if (g.x.size() != g.nx || (g.dim == 2 && g.y.size() != g.ny) || (g.dim == 1 && g.ny != 1))
        throw InputError("dataset: geometry coordinates do not match its shape");
    for (const auto& tr : trajectories) {
        for (std::size_t k = 0; k < tr.records.size(); ++k) {
            const auto& r = tr.records[k];
            if (r.u.size() != g.points() || r.dudt.size() != g.points())
                throw InputError("dataset: record shape does not match the geometry");
            if (k > 0 && !(r.t > tr.records[k - 1].t)) throw InputError("dataset: records are not time-ordered");
        }
    }
}

std::string format_double(double v) {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

namespace {

json geometry_json(const Geometry& g) {
    return {{"dim", g.dim}, {"nx", g.nx}, {"ny", g.ny}, {"x", g.x}, {"y", g.y},
            {"periodic", g.periodic}, {"dirichlet_ends", g.dirichlet_ends}};
}

Geometry geometry_from(const json& j) {
    Geometry g;
    g.dim = j.at("dim").get<std::size_t>();
    g.nx = j.at("nx").get<std::size_t>();
    g.ny = j.at("ny").get<std::size_t>();
    g.x = j.at("x").get<std::vector<double>>();
    g.y = j.at("y").get<std::vector<double>>();
    g.periodic = j.at("periodic").get<bool>();
    g.dirichlet_ends = j.at("dirichlet_ends").get<bool>();
    return g;
}

std::string header(std::size_t dim) {
    return dim == 1 ? "trajectory,t,i,x,U,dUdt" : "trajectory,t,i,j,x,y,U,dUdt";
}

template <class T>
T parse_field(std::string_view text, std::size_t line) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ParseError("cannot parse '" + std::string(text) + "'", line);
    return value;
}

}  // namespace

void write_dataset(const SnapshotDataset& dataset, const std::filesystem::path& csv_path,
                   const std::filesystem::path& meta_path) {
    dataset.validate();
    const auto& g = dataset.geometry;
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw InputError("cannot write " + csv_path.string());
    csv << header(g.dim) << '\n';
    std::string line;
    for (const auto& tr : dataset.trajectories) {
        const std::string traj = std::to_string(tr.index);
        for (const auto& r : tr.records) {
            const std::string t = format_double(r.t);
            for (std::size_t i = 0; i < g.nx; ++i) {
                for (std::size_t j = 0; j < g.ny; ++j) {
                    const std::size_t p = i * g.ny + j;
                    line = traj + ',' + t + ',' + std::to_string(i) + ',';
                    if (g.dim == 2) line += std::to_string(j) + ',';
                    line += format_double(g.x[i]) + ',';
                    if (g.dim == 2) line += format_double(g.y[j]) + ',';
                    line += format_double(r.u[p]) + ',' + format_double(r.dudt[p]) + '\n';
                    csv << line;
                }
            }
        }
    }
    if (!csv) throw InputError("failed writing " + csv_path.string());

    json meta = {{"format", "patchnet-snapshots"},
                 {"version", 1},
                 {"geometry", geometry_json(g)},
                 {"provenance",
                  {{"scheme", dataset.provenance.scheme},
                   {"config_hash", dataset.provenance.config_hash},
                   {"seed", dataset.provenance.seed}}},
                 {"trajectories", json::array()}};
    for (const auto& tr : dataset.trajectories)
        meta["trajectories"].push_back({{"index", tr.index}, {"seed", tr.seed}, {"records", tr.records.size()}});
    std::ofstream out(meta_path, std::ios::binary);
    if (!out) throw InputError("cannot write " + meta_path.string());
    out << meta.dump(2) << '\n';
}

SnapshotDataset read_dataset(const std::filesystem::path& csv_path, const std::filesystem::path& meta_path) {
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw InputError("cannot open " + meta_path.string());
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("dataset metadata: ") + e.what(), 0);
    }

    SnapshotDataset ds;
    try {
        ds.geometry = geometry_from(meta.at("geometry"));
        const auto& prov = meta.at("provenance");
        ds.provenance = {prov.at("scheme").get<std::string>(), prov.at("config_hash").get<std::string>(),
                         prov.at("seed").get<std::uint64_t>()};
        for (const auto& t : meta.at("trajectories")) {
            Trajectory tr;
            tr.index = t.at("index").get<std::size_t>();
            tr.seed = t.at("seed").get<std::uint64_t>();
            tr.records.resize(t.at("records").get<std::size_t>());
            ds.trajectories.push_back(std::move(tr));
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("dataset metadata: ") + e.what());
    }
    const auto& g = ds.geometry;
    const std::size_t columns = g.dim == 1 ? 6 : 8;

    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw InputError("cannot open " + csv_path.string());
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(csv, line) || line != header(g.dim)) throw ParseError("unexpected CSV header", 1);

    std::size_t traj = 0, rec = 0, point = 0;
    std::vector<std::string_view> fields;
    while (std::getline(csv, line)) {
        ++lineno;
        if (line.empty()) continue;
        fields.clear();
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            fields.push_back(rest.substr(0, pos));
        fields.push_back(rest);
        if (fields.size() != columns) throw ParseError("expected " + std::to_string(columns) + " columns", lineno);

        while (traj < ds.trajectories.size() && rec == ds.trajectories[traj].records.size()) {
            ++traj;
            rec = 0;
        }
        if (traj >= ds.trajectories.size()) throw ParseError("more rows than the metadata declares", lineno);
        auto& tr = ds.trajectories[traj];
        auto& r = tr.records[rec];
        if (parse_field<std::size_t>(fields[0], lineno) != tr.index) throw ParseError("unexpected trajectory index", lineno);
        const double t = parse_field<double>(fields[1], lineno);
        const std::size_t i = parse_field<std::size_t>(fields[2], lineno);
        const std::size_t j = g.dim == 2 ? parse_field<std::size_t>(fields[3], lineno) : 0;
        if (i * g.ny + j != point) throw ParseError("grid points out of order", lineno);
        if (point == 0) {
            r.t = t;
            r.u.resize(g.points());
            r.dudt.resize(g.points());
        } else if (t != r.t) {
            throw ParseError("time changes inside a snapshot", lineno);
        }
        r.u[point] = parse_field<double>(fields[columns - 2], lineno);
        r.dudt[point] = parse_field<double>(fields[columns - 1], lineno);
        if (++point == g.points()) {
            point = 0;
            ++rec;
        }
    }
    if (point != 0) throw ParseError("truncated snapshot at end of file", lineno);
    for (std::size_t k = traj; k < ds.trajectories.size(); ++k) {
        const std::size_t have = k == traj ? rec : 0;
        if (have != ds.trajectories[k].records.size()) throw ParseError("fewer rows than the metadata declares", lineno);
    }
    ds.validate();
    return ds;
}

}  // namespace patchnet::data
