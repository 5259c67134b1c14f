#pragma once
// File I/O: particle-set CSV (header z0..z{dim-1}), atomic writes, and
// JSON serialization of reports.

#include "fairbads/data.hpp"
#include "fairbads/metrics.hpp"
#include "fairbads/particles.hpp"
#include "fairbads/theory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fairbads {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// temp file + rename, so interrupted runs never leave truncated output
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

inline std::string particle_csv(const ParticleSet& ps) {
    std::ostringstream os;
    os.precision(17);
    const auto dim = ps.dim();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (j) os << ',';
        os << 'z' << j;
    }
    os << '\n';
    for (const auto& z : ps.zs) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (j) os << ',';
            os << z[j];
        }
        os << '\n';
    }
    return os.str();
}

inline void write_particle_csv(const std::filesystem::path& path, const ParticleSet& ps) {
    atomic_write_file(path, particle_csv(ps));
}

inline ParticleSet read_particle_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open particle file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty particle file: " + path);
    const auto header = detail::split_csv_line(line);
    const int dim = static_cast<int>(header.size());
    for (int j = 0; j < dim; ++j) {
        if (detail::strip(header[static_cast<std::size_t>(j)]) != "z" + std::to_string(j)) {
            throw IoError(path + ": expected header z0..z" + std::to_string(dim - 1));
        }
    }
    ParticleSet ps;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::strip(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != dim) {
            throw IoError(path + ": row " + std::to_string(row) + " has " +
                          std::to_string(cells.size()) + " columns, expected " + std::to_string(dim));
        }
        Vec z(dim);
        for (int j = 0; j < dim; ++j) {
            const auto v = detail::parse_double(detail::strip(cells[static_cast<std::size_t>(j)]));
            if (!v) throw IoError(path + ": row " + std::to_string(row) + ": malformed value");
            z[j] = *v;
        }
        ps.zs.push_back(std::move(z));
    }
    if (ps.zs.empty()) throw IoError(path + ": no particles");
    return ps;
}

inline nlohmann::json to_json(const FairnessReport& rep) {
    nlohmann::json j;
    j["epoch"] = rep.epoch;
    j["acc"] = rep.acc;
    j["dp"] = rep.dp;
    j["ddp"] = rep.ddp;
    j["eo"] = rep.eo;
    j["w2_weights"] = rep.w2_weights;
    j["group_pos_rates"] = std::vector<double>(rep.group_pos_rates.data(),
                                               rep.group_pos_rates.data() + rep.group_pos_rates.size());
    j["group_tprs"] = std::vector<double>(rep.group_tprs.data(),
                                          rep.group_tprs.data() + rep.group_tprs.size());
    return j;
}

inline nlohmann::json to_json(const BoundReport& rep) {
    nlohmann::json j;
    j["name"] = rep.name;
    j["divergence"] = rep.divergence;
    j["status"] = to_string(rep.status);
    j["lhs"] = rep.lhs;
    j["rhs"] = rep.rhs;
    j["slack"] = rep.slack;
    j["constants"] = rep.constants;
    j["c_f"] = rep.c_f;
    j["k_eff"] = rep.k_eff;
    if (!rep.detail.empty()) j["detail"] = rep.detail;
    return j;
}

}  // namespace fairbads
