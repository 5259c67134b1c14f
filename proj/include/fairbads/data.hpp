#pragma once
// Dataset ingestion, group partitioning, meta-set carving, and
// group-dependent label-bias injection. All operations are pure.

#include "fairbads/common.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fairbads {

struct LabeledExample {
    Vec x;
    int y = 0;        // observed (possibly corrupted) label
    int s = 0;        // sensitive group index
    int y_clean = 0;  // label before corruption, kept for auditing
};

struct Dataset {
    std::vector<LabeledExample> examples;
    int d = 0;
    std::vector<int> group_sizes;
    int n_max = 0;

    int group_count() const { return static_cast<int>(group_sizes.size()); }
    int size() const { return static_cast<int>(examples.size()); }

    void recount_groups() {
        int max_s = -1;
        for (const auto& e : examples) max_s = std::max(max_s, e.s);
        group_sizes.assign(static_cast<std::size_t>(max_s + 1), 0);
        for (const auto& e : examples) ++group_sizes[static_cast<std::size_t>(e.s)];
        n_max = group_sizes.empty() ? 0 : *std::max_element(group_sizes.begin(), group_sizes.end());
    }
};

struct MetaSet {
    std::vector<LabeledExample> examples;
    // optional per-example probability row (P(y=0), P(y=1))
    std::optional<Mat> soft_labels;

    int size() const { return static_cast<int>(examples.size()); }
};

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvSchema {
    std::string feature_prefix = "f";
    std::string label_column = "y";
    std::string group_column = "s";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::string strip(std::string v) {
    while (!v.empty() && (v.back() == '\r' || v.back() == ' ' || v.back() == '\t')) v.pop_back();
    std::size_t i = 0;
    while (i < v.size() && (v[i] == ' ' || v[i] == '\t')) ++i;
    return v.substr(i);
}

inline std::optional<double> parse_double(const std::string& v) {
    double out = 0.0;
    const char* begin = v.data();
    const char* end = v.data() + v.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return out;
}

}  // namespace detail

// CSV with header columns f0..f{d-1}, y, s (any column order).
inline Dataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw LoadError("empty file: " + path);

    const auto header = detail::split_csv_line(line);
    std::vector<int> feature_cols;  // column index per feature f0..f{d-1}
    int y_col = -1;
    int s_col = -1;
    {
        std::vector<std::pair<int, int>> features;  // (feature index, column)
        for (std::size_t c = 0; c < header.size(); ++c) {
            const std::string name = detail::strip(header[c]);
            if (name == schema.label_column) {
                y_col = static_cast<int>(c);
            } else if (name == schema.group_column) {
                s_col = static_cast<int>(c);
            } else if (name.rfind(schema.feature_prefix, 0) == 0) {
                const std::string idx = name.substr(schema.feature_prefix.size());
                const auto parsed = detail::parse_double(idx);
                if (!parsed || *parsed != std::floor(*parsed) || *parsed < 0) {
                    throw LoadError("unrecognized column '" + name + "'");
                }
                features.emplace_back(static_cast<int>(*parsed), static_cast<int>(c));
            } else {
                throw LoadError("unrecognized column '" + name + "'");
            }
        }
        if (y_col < 0) throw LoadError("missing column '" + schema.label_column + "'");
        if (s_col < 0) throw LoadError("missing column '" + schema.group_column + "'");
        if (features.empty()) throw LoadError("no feature columns");
        std::sort(features.begin(), features.end());
        feature_cols.resize(features.size(), -1);
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (features[i].first != static_cast<int>(i)) {
                throw LoadError("missing column '" + schema.feature_prefix + std::to_string(i) + "'");
            }
            feature_cols[i] = features[i].second;
        }
    }
    const int d = static_cast<int>(feature_cols.size());

    Dataset ds;
    ds.d = d;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (detail::strip(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw LoadError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()));
        }
        LabeledExample e;
        e.x.resize(d);
        for (int j = 0; j < d; ++j) {
            const auto v = detail::parse_double(detail::strip(cells[static_cast<std::size_t>(feature_cols[j])]));
            if (!v || !std::isfinite(*v)) {
                throw LoadError("row " + std::to_string(row) + ": malformed value in column '" +
                                schema.feature_prefix + std::to_string(j) + "'");
            }
            e.x[j] = *v;
        }
        const auto yv = detail::parse_double(detail::strip(cells[static_cast<std::size_t>(y_col)]));
        if (!yv || (*yv != 0.0 && *yv != 1.0)) {
            throw LoadError("row " + std::to_string(row) + ": column '" + schema.label_column +
                            "' must be 0 or 1");
        }
        const auto sv = detail::parse_double(detail::strip(cells[static_cast<std::size_t>(s_col)]));
        if (!sv || *sv != std::floor(*sv) || *sv < 0) {
            throw LoadError("row " + std::to_string(row) + ": column '" + schema.group_column +
                            "' must be a nonnegative integer");
        }
        e.y = static_cast<int>(*yv);
        e.y_clean = e.y;
        e.s = static_cast<int>(*sv);
        ds.examples.push_back(std::move(e));
    }
    if (ds.examples.empty()) throw LoadError("no examples");
    ds.recount_groups();
    return ds;
}

// With probability rho, flips y of target-group examples whose clean label
// is 1 down to 0 (the group-prejudice direction). symmetric additionally
// flips clean 0s up with the same probability.
inline Dataset inject_label_bias(const Dataset& ds, double rho, int target_group,
                                 std::uint64_t rng_seed, bool symmetric = false) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("bias amount must be in [0, 1]");
    if (target_group < 0 || target_group >= ds.group_count()) {
        throw std::invalid_argument("target group out of range");
    }
    Dataset out = ds;
    Rng rng(rng_seed, "inject_label_bias");
    for (auto& e : out.examples) {
        if (e.s != target_group) continue;
        if (e.y_clean == 1) {
            e.y = rng.bernoulli(rho) ? 0 : 1;
        } else if (symmetric) {
            e.y = rng.bernoulli(rho) ? 1 : 0;
        }
    }
    return out;
}

// Reserves round(fraction * N) examples as a meta set; meta labels are the
// clean ones, so the carved set is fair by construction.
inline std::pair<Dataset, MetaSet> carve_meta(const Dataset& ds, double fraction,
                                              std::uint64_t rng_seed) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw std::invalid_argument("meta fraction must be in (0, 1)");
    }
    const int n = ds.size();
    const int n_meta = static_cast<int>(std::llround(fraction * n));
    if (n_meta == 0) throw std::invalid_argument("meta fraction yields an empty meta set");
    if (n_meta >= n) throw std::invalid_argument("meta fraction leaves no training data");

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(rng_seed, "carve_meta");
    for (int i = n - 1; i > 0; --i) {
        const auto j = rng.below(static_cast<std::size_t>(i) + 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    std::vector<char> in_meta(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n_meta; ++i) in_meta[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;

    Dataset train;
    train.d = ds.d;
    MetaSet meta;
    for (int i = 0; i < n; ++i) {
        const auto& e = ds.examples[static_cast<std::size_t>(i)];
        if (in_meta[static_cast<std::size_t>(i)]) {
            LabeledExample m = e;
            m.y = m.y_clean;
            meta.examples.push_back(std::move(m));
        } else {
            train.examples.push_back(e);
        }
    }
    train.recount_groups();
    return {std::move(train), std::move(meta)};
}

}  // namespace fairbads
