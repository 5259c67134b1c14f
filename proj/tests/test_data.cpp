#include "fairbads/data.hpp"

#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

using namespace fairbads;

namespace {

Dataset tiny_dataset(int per_group0, int per_group1, int positives0, int positives1) {
    Dataset ds;
    ds.d = 2;
    auto add = [&](int count, int positives, int group) {
        for (int i = 0; i < count; ++i) {
            LabeledExample e;
            e.x = Vec::Zero(2);
            e.x[0] = static_cast<double>(i);
            e.s = group;
            e.y = i < positives ? 1 : 0;
            e.y_clean = e.y;
            ds.examples.push_back(std::move(e));
        }
    };
    add(per_group0, positives0, 0);
    add(per_group1, positives1, 1);
    ds.recount_groups();
    return ds;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("load_dataset parses a small csv", "[data]") {
    oracle::TempDir dir("load");
    const auto file = dir.path() / "d.csv";
    write_file(file, "f0,f1,y,s\n1.0,2.0,1,0\n3.0,4.0,0,0\n5.5,6.5,1,1\n");
    const Dataset ds = load_dataset(file.string());
    REQUIRE(ds.d == 2);
    REQUIRE(ds.size() == 3);
    REQUIRE(ds.group_sizes == std::vector<int>{2, 1});
    REQUIRE(ds.n_max == 2);
    REQUIRE(ds.examples[2].x[1] == 6.5);
    REQUIRE(ds.examples[0].y_clean == 1);
}

TEST_CASE("load_dataset accepts CRLF and column reordering", "[data]") {
    oracle::TempDir dir("crlf");
    const auto file = dir.path() / "d.csv";
    write_file(file, "y,s,f0\r\n1,0,0.25\r\n0,1,-3.5\r\n");
    const Dataset ds = load_dataset(file.string());
    REQUIRE(ds.d == 1);
    REQUIRE(ds.examples[0].x[0] == 0.25);
    REQUIRE(ds.examples[1].s == 1);
}

TEST_CASE("load_dataset rejects bad input with located errors", "[data]") {
    oracle::TempDir dir("bad");

    const auto empty = dir.path() / "empty.csv";
    write_file(empty, "f0,y,s\n");
    REQUIRE_THROWS_WITH(load_dataset(empty.string()), Catch::Matchers::ContainsSubstring("no examples"));

    const auto bad_y = dir.path() / "bady.csv";
    write_file(bad_y, "f0,y,s\n1,1,0\n2,0,0\n3,1,1\n4,0,1\n5,2,0\n");
    REQUIRE_THROWS_WITH(load_dataset(bad_y.string()), Catch::Matchers::ContainsSubstring("row 5"));

    const auto missing = dir.path() / "miss.csv";
    write_file(missing, "f0,f1,s\n1,2,0\n");
    REQUIRE_THROWS_WITH(load_dataset(missing.string()), Catch::Matchers::ContainsSubstring("missing column 'y'"));

    const auto malformed = dir.path() / "malformed.csv";
    write_file(malformed, "f0,y,s\nabc,1,0\n");
    REQUIRE_THROWS_WITH(load_dataset(malformed.string()), Catch::Matchers::ContainsSubstring("column 'f0'"));

    const auto gap = dir.path() / "gap.csv";
    write_file(gap, "f0,f2,y,s\n1,2,1,0\n");
    REQUIRE_THROWS_WITH(load_dataset(gap.string()), Catch::Matchers::ContainsSubstring("missing column 'f1'"));
}

TEST_CASE("inject_label_bias degenerate rates", "[data]") {
    const Dataset ds = tiny_dataset(6, 5, 4, 3);

    const Dataset same = inject_label_bias(ds, 0.0, 1, 7);
    for (int i = 0; i < ds.size(); ++i) {
        REQUIRE(same.examples[static_cast<std::size_t>(i)].y ==
                ds.examples[static_cast<std::size_t>(i)].y);
    }

    const Dataset all = inject_label_bias(ds, 1.0, 1, 7);
    int group1_positives = 0;
    for (const auto& e : all.examples) {
        if (e.s == 1) group1_positives += e.y;
    }
    REQUIRE(group1_positives == 0);
}

TEST_CASE("inject_label_bias corrupts only observed labels in the target group", "[data]") {
    const Dataset ds = tiny_dataset(50, 40, 30, 25);
    const Dataset out = inject_label_bias(ds, 0.5, 0, 21);
    int flipped = 0;
    for (int i = 0; i < ds.size(); ++i) {
        const auto& before = ds.examples[static_cast<std::size_t>(i)];
        const auto& after = out.examples[static_cast<std::size_t>(i)];
        REQUIRE(after.y_clean == before.y_clean);
        REQUIRE(after.s == before.s);
        REQUIRE(after.x == before.x);
        if (before.s != 0) {
            REQUIRE(after.y == before.y);
        } else if (after.y != before.y) {
            REQUIRE(before.y_clean == 1);
            REQUIRE(after.y == 0);
            ++flipped;
        }
    }
    int pos_before = 0, pos_after = 0;
    for (int i = 0; i < ds.size(); ++i) {
        if (ds.examples[static_cast<std::size_t>(i)].s == 0) {
            pos_before += ds.examples[static_cast<std::size_t>(i)].y;
            pos_after += out.examples[static_cast<std::size_t>(i)].y;
        }
    }
    REQUIRE(pos_before - pos_after == flipped);
}

TEST_CASE("inject_label_bias flip count stays within the binomial band", "[data]") {
    // 1000 positives at rho = 0.4: mean 400, sigma = sqrt(1000 * 0.4 * 0.6) ~ 15.49;
    // the 3-sigma band is [354, 446].
    const Dataset ds = tiny_dataset(1000, 10, 1000, 5);
    const Dataset out = inject_label_bias(ds, 0.4, 0, 123);
    int flips = 0;
    for (int i = 0; i < ds.size(); ++i) {
        if (ds.examples[static_cast<std::size_t>(i)].s == 0 &&
            out.examples[static_cast<std::size_t>(i)].y == 0) {
            ++flips;
        }
    }
    REQUIRE(flips >= 354);
    REQUIRE(flips <= 446);

    const Dataset again = inject_label_bias(ds, 0.4, 0, 123);
    for (int i = 0; i < ds.size(); ++i) {
        REQUIRE(again.examples[static_cast<std::size_t>(i)].y ==
                out.examples[static_cast<std::size_t>(i)].y);
    }
}

TEST_CASE("carve_meta splits per the stated fractions", "[data]") {
    const Dataset ds200 = tiny_dataset(120, 80, 60, 40);
    const auto [train, meta] = carve_meta(ds200, 0.01, 3);
    REQUIRE(meta.size() == 2);
    REQUIRE(train.size() == 198);
    REQUIRE(train.group_sizes.size() == 2);
    REQUIRE(train.group_sizes[0] + train.group_sizes[1] == 198);
    REQUIRE(train.n_max == std::max(train.group_sizes[0], train.group_sizes[1]));

    const Dataset ds10 = tiny_dataset(5, 5, 3, 2);
    const auto [t5, m5] = carve_meta(ds10, 0.5, 3);
    REQUIRE(t5.size() == 5);
    REQUIRE(m5.size() == 5);
}

TEST_CASE("carve_meta is a deterministic exact partition with clean meta labels", "[data]") {
    Dataset ds = tiny_dataset(30, 20, 18, 12);
    // corrupt first so the meta set must restore clean labels
    ds = inject_label_bias(ds, 0.8, 1, 5);
    const auto [train_a, meta_a] = carve_meta(ds, 0.2, 11);
    const auto [train_b, meta_b] = carve_meta(ds, 0.2, 11);
    REQUIRE(train_a.size() == train_b.size());
    for (int i = 0; i < train_a.size(); ++i) {
        REQUIRE(train_a.examples[static_cast<std::size_t>(i)].x ==
                train_b.examples[static_cast<std::size_t>(i)].x);
    }
    for (const auto& m : meta_a.examples) REQUIRE(m.y == m.y_clean);

    // partition: multiset of x[0] values is preserved
    std::vector<double> all;
    for (const auto& e : ds.examples) all.push_back(e.x[0] + 100.0 * e.s);
    std::vector<double> split;
    for (const auto& e : train_a.examples) split.push_back(e.x[0] + 100.0 * e.s);
    for (const auto& e : meta_a.examples) split.push_back(e.x[0] + 100.0 * e.s);
    std::sort(all.begin(), all.end());
    std::sort(split.begin(), split.end());
    REQUIRE(all == split);
}

TEST_CASE("carve_meta rejects degenerate fractions", "[data]") {
    const Dataset ds = tiny_dataset(10, 10, 5, 5);
    REQUIRE_THROWS_AS(carve_meta(ds, 0.001, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(carve_meta(ds, 0.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(carve_meta(ds, 1.0, 1), std::invalid_argument);
}
