#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "panseg/reference.hpp"
#include "panseg/refine.hpp"
#include "panseg/rng.hpp"

using namespace panseg;

namespace {

OffsetField exact_offsets(const InstanceLabelMap& inst) {
    OffsetField off = OffsetField::zeros(inst.height, inst.width);
    for (const auto& rec : inst.records)
        for (int r = 0; r < inst.height; ++r)
            for (int c = 0; c < inst.width; ++c)
                if (inst.at(r, c) == rec.id) {
                    off.drow(r, c) = static_cast<float>(rec.centroid_row - r);
                    off.dcol(r, c) = static_cast<float>(rec.centroid_col - c);
                }
    return off;
}

InstanceLabelMap block_instance(int h, int w, int r0, int c0, int bh, int bw, uint32_t id,
                                InstanceLabelMap* base = nullptr) {
    InstanceLabelMap m = base ? *base : InstanceLabelMap::zeros(h, w);
    for (int r = r0; r < r0 + bh; ++r)
        for (int c = c0; c < c0 + bw; ++c) m.at(r, c) = id;
    rebuild_geometry(m);
    return m;
}

}  // namespace

TEST_CASE("predicted centers add offsets to positions") {
    InstanceLabelMap inst = InstanceLabelMap::zeros(20, 20);
    inst.at(10, 10) = 1;
    rebuild_geometry(inst);
    OffsetField off = OffsetField::zeros(20, 20);
    off.drow(10, 10) = 5.f;
    off.dcol(10, 10) = -3.f;
    auto pts = predicted_centers(inst, 1, off);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0][0] == doctest::Approx(15.0));
    CHECK(pts[0][1] == doctest::Approx(7.0));

    // zero offsets: centers are positions; exact offsets: centers = centroid
    InstanceLabelMap blk = block_instance(20, 20, 4, 4, 5, 5, 1);
    OffsetField zero = OffsetField::zeros(20, 20);
    auto raw = predicted_centers(blk, 1, zero);
    CHECK(raw.front()[0] == doctest::Approx(4.0));
    OffsetField exact = exact_offsets(blk);
    for (const auto& p : predicted_centers(blk, 1, exact)) {
        CHECK(p[0] == doctest::Approx(blk.records[0].centroid_row).epsilon(1e-5));
        CHECK(p[1] == doctest::Approx(blk.records[0].centroid_col).epsilon(1e-5));
    }
}

TEST_CASE("dbscan separates two distant blobs") {
    Rng rng(3);
    std::vector<Point2d> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(0, 5), rng.uniform(0, 5)});
    for (int i = 0; i < 20; ++i) pts.push_back({50 + rng.uniform(0, 5), rng.uniform(0, 5)});
    auto labels = dbscan(pts, 20.0, 5);
    int max_label = -1;
    for (int v : labels) {
        CHECK(v >= 0);  // no noise at this density
        max_label = std::max(max_label, v);
    }
    CHECK(max_label == 1);  // exactly two clusters
    for (int i = 1; i < 20; ++i) CHECK(labels[i] == labels[0]);
    for (int i = 21; i < 40; ++i) CHECK(labels[i] == labels[20]);
}

TEST_CASE("dbscan degenerate inputs") {
    CHECK(dbscan({}, 5.0, 3).empty());

    std::vector<Point2d> same(7, Point2d{3.0, 4.0});
    auto labels = dbscan(same, 1.0, 7);
    for (int v : labels) CHECK(v == 0);  // one cluster, no noise

    std::vector<Point2d> lonely = {{0.0, 0.0}};
    CHECK(dbscan(lonely, 5.0, 2) == std::vector<int>{-1});

    CHECK_THROWS_AS(dbscan(lonely, -1.0, 1), ValidationError);
    CHECK_THROWS_AS(dbscan(lonely, 1.0, 0), ValidationError);
}

TEST_CASE("dbscan matches the brute-force oracle on random point sets") {
    Rng rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(0, 199));
        std::vector<Point2d> pts(n);
        double spread = rng.uniform(10.0, 120.0);
        for (auto& p : pts) p = {rng.uniform(0, spread), rng.uniform(0, spread)};
        // duplicate-heavy variant now and then, like center regression output
        if (trial % 5 == 0)
            for (int i = n / 2; i < n; ++i) pts[i] = pts[i % (n / 2 + 1)];
        double eps = rng.uniform(2.0, 25.0);
        int min_samples = 1 + static_cast<int>(rng.uniform_int(0, 9));
        CHECK(dbscan(pts, eps, min_samples) ==
              reference::dbscan_brute(pts, eps, min_samples));
    }
}

TEST_CASE("split separates a merged blob whose halves predict distant centers") {
    // 10x40 blob: left half points to (5,2), right half to (5,52), 50 apart
    InstanceLabelMap inst = block_instance(20, 60, 0, 0, 10, 40, 1);
    OffsetField off = OffsetField::zeros(20, 60);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 40; ++c) {
            double cr = 5, cc = c < 20 ? 2 : 52;
            off.drow(r, c) = static_cast<float>(cr - r);
            off.dcol(r, c) = static_cast<float>(cc - c);
        }
    RefineParams params;
    InstanceLabelMap split = split_instances(inst, off, params);
    REQUIRE(split.records.size() == 2);
    // pixel partition follows the halves exactly
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 40; ++c)
            CHECK(split.at(r, c) == (c < 20 ? split.at(0, 0) : split.at(0, 39)));
    CHECK(split.at(0, 0) != split.at(0, 39));
    // fresh ids
    CHECK(split.at(0, 0) > 1);
}

TEST_CASE("split leaves tight or noise-only instances unchanged") {
    InstanceLabelMap inst = block_instance(30, 30, 5, 5, 8, 8, 1);
    OffsetField off = exact_offsets(inst);  // all centers within a pixel
    RefineParams params;
    InstanceLabelMap out = split_instances(inst, off, params);
    CHECK(out.ids == inst.ids);

    // centers scattered so widely nothing is core: noise-only, unchanged
    InstanceLabelMap small = block_instance(30, 30, 5, 5, 4, 4, 1);
    OffsetField wild = OffsetField::zeros(30, 30);
    Rng rng(5);
    for (int r = 5; r < 9; ++r)
        for (int c = 5; c < 9; ++c) {
            wild.drow(r, c) = static_cast<float>(rng.uniform(-300, 300));
            wild.dcol(r, c) = static_cast<float>(rng.uniform(-300, 300));
        }
    RefineParams strict;
    strict.min_samples = 5;
    InstanceLabelMap kept = split_instances(small, wild, strict);
    CHECK(kept.ids == small.ids);
}

TEST_CASE("merge joins fragments with nearby mean centers, strictly below the threshold") {
    InstanceLabelMap inst = InstanceLabelMap::zeros(30, 60);
    inst = block_instance(30, 60, 5, 5, 6, 6, 1, &inst);
    inst = block_instance(30, 60, 5, 20, 6, 6, 2, &inst);
    for (auto& rec : inst.records) rec.class_id = 3;

    OffsetField off = OffsetField::zeros(30, 60);
    RefineParams params;

    SUBCASE("mean centers 15 apart: merged") {
        // raw positions: centroids (7.5,7.5) and (7.5,22.5), distance 15 < 20
        InstanceLabelMap merged = merge_instances(inst, off, params);
        CHECK(merged.records.size() == 1);
        CHECK(merged.records[0].id == 1);  // smallest member id
        CHECK(merged.records[0].area == 72);
    }
    SUBCASE("mean centers exactly 20 apart: kept separate") {
        OffsetField stretch = OffsetField::zeros(30, 60);
        for (int r = 5; r < 11; ++r)
            for (int c = 20; c < 26; ++c) stretch.dcol(r, c) = 5.f;  // second centroid to 27.5
        InstanceLabelMap kept = merge_instances(inst, stretch, params);
        CHECK(kept.records.size() == 2);
    }
    SUBCASE("different classes are not merged by default") {
        inst.records[1].class_id = 4;
        InstanceLabelMap kept = merge_instances(inst, off, params);
        CHECK(kept.records.size() == 2);
        RefineParams cross;
        cross.merge_same_class_only = false;
        InstanceLabelMap merged = merge_instances(inst, off, cross);
        CHECK(merged.records.size() == 1);
    }
}

TEST_CASE("merge closes transitively over chains") {
    InstanceLabelMap inst = InstanceLabelMap::zeros(10, 60);
    inst = block_instance(10, 60, 2, 0, 4, 4, 1, &inst);
    inst = block_instance(10, 60, 2, 15, 4, 4, 2, &inst);
    inst = block_instance(10, 60, 2, 30, 4, 4, 3, &inst);
    for (auto& rec : inst.records) rec.class_id = 3;
    // centroid columns 1.5, 16.5, 31.5: A-B and B-C 15 apart, A-C 30 apart
    OffsetField off = OffsetField::zeros(10, 60);
    InstanceLabelMap merged = merge_instances(inst, off, {});
    CHECK(merged.records.size() == 1);
    CHECK(merged.records[0].id == 1);
}

TEST_CASE("merge is idempotent") {
    Rng rng(13);
    InstanceLabelMap inst = InstanceLabelMap::zeros(40, 80);
    uint32_t id = 1;
    for (int i = 0; i < 5; ++i) {
        int r0 = static_cast<int>(rng.uniform_int(0, 30)), c0 = static_cast<int>(rng.uniform_int(0, 70));
        inst = block_instance(40, 80, r0, c0, 6, 6, id, &inst);
        ++id;
    }
    rebuild_geometry(inst);
    for (auto& rec : inst.records) rec.class_id = 3;
    OffsetField off = OffsetField::zeros(40, 80);
    InstanceLabelMap once = merge_instances(inst, off, {});
    InstanceLabelMap twice = merge_instances(once, off, {});
    CHECK(once.ids == twice.ids);
    CHECK(once.records.size() == twice.records.size());
}

TEST_CASE("min-area filter dissolves fragments into the nearest survivor") {
    InstanceLabelMap inst = InstanceLabelMap::zeros(40, 40);
    inst = block_instance(40, 40, 5, 5, 20, 20, 1, &inst);   // area 400
    inst = block_instance(40, 40, 30, 30, 5, 6, 2, &inst);   // area 30
    for (auto& rec : inst.records) rec.class_id = 3;
    OffsetField off = exact_offsets(inst);
    RefineParams params;  // min_area 300
    InstanceLabelMap out = filter_min_area(inst, off, params);
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].id == 1);
    CHECK(out.records[0].area == 430);  // absorbed

    SUBCASE("min_area 1 removes nothing") {
        RefineParams keep;
        keep.min_area = 1;
        CHECK(filter_min_area(inst, off, keep).ids == inst.ids);
    }
}

TEST_CASE("min-area filter with no survivors voids everything") {
    InstanceLabelMap inst = InstanceLabelMap::zeros(20, 20);
    inst = block_instance(20, 20, 2, 2, 4, 4, 1, &inst);
    inst = block_instance(20, 20, 10, 10, 4, 4, 2, &inst);
    for (auto& rec : inst.records) rec.class_id = 3;
    OffsetField off = OffsetField::zeros(20, 20);
    InstanceLabelMap out = filter_min_area(inst, off, {});
    CHECK(out.records.empty());
    for (uint32_t v : out.ids) CHECK(v == 0);
}

TEST_CASE("pixel conservation and identity on exact instances") {
    Rng rng(29);
    InstanceLabelMap inst = InstanceLabelMap::zeros(120, 160);
    // well-separated blocks, all above min_area
    inst = block_instance(120, 160, 5, 5, 22, 22, 1, &inst);
    inst = block_instance(120, 160, 60, 10, 25, 20, 2, &inst);
    inst = block_instance(120, 160, 20, 100, 20, 25, 3, &inst);
    inst = block_instance(120, 160, 80, 110, 22, 24, 4, &inst);
    for (auto& rec : inst.records) rec.class_id = 3 + (rec.id % 2);
    OffsetField off = exact_offsets(inst);

    InstanceLabelMap refined = refine_instances(inst, off, {});
    // split then merge with exact offsets on exact instances is the identity
    CHECK(refined.ids == inst.ids);
    REQUIRE(refined.records.size() == inst.records.size());
    for (size_t i = 0; i < refined.records.size(); ++i) {
        CHECK(refined.records[i].area == inst.records[i].area);
        CHECK(refined.records[i].centroid_row ==
              doctest::Approx(inst.records[i].centroid_row).epsilon(1e-9));
    }
    CHECK_NOTHROW(validate(refined));

    // conservation: labeled set never grows across split/merge
    auto labeled = [](const InstanceLabelMap& m) {
        size_t n = 0;
        for (uint32_t v : m.ids) n += v != 0;
        return n;
    };
    RefineParams aggressive;
    aggressive.min_samples = 3;
    aggressive.eps = 6.0;
    OffsetField noisy = off;
    for (auto& v : noisy.offsets) v += static_cast<float>(rng.uniform(-4.0, 4.0));
    InstanceLabelMap s = split_instances(inst, noisy, aggressive);
    CHECK(labeled(s) == labeled(inst));
    InstanceLabelMap m2 = merge_instances(s, noisy, aggressive);
    CHECK(labeled(m2) == labeled(s));
    CHECK_NOTHROW(validate(m2));
}
