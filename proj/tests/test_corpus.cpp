#include "doctest.h"

#include <cmath>
#include <set>

#include "harmony/corpus.hpp"
#include "harmony/error.hpp"
#include "support.hpp"

using namespace harmony;

#ifndef HARMONY_DATA_DIR
#define HARMONY_DATA_DIR "data"
#endif

TEST_CASE("manifest parsing and counts") {
    const Manifest empty = parse_manifest("harmony-manifest 1\n", ".", false);
    CHECK(total_count(stats(empty)) == 0);

    const std::string text =
        "# comment\nharmony-manifest 1\nseed 42\nsplit train 3\n"
        "source train a.png a_l.png\nsource train b.png b_l.png  # trailing\nsource train c.png c_l.png\n"
        "source val d.png d_l.png\n";
    const Manifest m = parse_manifest(text, "/base", false);
    CHECK(m.seed == 42);
    CHECK(m.sources.size() == 4);
    CHECK(m.resolve("a.png") == "/base/a.png");
    const auto counts = stats(m);
    REQUIRE(counts.size() == 2);
    CHECK(counts[0].split == "train");
    CHECK(counts[0].count() == 3);
    CHECK(counts[1].split == "val");
    CHECK(counts[1].count() == 1);
    CHECK(total_count(counts) == 4);

    const Manifest again = parse_manifest(format_manifest(m), "/base", false);
    CHECK(format_manifest(again) == format_manifest(m));
}

TEST_CASE("manifest errors") {
    CHECK_THROWS_AS(load_manifest("/no/such/manifest.txt"), Error);
    try {
        parse_manifest("seed 1\n", ".", false);
        FAIL("missing header accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaMismatch);
    }
    CHECK_THROWS_AS(parse_manifest("harmony-manifest 2\n", ".", false), Error);
    CHECK_THROWS_AS(parse_manifest("harmony-manifest 1\nsplit train 2\nsource train a b\n", ".", false), Error);
    CHECK_THROWS_AS(parse_manifest("harmony-manifest 1\nbogus line\n", ".", false), Error);
    try {
        parse_manifest("harmony-manifest 1\nsource train nope.png nope_l.png\n", "/tmp", true);
        FAIL("dangling path accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DanglingPath);
    }
}

TEST_CASE("benchmark stub manifests report the published split sizes") {
    const auto hscene = stats(load_manifest(std::string(HARMONY_DATA_DIR) + "/manifests/hscene.txt"));
    REQUIRE(hscene.size() == 2);
    CHECK(hscene[0].count() == 20196);
    CHECK(hscene[1].count() == 2000);
    const auto hlip = stats(load_manifest(std::string(HARMONY_DATA_DIR) + "/manifests/hlip.txt"));
    CHECK(hlip[0].count() == 30385);
    CHECK(hlip[1].count() == 9972);
}

TEST_CASE("label PNG decoding") {
    testsupport::TempDir dir("lbl");
    GrayRaster zeros{4, 4, std::vector<unsigned char>(16, 0)};
    save_gray_png(zeros, dir / "z.png");
    CHECK(decode_label_png(dir / "z.png").foreground_classes().empty());
    GrayRaster two = zeros;
    two.values[5] = 7;
    two.values[6] = 7;
    save_gray_png(two, dir / "t.png");
    CHECK(decode_label_png(dir / "t.png").foreground_classes() == std::vector<int>{7});
}

TEST_CASE("procedural corpus contract") {
    const auto corpus = gen_procedural_corpus(12, 96, 96, 5);
    REQUIRE(corpus.size() == 12);
    std::set<std::string> ids;
    for (const auto& item : corpus) {
        ids.insert(item.id);
        const auto classes = item.labels.foreground_classes();
        CHECK(classes.size() >= 4);
        CHECK(classes.size() <= 12);
        for (int c : classes) {
            CHECK(c >= 1);
            CHECK(c <= 150);
            CHECK(item.labels.area(c) >= static_cast<std::size_t>(std::ceil(0.005 * 96 * 96)));
        }
        CHECK(item.labels.area(0) > 0);
        CHECK(quantize_8bit(item.image) == item.image);
        // Textured, not flat: every region has some spread in L.
        for (int c : classes) CHECK(region_stats(item.image, item.labels.mask_for(c)).stddev[0] > 0.1);
    }
    CHECK(ids.size() == 12);

    const auto again = gen_procedural_corpus(3, 96, 96, 5);
    CHECK(again[2].image == corpus[2].image);
    CHECK(again[2].labels == corpus[2].labels);
    CHECK(gen_procedural_item(7, 96, 96, 5).image == corpus[7].image);
    CHECK(!(gen_procedural_item(0, 96, 96, 6).image == corpus[0].image));
}

TEST_CASE("sample persistence round trip") {
    const CorpusItem item = gen_procedural_item(0, 64, 64, 9);
    const PerturbConfig cfg;
    testsupport::TempDir dir("persist");
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        BenchmarkSample s = make_composite(item.image, item.labels, cfg, seed);
        s.id = "s" + std::to_string(seed);
        persist_sample(s, dir.str());
        const BenchmarkSample back = load_sample(dir.str(), s.id);
        CHECK(back.records == s.records);
        CHECK(back.labels == s.labels);
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < s.composite.pixel_count(); ++i) {
                CHECK(std::abs(back.composite.plane(c)[i] - s.composite.plane(c)[i]) <= 0.5f / 255.0f + 1e-6f);
            }
        }
        const auto [real, comp] = replay_records(item.image, item.labels, back.records, cfg);
        CHECK(quantize_8bit(comp) == back.composite);
        CHECK(quantize_8bit(real) == back.real);
        const auto regions = regions_from_records(back.labels, back.records);
        CHECK(regions.size() == back.records.size());
    }
    CHECK(list_samples(dir.str()).size() == 6);
    CHECK(list_samples(dir.str()).front() == "s0");
    CHECK_THROWS_AS(load_sample(dir.str(), "missing"), Error);
    CHECK_THROWS_AS(records_from_json(nlohmann::json{{"schema", "other/1"}, {"records", nlohmann::json::array()}}),
                    Error);
}
