#include "doctest.h"

#include <cmath>
#include <set>

#include "harmony/error.hpp"
#include "harmony/perturb.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

bool same_outside(const ImageBuf& a, const ImageBuf& b, const RegionMask& mask) {
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i] && a.plane(c)[i] != b.plane(c)[i]) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("default filter bank") {
    const auto& banks = default_filter_banks();
    CHECK(banks.filters.size() == 23);
    CHECK(banks.css.size() == 6);
    CHECK(banks.filters.contains("clarendon"));
    CHECK_THROWS_AS(banks.filters.find("no-such-filter"), Error);
    const auto reparsed = parse_filter_banks(nlohmann::json::parse(default_filter_bank_json()));
    CHECK(reparsed.filters.chains() == banks.filters.chains());
    CHECK(parse_filter_banks(nlohmann::json{{"filters", filter_bank_to_json(banks.filters)}}).filters.chains() ==
          banks.filters.chains());
}

TEST_CASE("filter bank validation") {
    const auto bad_kind = nlohmann::json::parse(R"({"filters":[{"name":"x","steps":[{"op":"blur","params":[1]}]}]})");
    CHECK_THROWS_AS(parse_filter_banks(bad_kind), Error);
    const auto bad_param =
        nlohmann::json::parse(R"({"filters":[{"name":"x","steps":[{"op":"brightness","params":[-1]}]}]})");
    CHECK_THROWS_AS(parse_filter_banks(bad_param), Error);
    const auto dup = nlohmann::json::parse(
        R"({"filters":[{"name":"x","steps":[{"op":"gamma","params":[1]}]},{"name":"x","steps":[{"op":"gamma","params":[2]}]}]})");
    CHECK_THROWS_AS(parse_filter_banks(dup), Error);
}

TEST_CASE("primitive identities") {
    const std::array<float, 3> px{0.2f, 0.5f, 0.7f};
    for (const FilterPrimitive p : {FilterPrimitive{FilterKind::Brightness, {1.0}},
                                    FilterPrimitive{FilterKind::Contrast, {1.0}},
                                    FilterPrimitive{FilterKind::Saturate, {1.0}},
                                    FilterPrimitive{FilterKind::HueRotate, {0.0}},
                                    FilterPrimitive{FilterKind::Sepia, {0.0}},
                                    FilterPrimitive{FilterKind::Gamma, {1.0}},
                                    FilterPrimitive{FilterKind::ChannelCurve, {1, 1, 1, 0, 0, 0}},
                                    FilterPrimitive{FilterKind::ColorOverlay, {1, 0, 0, 0}}}) {
        const auto out = p.apply(px);
        for (int c = 0; c < 3; ++c) CHECK(out[c] == doctest::Approx(px[c]).epsilon(1e-6));
    }
    const auto sepia = sepia_matrix(1.0);
    CHECK(sepia[0][0] == doctest::Approx(0.393));
    CHECK(sepia[2][2] == doctest::Approx(0.131));
    const auto grey = FilterPrimitive{FilterKind::Saturate, {0.0}}.apply(px);
    CHECK(grey[0] == doctest::Approx(grey[2]).epsilon(1e-6));
    const auto bright = FilterPrimitive{FilterKind::Brightness, {3.0}}.apply(px);
    CHECK(bright[2] == 1.0f);
}

TEST_CASE("region selection draws floor(K/5)+1 distinct classes") {
    CHECK(region_count_for(1) == 1);
    CHECK(region_count_for(4) == 1);
    CHECK(region_count_for(5) == 2);
    CHECK(region_count_for(12) == 3);

    LabelMap labels(12, 1);
    for (int i = 0; i < 12; ++i) labels.set(i, 0, i < 2 ? 0 : 10 + i);  // 10 classes
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto picked = select_regions(labels, rng);
        CHECK(picked.size() == 3);
        std::set<int> distinct;
        for (const auto& r : picked) {
            distinct.insert(r.label);
            CHECK(r.mask == labels.mask_for(r.label));
        }
        CHECK(distinct.size() == 3);
    }
    Rng rng(1);
    CHECK_THROWS_AS(select_regions(LabelMap(4, 4), rng), Error);
}

TEST_CASE("chains only touch the masked region") {
    const ImageBuf img = testsupport::random_image(16, 16, 2);
    const LabelMap labels = testsupport::quadrant_labels(16, 16);
    const RegionMask mask = labels.mask_for(3);
    const auto& bank = default_filter_banks().filters;
    for (const auto& chain : bank.chains()) {
        const ImageBuf out = apply_filter_chain(img, mask, chain);
        CHECK(same_outside(out, img, mask));
    }
    CHECK_THROWS_AS(apply_filter_chain(img, mask, "missing", bank), Error);
}

TEST_CASE("LAB scaling") {
    const ImageBuf img = testsupport::random_image(16, 16, 3, 0.3f, 0.7f);
    const RegionMask mask = testsupport::quadrant_labels(16, 16).mask_for(9);
    const ImageBuf same = apply_lab_scale(img, mask, {1.0, 1.0, 1.0});
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < img.pixel_count(); ++i) CHECK(std::abs(same.plane(c)[i] - img.plane(c)[i]) < 1e-4);
    }
    const ImageBuf dark = apply_lab_scale(img, mask, {0.8, 1.0, 1.0});
    CHECK(same_outside(dark, img, mask));
    const ImageBuf lab0 = srgb_to_lab(img), lab1 = srgb_to_lab(dark);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) CHECK(lab1.plane(0)[i] == doctest::Approx(0.8 * lab0.plane(0)[i]).epsilon(1e-3));
    }
    CHECK(!lab_scale_clamps(img, mask, {1.0, 1.0, 1.0}));
    CHECK(lab_scale_clamps(img, mask, {3.0, 1.0, 1.0}));
}

TEST_CASE("blur/noise degrades both images with one realization") {
    const ImageBuf img = testsupport::random_image(24, 24, 4, 0.2f, 0.8f);
    const RegionMask mask = testsupport::quadrant_labels(24, 24).mask_for(7);
    const NoiseSpec specs[] = {{NoiseKind::Gaussian, {0.05}},
                               {NoiseKind::Laplace, {0.03}},
                               {NoiseKind::Poisson, {50}},
                               {NoiseKind::MotionBlur, {5, 30}},
                               {NoiseKind::Jpeg, {20}}};
    for (const auto& spec : specs) {
        CAPTURE(to_string(spec.kind));
        const auto [real, comp] = apply_blur_noise(img, img, mask, spec, 77);
        CHECK(!(real == img));
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (mask[i]) {
                    CHECK(comp.plane(c)[i] == img.plane(c)[i]);
                } else {
                    CHECK(comp.plane(c)[i] == real.plane(c)[i]);
                }
            }
        }
        const auto again = apply_blur_noise(img, img, mask, spec, 77);
        CHECK(again.first == real);
    }
    const auto [id_real, id_comp] = apply_blur_noise(img, img, mask, {NoiseKind::MotionBlur, {1, 0}}, 1);
    CHECK(id_real == img);
    (void)id_comp;
}

TEST_CASE("composites are reproducible and replayable") {
    const ImageBuf img = quantize_8bit(testsupport::random_image(32, 32, 8));
    const LabelMap labels = testsupport::quadrant_labels(32, 32);
    const PerturbConfig cfg;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const BenchmarkSample a = make_composite(img, labels, cfg, seed);
        const BenchmarkSample b = make_composite(img, labels, cfg, seed);
        CHECK(a.composite == b.composite);
        CHECK(a.records == b.records);
        CHECK(a.records.size() == 1);
        const auto [real, comp] = replay_records(img, labels, a.records, cfg);
        CHECK(real == a.real);
        CHECK(comp == a.composite);
        for (const auto& r : a.records) CHECK(record_from_json(record_to_json(r)) == r);
    }
}

TEST_CASE("record JSON validation") {
    PerturbRecord r;
    r.region_label = 4;
    r.payload = LabScalePayload{{0.9, 1.1, 1.0}};
    auto j = record_to_json(r);
    CHECK(record_from_json(j) == r);
    j["chain"] = "clarendon";
    CHECK_THROWS_AS(record_from_json(j), Error);
    auto neg = record_to_json(r);
    neg["multipliers"] = {1.0, -1.0, 1.0};
    CHECK_THROWS_AS(record_from_json(neg), Error);
}

TEST_CASE("perturb config") {
    PerturbConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.css_probability == 0.5);
    const PerturbConfig back = perturb_config_from_json(perturb_config_to_json(cfg));
    CHECK(back.filter_bank.chains() == cfg.filter_bank.chains());
    CHECK(back.method_weights == cfg.method_weights);
    CHECK(back.lab_scale_range == cfg.lab_scale_range);

    cfg.css_probability = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = PerturbConfig{};
    cfg.method_weights = {0, 0, 0};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = PerturbConfig{};
    cfg.lab_scale_range[1] = {0.0, 1.0};
    CHECK_THROWS_AS(cfg.validate(), Error);

    testsupport::TempDir dir("cfg");
    {
        std::ofstream(dir / "bank.json") << R"({"filters":[{"name":"only","steps":[{"op":"gamma","params":[1.2]}]}]})";
        std::ofstream(dir / "cfg.json") << R"({"filter_bank":"bank.json","css_probability":0.0})";
    }
    const PerturbConfig loaded = load_perturb_config(dir / "cfg.json");
    CHECK(loaded.filter_bank.size() == 1);
    CHECK(loaded.css_probability == 0.0);
}
