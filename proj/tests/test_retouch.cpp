#include "doctest.h"

#include <cmath>
#include <cstring>

#include "harmony/error.hpp"
#include "harmony/retouch.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

OperatorMaskSet random_masks(int w, int h, ColorSpace space, std::uint64_t seed) {
    Rng rng(seed);
    OperatorMaskSet m(w, h, space);
    for (int c = 0; c < 3; ++c) {
        for (double& v : m.mul(c)) v = rng.uniform(0.5, 1.5);
        for (double& v : m.add(c)) v = rng.uniform(-5.0, 5.0);
    }
    return m;
}

std::uint32_t u32_at(const std::vector<unsigned char>& b, std::size_t off) {
    return b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

}  // namespace

TEST_CASE("identity masks leave images unchanged up to conversion error") {
    const ImageBuf img = testsupport::random_image(32, 32, 1);
    for (ColorSpace space : {ColorSpace::LAB, ColorSpace::HLS}) {
        const OperatorMaskSet id = identity_masks(32, 32, space);
        CHECK(id.is_identity());
        const ImageBuf out = apply(img, id);
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < img.pixel_count(); ++i) CHECK(std::abs(out.plane(c)[i] - img.plane(c)[i]) < 1e-4);
        }
    }
    CHECK_THROWS_AS(OperatorMaskSet(4, 4, ColorSpace::SRGB_01), Error);
}

TEST_CASE("multiply happens before add") {
    CHECK(retouch_value(10.0f, 2.0, 3.0) == 23.0f);
    const ImageBuf img(4, 4, ColorSpace::SRGB_01, 0.5f);
    OperatorMaskSet m(4, 4, ColorSpace::LAB);
    for (double& v : m.mul(0)) v = 0.5;
    for (double& v : m.add(0)) v = 10.0;
    const ImageBuf out = srgb_to_lab(apply(img, m));
    const float l0 = srgb_to_lab(img).plane(0)[0];
    CHECK(out.plane(0)[0] == doctest::Approx(l0 * 0.5f + 10.0f).epsilon(1e-4));
}

TEST_CASE("edits cancel exactly") {
    const OperatorMaskSet base = random_masks(8, 8, ColorSpace::LAB, 3);
    RegionMask region(8, 8);
    for (int i = 0; i < 20; ++i) region.set(static_cast<std::size_t>(i));
    OperatorMaskSet m = edit(base, 0, MaskOp::Add, region, 5.0);
    CHECK(!(m == base));
    CHECK(m.add(0)[0] == base.add(0)[0] + 5.0);
    CHECK(m.add(0)[30] == base.add(0)[30]);
    m = edit(m, 0, MaskOp::Add, region, -5.0);
    for (std::size_t i = 0; i < m.pixel_count(); ++i) CHECK(std::abs(m.add(0)[i] - base.add(0)[i]) < 1e-12);

    OperatorMaskSet id = identity_masks(8, 8);
    id = edit(id, 2, MaskOp::Add, std::nullopt, 5.0);
    id = edit(id, 2, MaskOp::Add, std::nullopt, -5.0);
    CHECK(id.is_identity());
    id = edit(id, 1, MaskOp::Mul, std::nullopt, 2.0);
    id = edit(id, 1, MaskOp::Mul, std::nullopt, 0.5);
    CHECK(id.is_identity());
    CHECK_THROWS_AS(edit(id, 3, MaskOp::Add, std::nullopt, 1.0), Error);
    CHECK_THROWS_AS(edit(id, 0, MaskOp::Add, std::nullopt, NAN), Error);
}

TEST_CASE("channel names") {
    CHECK(channel_index(ColorSpace::LAB, "L") == 0);
    CHECK(channel_index(ColorSpace::LAB, "b") == 2);
    CHECK(channel_index(ColorSpace::HLS, "S") == 2);
    CHECK(channel_index(ColorSpace::HLS, "1") == 1);
    CHECK(channel_name(ColorSpace::HLS, 0) == "H");
    CHECK_THROWS_AS(channel_index(ColorSpace::LAB, "H"), Error);
    CHECK(mask_op_from_string("mul") == MaskOp::Mul);
    CHECK_THROWS_AS(mask_op_from_string("div"), Error);
}

TEST_CASE("binarize and IOU") {
    OperatorMaskSet m = identity_masks(10, 1);
    m.add(1)[2] = 2e-4;
    m.add(2)[3] = -3e-4;
    m.add(0)[4] = 5e-5;
    const RegionMask bin = binarize_add(m, 1e-4);
    CHECK(bin.count() == 2);
    CHECK(bin[2]);
    CHECK(bin[3]);
    CHECK_THROWS_AS(binarize_add(m, 0.0), Error);

    RegionMask a(10, 1), b(10, 1);
    CHECK(mask_iou(a, b) == 1.0);
    a.set(std::size_t{1});
    CHECK(mask_iou(a, b) == 0.0);
    b.set(std::size_t{1});
    b.set(std::size_t{2});
    CHECK(mask_iou(a, b) == 0.5);
    CHECK_THROWS_AS(mask_iou(a, RegionMask(3, 3)), Error);
}

TEST_CASE("OMSK layout and round trip") {
    const OperatorMaskSet m = random_masks(7, 5, ColorSpace::HLS, 9);
    const auto bytes = encode_masks(m);
    REQUIRE(bytes.size() == kOmskHeaderSize + 6 * 35 * 4);
    CHECK(std::memcmp(bytes.data(), "OMSK1\0\0\0", 8) == 0);
    CHECK(u32_at(bytes, 8) == 7);
    CHECK(u32_at(bytes, 12) == 5);
    CHECK(u32_at(bytes, 16) == 1);
    CHECK(u32_at(bytes, 20) == kOmskHeaderSize);
    CHECK(u32_at(bytes, 68) == 0);

    const OperatorMaskSet back = decode_masks(bytes);
    CHECK(back.space() == ColorSpace::HLS);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < m.pixel_count(); ++i) {
            CHECK(back.mul(c)[i] == static_cast<double>(static_cast<float>(m.mul(c)[i])));
        }
    }
    CHECK(encode_masks(back) == bytes);

    const ImageBuf img = testsupport::random_image(7, 5, 2);
    CHECK(apply(img, back) == apply(img, m));

    testsupport::TempDir dir("omsk");
    save_masks(m, dir / "m.omsk");
    CHECK(load_masks(dir / "m.omsk") == back);

    auto truncated = bytes;
    truncated.resize(100);
    CHECK_THROWS_AS(decode_masks(truncated), Error);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_masks(bad_magic), Error);
    auto bad_space = bytes;
    bad_space[16] = 7;
    CHECK_THROWS_AS(decode_masks(bad_space), Error);
    CHECK_THROWS_AS(load_masks(dir / "missing.omsk"), Error);
}

TEST_CASE("apply rejects mismatched sizes") {
    CHECK_THROWS_AS(apply(ImageBuf(4, 4), identity_masks(5, 4)), Error);
}
