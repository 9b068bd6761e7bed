#include "oracles.hpp"
#include "scratch.hpp"

#include "semdet/codec/codec.hpp"
#include "semdet/common/errors.hpp"
#include "semdet/common/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace semdet;
using namespace semdet::codec;

namespace {

CodecConfig cfg5()
{
    CodecConfig c;
    c.stride = 4;
    c.num_classes = 5;
    return c;
}

struct Maps {
    int c, h, w;
    std::vector<float> heat, off, size;
    Maps(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), heat(static_cast<std::size_t>(c_ * h_ * w_), 0.0f),
          off(static_cast<std::size_t>(2 * h_ * w_), 0.0f), size(static_cast<std::size_t>(2 * h_ * w_), 8.0f)
    {
    }
    void peak(int ch, int x, int y, float v, float ox = 0, float oy = 0, float sw = 8, float sh = 8)
    {
        heat[static_cast<std::size_t>((ch * h + y) * w + x)] = v;
        const std::size_t at = static_cast<std::size_t>(y * w + x);
        off[at] = ox;
        off[static_cast<std::size_t>(h * w) + at] = oy;
        size[at] = sw;
        size[static_cast<std::size_t>(h * w) + at] = sh;
    }
    HeadMaps view() const { return HeadMaps{c, h, w, heat, off, size}; }
};

} // namespace

TEST_SUITE("codec") {

TEST_CASE("gaussian radius matches the displacement search")
{
    CHECK(gaussian_radius(40, 40, 0.7, 4) == oracle::radius_by_search(40, 40, 0.7, 4));
    Rng rng = make_rng(1, 0, 0);
    for (int i = 0; i < 60; ++i) {
        const double h = uniform_int(rng, 4, 120);
        const double w = uniform_int(rng, 4, 120);
        CAPTURE(h);
        CAPTURE(w);
        CHECK(gaussian_radius(h, w, 0.7, 4) == oracle::radius_by_search(h, w, 0.7, 4));
    }
}

TEST_CASE("gaussian radius limits")
{
    CHECK(gaussian_radius(4, 4, 0.7, 4) == 0);
    CHECK(gaussian_radius(3, 2, 0.7, 4) == 0);
    for (double s : {10.0, 50.0, 200.0}) CHECK(gaussian_radius(s, s, 0.9999, 4) == 0);
    CHECK(gaussian_sigma(0) == doctest::Approx(1.0 / 3.0));
    CHECK(gaussian_sigma(4) == doctest::Approx(1.5));
}

TEST_CASE("encode puts exact values at the centre cell")
{
    const std::vector<Annotation> a{{0, Box{180, 180, 40, 40}}};
    const EncodedTarget t = encode_targets(a, 480, cfg5());
    CHECK(t.height == 120);
    CHECK(t.heat(0, 50, 50) == 1.0f);
    CHECK(t.is_center(50, 50));
    const std::size_t at = 50 * 120 + 50;
    CHECK(t.offset[at] == 0.0f);
    CHECK(t.offset[t.cells() + at] == 0.0f);
    CHECK(t.size[at] == 40.0f);
    CHECK(t.size[t.cells() + at] == 40.0f);

    const std::vector<Annotation> b{{0, Box{182, 181, 40, 40}}};
    const EncodedTarget u = encode_targets(b, 480, cfg5());
    CHECK(u.is_center(50, 50));
    CHECK(u.offset[at] == 0.5f);
    CHECK(u.offset[u.cells() + at] == 0.25f);
}

TEST_CASE("encode of nothing is empty")
{
    const EncodedTarget t = encode_targets({}, 480, cfg5());
    for (float v : t.heatmap) REQUIRE(v == 0.0f);
    for (auto m : t.center_mask) REQUIRE(m == 0);
}

TEST_CASE("encode rejects a stride that does not divide the image")
{
    CHECK_THROWS_AS(encode_targets({}, 481, cfg5()), EncodeError);
    CHECK_THROWS_AS(encode_targets(std::vector<Annotation>{{7, Box{1, 1, 5, 5}}}, 480, cfg5()), EncodeError);
}

TEST_CASE("encoded target invariants on random boxes")
{
    Rng rng = make_rng(2, 0, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Annotation> anns;
        const int n = uniform_int(rng, 1, 6);
        for (int i = 0; i < n; ++i) {
            const double w = uniform_real(rng, 2, 80), h = uniform_real(rng, 2, 80);
            anns.push_back({uniform_int(rng, 0, 4), Box{uniform_real(rng, 0, 480 - w), uniform_real(rng, 0, 480 - h), w, h}});
        }
        const EncodedTarget t = encode_targets(anns, 480, cfg5());
        float mx = 0;
        for (float v : t.heatmap) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
            mx = std::max(mx, v);
        }
        CHECK(mx == 1.0f);
        for (float v : t.offset) {
            REQUIRE(v >= 0.0f);
            REQUIRE(v < 1.0f);
        }
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x) {
                if (!t.is_center(y, x)) continue;
                const std::size_t at = static_cast<std::size_t>(y) * t.width + x;
                REQUIRE(t.size[at] > 0);
                REQUIRE(t.size[t.cells() + at] > 0);
                bool one = false;
                for (int c = 0; c < 5; ++c) one |= t.heat(c, y, x) == 1.0f;
                REQUIRE(one);
            }
    }
}

TEST_CASE("decode examples")
{
    CodecConfig c = cfg5();
    Maps m(5, 120, 120);
    m.peak(0, 50, 50, 0.9f, 0.5f, 0.25f, 40, 40);
    const auto d = decode_detections(m.view(), 480, c);
    REQUIRE(d.size() == 1);
    CHECK(d[0].class_id == 0);
    CHECK(d[0].box.cx() == doctest::Approx(202.0));
    CHECK(d[0].box.cy() == doctest::Approx(201.0));
    CHECK(d[0].box.w == doctest::Approx(40.0));
    CHECK(d[0].box.h == doctest::Approx(40.0));
    CHECK(d[0].score == doctest::Approx(0.9));

    Maps zero(5, 120, 120);
    c.peak_threshold = 0.1;
    CHECK(decode_detections(zero.view(), 480, c).empty());

    Maps two(5, 120, 120);
    two.peak(1, 10, 10, 0.9f);
    two.peak(3, 80, 90, 0.6f);
    c = cfg5();
    c.top_k = 1;
    DecodeStats st;
    const auto top = decode_detections(two.view(), 480, c, &st);
    REQUIRE(top.size() == 1);
    CHECK(top[0].class_id == 1);
    CHECK(st.peaks == 2);
    CHECK(st.candidates == 1);
}

TEST_CASE("decoded boxes are clipped to the image")
{
    Maps m(1, 8, 8);
    m.peak(0, 0, 0, 0.8f, 0.1f, 0.1f, 30, 30);
    CodecConfig c;
    c.num_classes = 1;
    const auto d = decode_detections(m.view(), 32, c);
    REQUIRE(d.size() == 1);
    CHECK(d[0].box.x == 0.0);
    CHECK(d[0].box.y == 0.0);
    CHECK(d[0].box.right() <= 32.0);
}

TEST_CASE("decode is monotone in threshold and K and bounded by K")
{
    Rng rng = make_rng(3, 0, 0);
    for (int trial = 0; trial < 30; ++trial) {
        Maps m(3, 24, 24);
        for (auto& v : m.heat) v = static_cast<float>(uniform_real(rng, 0, 1));
        CodecConfig c;
        c.num_classes = 3;
        std::size_t prev = SIZE_MAX;
        for (double thr : {0.0, 0.2, 0.5, 0.8, 0.95}) {
            c.peak_threshold = thr;
            c.top_k = 1000;
            const std::size_t n = decode_detections(m.view(), 96, c).size();
            CHECK(n <= prev);
            prev = n;
        }
        c.peak_threshold = 0;
        std::vector<Detection> smaller;
        for (int k : {1, 3, 10, 40, 200}) {
            c.top_k = k;
            const auto d = decode_detections(m.view(), 96, c);
            CHECK(static_cast<int>(d.size()) <= k);
            for (const auto& s : smaller) CHECK(std::find(d.begin(), d.end(), s) != d.end());
            smaller = d;
        }
    }
}

TEST_CASE("roundtrip recovers separated annotations")
{
    Rng rng = make_rng(4, 0, 0);
    CodecConfig c = cfg5();
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Annotation> anns;
        while (anns.size() < 5) {
            const double w = uniform_int(rng, 3, 60), h = uniform_int(rng, 3, 60);
            const Annotation a{uniform_int(rng, 0, 4), Box{uniform_real(rng, 0, 480 - w), uniform_real(rng, 0, 480 - h), w, h}};
            bool far = true;
            for (const auto& b : anns) far &= std::hypot(a.box.cx() - b.box.cx(), a.box.cy() - b.box.cy()) > 8 * c.stride;
            if (far) anns.push_back(a);
        }
        const RoundtripResult r = roundtrip_check(anns, 480, c);
        CHECK(r.recovered == r.expected);
        CHECK(r.max_center_error <= 1e-4);
        CHECK(r.max_size_error == 0.0);
    }
}

TEST_CASE("two boxes in one cell collapse to one detection")
{
    const std::vector<Annotation> anns{{0, Box{100, 100, 20, 20}}, {0, Box{101, 101, 20, 20}}};
    const RoundtripResult r = roundtrip_check(anns, 480, cfg5());
    CHECK(r.expected == 2);
    CHECK(r.recovered == 1);
}

TEST_CASE("detection table round trip")
{
    ScratchDir dir("det");
    DetectionTable t;
    t["0.pgm"] = {Detection{1, Box{1, 2, 3, 4}, 0.5}, Detection{0, Box{5.5, 6, 7, 8}, 0.25}};
    t["1.pgm"] = {};
    write_detections(t, dir / "d.jsonl");
    CHECK(read_detections(dir / "d.jsonl") == t);
}

}
