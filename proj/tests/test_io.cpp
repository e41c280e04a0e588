#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "relux/error.hpp"
#include "relux/io/formats.hpp"
#include "relux/io/manifest.hpp"
#include "relux/io/pfm.hpp"
#include "relux/io/png.hpp"

using namespace relux;
using namespace relux::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("relux_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Image random_image(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<float> u(-10, 10);
    Image img(w, h);
    for (float& v : img.data()) v = u(rng);
    return img;
}

}  // namespace

TEST_CASE("pfm encoding") {
    SUBCASE("1x1 white") {
        Image img(1, 1, 1.0f);
        auto bytes = encode_pfm(img);
        const std::string header = "PF\n1 1\n-1.0\n";
        REQUIRE(bytes.size() == header.size() + 12);
        CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
        float v;
        std::memcpy(&v, bytes.data() + header.size(), 4);
        CHECK(v == 1.0f);
        CHECK(bytes[header.size() + 3] == 0x3f);  // little-endian 1.0f = 00 00 80 3f
    }
    SUBCASE("rows are stored bottom first") {
        Image img(1, 2);
        img.at(0, 0, 0) = 5.0f;
        img.at(0, 1, 0) = 7.0f;
        auto bytes = encode_pfm(img);
        const std::size_t off = std::string("PF\n1 2\n-1.0\n").size();
        float first;
        std::memcpy(&first, bytes.data() + off, 4);
        CHECK(first == 7.0f);
    }
    SUBCASE("random round trip is bit-exact") {
        std::mt19937_64 rng(1);
        for (auto [w, h] : {std::pair{1, 1}, std::pair{7, 3}, std::pair{64, 48}}) {
            auto img = random_image(rng, w, h);
            img.at(0, 0, 0) = std::numeric_limits<float>::denorm_min();
            img.at(w - 1, h - 1, 2) = -0.0f;
            auto back = decode_pfm(encode_pfm(img));
            REQUIRE(back.same_shape(img));
            CHECK(std::memcmp(back.data().data(), img.data().data(), img.data().size() * 4) == 0);
        }
    }
    SUBCASE("file round trip") {
        TempDir dir("pfm");
        std::mt19937_64 rng(2);
        auto img = random_image(rng, 5, 4);
        write_pfm(dir / "a.pfm", img);
        CHECK(read_pfm(dir / "a.pfm") == img);
        CHECK(read_file(dir / "a.pfm") == encode_pfm(img));
    }
}

TEST_CASE("pfm errors") {
    SUBCASE("grayscale") { CHECK_THROWS_AS(decode_pfm(bytes_of("Pf\n1 1\n-1.0\n0000")), UnsupportedFormat); }
    SUBCASE("big endian") {
        CHECK_THROWS_AS(decode_pfm(bytes_of("PF\n1 1\n1.0\n000000000000")), UnsupportedFormat);
    }
    SUBCASE("truncated payload") {
        auto bytes = encode_pfm(Image(2, 2, 1.0f));
        bytes.resize(bytes.size() - 5);
        CHECK_THROWS_AS(decode_pfm(bytes), UnsupportedFormat);
    }
    SUBCASE("malformed header reports an offset") {
        try {
            decode_pfm(bytes_of("PF\n1 x\n-1.0\n"));
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == 5);
        }
        CHECK_THROWS_AS(decode_pfm(bytes_of("P6\n1 1\n255\n")), FormatError);
        CHECK_THROWS_AS(decode_pfm(bytes_of("")), FormatError);
        CHECK_THROWS_AS(decode_pfm(bytes_of("PF\n0 1\n-1.0\n")), FormatError);
    }
}

TEST_CASE("png") {
    Image img(3, 2);
    img.at(0, 0, 0) = 1.0f;
    img.at(1, 0, 1) = 0.5f;
    img.at(2, 1, 2) = 4.0f;
    img.at(1, 1, 0) = -1.0f;
    SUBCASE("tonemap") {
        auto t = tonemap_to_srgb8(img, 1.0);
        CHECK(t.pixels[0] == 255);
        CHECK(t.pixels[4] == static_cast<std::uint8_t>(std::lround(255 * linear_to_srgb(0.5))));
        CHECK(t.pixels[(1 * 3 + 2) * 3 + 2] == 255);  // clamped
        CHECK(t.pixels[(1 * 3 + 1) * 3 + 0] == 0);
        auto t2 = tonemap_to_srgb8(img, 2.0);
        CHECK(t2.pixels[4] == 255);
    }
    SUBCASE("round trip and determinism") {
        auto t = tonemap_to_srgb8(img, 1.0);
        auto png = encode_png(t);
        CHECK(png == encode_png(t));
        const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
        CHECK(std::memcmp(png.data(), sig, 8) == 0);
        auto back = decode_png(png);
        CHECK(back.width == 3);
        CHECK(back.height == 2);
        CHECK(back.pixels == t.pixels);
    }
    SUBCASE("garbage is rejected") {
        CHECK_THROWS(decode_png(bytes_of("not a png at all")));
    }
}

TEST_CASE("manifest hashes") {
    CHECK(sha256_hex(bytes_of("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir("manifest");
    write_file(dir / "data.bin", bytes_of("hello"));
    Manifest m;
    m.body["file"] = "data.bin";
    m.add_file(dir.path.string(), "data.bin");
    m.save(dir / "m.json");
    auto loaded = Manifest::load(dir / "m.json");
    CHECK(loaded.version == Manifest::kVersion);
    CHECK(loaded.body["file"] == "data.bin");

    write_file(dir / "data.bin", bytes_of("hellp"));
    CHECK_THROWS_AS(Manifest::load(dir / "m.json"), HashMismatch);
    fs::remove(dir / "data.bin");
    CHECK_THROWS_AS(Manifest::load(dir / "m.json"), HashMismatch);

    std::ofstream(dir / "noversion.json") << R"({"hashes":{}})";
    CHECK_THROWS(Manifest::load(dir / "noversion.json"));
}

TEST_CASE("layout and lighting json") {
    auto layout = SphereLayout::make_default(10);
    auto back = layout_from_json(layout_to_json(layout));
    REQUIRE(back.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(back.directions[i] == layout.directions[i]);

    LightingCondition c;
    c.lights.push_back({layout.directions[2], Rgb{0.1, 2.0, 30.0}});
    auto lc = lighting_from_json(lighting_to_json(c));
    REQUIRE(lc.size() == 1);
    CHECK(lc.lights[0].intensity == c.lights[0].intensity);
    CHECK(lc.lights[0].direction == c.lights[0].direction);

    CHECK_THROWS_AS(lighting_from_json(nlohmann::json::parse(R"({"lights":[{"dir":[0,1,0],"rgb":[-1,0,0]}]})")),
                    InvalidArgument);
    CHECK(layout_from_json(nlohmann::json::parse(R"({"lights":[{"dir":[0,2,0]}]})")).directions[0] == Direction{});
    CHECK_THROWS_AS(layout_from_json(nlohmann::json::parse(R"({"lights":[{"dir":[0,0,0]}]})")), InvalidArgument);
    CHECK_THROWS_AS(layout_from_json(nlohmann::json::parse(R"({"nope":1})")), InvalidArgument);
}

TEST_CASE("schedule jsonl round trip") {
    auto layout = SphereLayout::make_default(4);
    bipack::LightingSequence a, b;
    for (int k = 0; k < 3; ++k) {
        LightingCondition ca, cb;
        for (const auto& d : layout.directions) {
            ca.lights.push_back({d, Rgb{0.1 * k, 0.2, 0.3}});
            cb.lights.push_back({d, Rgb{0.5, 0.1 * k, 1.0 / 3.0}});
        }
        a.keyframes.push_back(ca);
        b.keyframes.push_back(cb);
    }
    auto sched = bipack::build_bipack(a, b, 120, 2.0);
    const auto text = schedule_to_jsonl(sched);
    auto back = schedule_from_jsonl(text, layout);
    REQUIRE(back.entries.size() == sched.entries.size());
    CHECK(back.global_rate == 120);
    for (std::size_t i = 0; i < sched.entries.size(); ++i) {
        CHECK(back.entries[i].tag == sched.entries[i].tag);
        CHECK(back.entries[i].time == sched.entries[i].time);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(back.entries[i].lighting.lights[l].intensity == sched.entries[i].lighting.lights[l].intensity);
            CHECK(back.entries[i].lighting.lights[l].direction == layout.directions[l]);
        }
    }
    CHECK(back.keyframe_rate_a == sched.keyframe_rate_a);
    CHECK(schedule_from_jsonl(text).entries[0].lighting.lights[1].direction == layout.directions[1]);

    SUBCASE("errors carry the line offset") {
        std::string bad = text;
        const auto second = bad.find('\n') + 1;
        bad.insert(second, "{broken\n");
        try {
            schedule_from_jsonl(bad, layout);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            // Offsets are 0-based file positions of the offending byte, the 'b' after the brace.
            CHECK(e.offset() == second + 1);
        }
    }
}

TEST_CASE("stack, sequence and stream directories") {
    TempDir dir("stack");
    std::mt19937_64 rng(3);
    olat::OlatStack stack;
    stack.layout = SphereLayout::make_default(5);
    std::uniform_real_distribution<float> u(0, 1);
    for (int i = 0; i < 5; ++i) {
        Image img(4, 3);
        for (float& v : img.data()) v = u(rng);
        stack.basis.push_back(img);
    }
    stack.scale = 0.25;
    const auto manifest = save_stack(dir.path.string(), stack);
    auto loaded = load_stack(manifest);
    CHECK(loaded.size() == 5);
    CHECK(loaded.scale == 0.25);
    for (std::size_t i = 0; i < 5; ++i) CHECK(loaded.basis[i] == stack.basis[i]);

    write_pfm(dir / "olat_0003.pfm", Image(4, 3, 9.0f));
    CHECK_THROWS_AS(load_stack(manifest), HashMismatch);

    SUBCASE("sequence file") {
        bipack::LightingSequence seq;
        seq.keyframe_rate = 0.5;
        for (int k = 0; k < 2; ++k) {
            LightingCondition c;
            for (const auto& d : stack.layout.directions) c.lights.push_back({d, Rgb{1.0 + k, 0, 0.5}});
            seq.keyframes.push_back(c);
        }
        save_layout(dir / "layout.json", stack.layout);
        save_sequence(dir / "seq.json", seq, "layout.json");
        auto back = load_sequence(dir / "seq.json");
        CHECK(back.keyframe_rate == 0.5);
        REQUIRE(back.keyframes.size() == 2);
        CHECK(back.keyframes[1].lights[4].intensity == Rgb{2, 0, 0.5});
        CHECK(back.keyframes[1].lights[4].direction == stack.layout.directions[4]);
    }
    SUBCASE("stream directory") {
        bipack::FrameStream s;
        s.rate = {60, 1};
        for (int i = 0; i < 3; ++i) {
            bipack::Frame f;
            f.image = stack.basis[static_cast<std::size_t>(i)];
            f.time = {2 * i + 1, 120};
            f.interpolated = i == 1;
            for (const auto& d : stack.layout.directions) f.lighting.lights.push_back({d, Rgb{0.1 * i, 0, 0}});
            s.frames.push_back(f);
        }
        save_stream((dir.path / "s").string(), s);
        auto back = load_stream((dir.path / "s").string(), stack.layout);
        REQUIRE(back.size() == 3);
        CHECK(back.rate == s.rate);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back.frames[i].image == s.frames[i].image);
            CHECK(back.frames[i].time == s.frames[i].time);
            CHECK(back.frames[i].interpolated == s.frames[i].interpolated);
            CHECK(back.frames[i].lighting.lights[0].intensity == s.frames[i].lighting.lights[0].intensity);
        }
        CHECK(list_pfm((dir.path / "s").string()).size() == 3);
    }
    SUBCASE("hdri directory") {
        fs::create_directories(dir.path / "hdri");
        write_pfm((dir.path / "hdri" / "b.pfm").string(), Image(4, 2, 1.0f));
        write_pfm((dir.path / "hdri" / "a.pfm").string(), Image(8, 4, 2.0f));
        auto h = load_hdri_dir((dir.path / "hdri").string());
        REQUIRE(h.size() == 2);
        CHECK(h[0].first == "a");
        CHECK(h[1].second.width() == 4);
        write_pfm((dir.path / "hdri" / "c.pfm").string(), Image(4, 4, 1.0f));
        CHECK_THROWS_AS(load_hdri_dir((dir.path / "hdri").string()), InvalidArgument);
    }
}
