#include "relux/io/formats.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relux/error.hpp"
#include "relux/io/manifest.hpp"
#include "relux/io/pfm.hpp"

namespace relux::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what(), e.byte - 1);
    }
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

Direction dir_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) throw InvalidArgument("direction needs 3 components");
    // Unit vectors are kept bit-exact so layouts round-trip; others are normalized.
    const Vec3 u{v[0], v[1], v[2]};
    return std::abs(u.norm() - 1.0) <= 1e-9 ? Direction(u) : Direction::normalized(u);
}

Rgb rgb_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) throw InvalidArgument("rgb needs 3 components");
    Rgb c{v[0], v[1], v[2]};
    if (!c.nonnegative()) throw InvalidArgument("rgb components must be nonnegative");
    return c;
}

json rgb_to(const Rgb& c) { return json::array({c.r, c.g, c.b}); }

template <typename Fn>
auto with_json_errors(Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed JSON document: ") + e.what());
    }
}

std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05zu.pfm", i);
    return buf;
}

}  // namespace

json layout_to_json(const SphereLayout& layout) {
    json lights = json::array();
    for (const auto& d : layout.directions) lights.push_back({{"dir", {d.x(), d.y(), d.z()}}});
    return {{"lights", lights}};
}

SphereLayout layout_from_json(const json& j) {
    return with_json_errors([&] {
        SphereLayout layout;
        for (const auto& l : j.at("lights")) layout.directions.push_back(dir_from(l.at("dir")));
        return layout;
    });
}

SphereLayout load_layout(const std::string& path) { return layout_from_json(read_json(path)); }
void save_layout(const std::string& path, const SphereLayout& layout) { write_json(path, layout_to_json(layout)); }

json lighting_to_json(const LightingCondition& lighting) {
    json lights = json::array();
    for (const auto& l : lighting.lights) {
        lights.push_back({{"dir", {l.direction.x(), l.direction.y(), l.direction.z()}}, {"rgb", rgb_to(l.intensity)}});
    }
    return {{"lights", lights}};
}

LightingCondition lighting_from_json(const json& j) {
    return with_json_errors([&] {
        LightingCondition c;
        for (const auto& l : j.at("lights")) c.lights.push_back({dir_from(l.at("dir")), rgb_from(l.at("rgb"))});
        return c;
    });
}

LightingCondition load_lighting(const std::string& path) { return lighting_from_json(read_json(path)); }

bipack::LightingSequence load_sequence(const std::string& path) {
    const json j = read_json(path);
    return with_json_errors([&] {
        std::vector<Direction> dirs;
        if (j.contains("directions")) {
            for (const auto& d : j.at("directions")) dirs.push_back(dir_from(d));
        } else {
            dirs = load_layout(join_path(parent_dir(path), j.at("layout").get<std::string>())).directions;
        }
        bipack::LightingSequence seq;
        seq.keyframe_rate = j.value("keyframe_rate", 1.0);
        seq.playback_rate = j.value("playback_rate", 60.0);
        for (const auto& kf : j.at("keyframes")) {
            if (kf.size() != dirs.size()) throw InvalidArgument("keyframe light count differs from the layout");
            LightingCondition c;
            for (std::size_t i = 0; i < dirs.size(); ++i) c.lights.push_back({dirs[i], rgb_from(kf[i])});
            seq.keyframes.push_back(std::move(c));
        }
        seq.validate();
        return seq;
    });
}

void save_sequence(const std::string& path, const bipack::LightingSequence& seq, const std::string& layout_ref) {
    json j;
    if (layout_ref.empty()) {
        json dirs = json::array();
        if (!seq.keyframes.empty())
            for (const auto& l : seq.keyframes.front().lights)
                dirs.push_back({l.direction.x(), l.direction.y(), l.direction.z()});
        j["directions"] = dirs;
    } else {
        j["layout"] = layout_ref;
    }
    j["keyframe_rate"] = seq.keyframe_rate;
    j["playback_rate"] = seq.playback_rate;
    json kfs = json::array();
    for (const auto& kf : seq.keyframes) {
        json k = json::array();
        for (const auto& l : kf.lights) k.push_back(rgb_to(l.intensity));
        kfs.push_back(k);
    }
    j["keyframes"] = kfs;
    write_json(path, j);
}

std::string schedule_to_jsonl(const bipack::BiPackSchedule& schedule) {
    std::string out;
    for (const auto& e : schedule.entries) {
        json lights = json::array();
        for (const auto& l : e.lighting.lights) lights.push_back(rgb_to(l.intensity));
        json line{{"i", e.index},
                  {"tag", std::string(1, bipack::tag_char(e.tag))},
                  {"t_num", e.time.num},
                  {"t_den", e.time.den},
                  {"lights", lights}};
        const auto& kf = e.tag == bipack::StreamTag::A ? schedule.keyframe_rate_a : schedule.keyframe_rate_b;
        if (kf) line["kf_hz"] = *kf;
        out += line.dump();
        out += '\n';
    }
    return out;
}

bipack::BiPackSchedule schedule_from_jsonl(const std::string& text, const SphereLayout& layout) {
    bipack::BiPackSchedule schedule;
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    SphereLayout dirs = layout;
    bool have_a = false;
    bool have_b = false;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError("schedule line: " + std::string(e.what()), line_start + e.byte - 1);
        }
        with_json_errors([&] {
            bipack::ScheduleEntry e;
            e.index = j.at("i").get<std::int64_t>();
            const auto tag = j.at("tag").get<std::string>();
            if (tag != "A" && tag != "B") throw InvalidArgument("schedule tag must be A or B");
            e.tag = tag == "A" ? bipack::StreamTag::A : bipack::StreamTag::B;
            e.time = {j.at("t_num").get<std::int64_t>(), j.at("t_den").get<std::int64_t>()};
            const auto& lights = j.at("lights");
            if (dirs.empty()) dirs = SphereLayout::make_default(lights.size());
            if (lights.size() != dirs.size()) throw InvalidArgument("schedule light count differs from the layout");
            for (std::size_t i = 0; i < lights.size(); ++i) e.lighting.lights.push_back({dirs.directions[i], rgb_from(lights[i])});
            if (schedule.entries.empty()) schedule.global_rate = e.time.den;
            if (j.contains("kf_hz")) {
                auto& slot = e.tag == bipack::StreamTag::A ? schedule.keyframe_rate_a : schedule.keyframe_rate_b;
                slot = j.at("kf_hz").get<double>();
                (e.tag == bipack::StreamTag::A ? have_a : have_b) = true;
            }
            schedule.entries.push_back(std::move(e));
            return 0;
        });
    }
    if (!(have_a && have_b)) {
        schedule.keyframe_rate_a.reset();
        schedule.keyframe_rate_b.reset();
    }
    return schedule;
}

olat::OlatStack load_stack(const std::string& manifest_path) {
    const Manifest m = Manifest::load(manifest_path);
    const std::string base = parent_dir(manifest_path);
    return with_json_errors([&] {
        olat::OlatStack stack;
        stack.layout = load_layout(join_path(base, m.body.at("layout").get<std::string>()));
        stack.scale = m.body.value("scale", 1.0);
        for (const auto& name : m.body.at("images")) stack.basis.push_back(read_pfm(join_path(base, name.get<std::string>())));
        stack.validate();
        return stack;
    });
}

std::string save_stack(const std::string& dir, const olat::OlatStack& stack) {
    fs::create_directories(dir);
    Manifest m;
    save_layout(join_path(dir, "layout.json"), stack.layout);
    m.add_file(dir, "layout.json");
    json images = json::array();
    for (std::size_t i = 0; i < stack.basis.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "olat_%04zu.pfm", i);
        write_pfm(join_path(dir, buf), stack.basis[i]);
        m.add_file(dir, buf);
        images.push_back(buf);
    }
    m.body["kind"] = "olat_stack";
    m.body["layout"] = "layout.json";
    m.body["images"] = images;
    m.body["scale"] = stack.scale;
    const auto path = join_path(dir, "stack.json");
    m.save(path);
    return path;
}

std::vector<std::string> list_pfm(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pfm") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::pair<std::string, olat::HdriImage>> load_hdri_dir(const std::string& dir) {
    std::vector<std::pair<std::string, olat::HdriImage>> out;
    for (const auto& f : list_pfm(dir)) out.emplace_back(fs::path(f).stem().string(), olat::HdriImage(read_pfm(f)));
    return out;
}

void save_stream(const std::string& dir, const bipack::FrameStream& stream) {
    fs::create_directories(dir);
    Manifest m;
    json frames = json::array();
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto& f = stream.frames[i];
        const auto name = frame_name(i);
        write_pfm(join_path(dir, name), f.image);
        m.add_file(dir, name);
        json lights = json::array();
        for (const auto& l : f.lighting.lights) lights.push_back(rgb_to(l.intensity));
        frames.push_back({{"file", name},
                          {"t_num", f.time.num},
                          {"t_den", f.time.den},
                          {"interpolated", f.interpolated},
                          {"lights", lights}});
    }
    m.body["kind"] = "frame_stream";
    m.body["rate"] = {stream.rate.num, stream.rate.den};
    m.body["frames"] = frames;
    m.save(join_path(dir, "stream.json"));
}

bipack::FrameStream load_stream(const std::string& dir, const SphereLayout& layout) {
    const Manifest m = Manifest::load(join_path(dir, "stream.json"));
    return with_json_errors([&] {
        bipack::FrameStream s;
        const auto rate = m.body.at("rate").get<std::vector<std::int64_t>>();
        if (rate.size() != 2) throw InvalidArgument("stream rate must be [num, den]");
        s.rate = {rate[0], rate[1]};
        SphereLayout dirs = layout;
        for (const auto& fj : m.body.at("frames")) {
            bipack::Frame f;
            f.image = read_pfm(join_path(dir, fj.at("file").get<std::string>()));
            f.time = {fj.at("t_num").get<std::int64_t>(), fj.at("t_den").get<std::int64_t>()};
            f.interpolated = fj.value("interpolated", false);
            const auto& lights = fj.at("lights");
            if (dirs.empty() && !lights.empty()) dirs = SphereLayout::make_default(lights.size());
            for (std::size_t i = 0; i < lights.size(); ++i) f.lighting.lights.push_back({dirs.directions.at(i), rgb_from(lights[i])});
            s.frames.push_back(std::move(f));
        }
        return s;
    });
}

}  // namespace relux::io
