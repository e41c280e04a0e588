// relux: command-line front end for the relighting toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "relux/bipack.hpp"
#include "relux/compositor.hpp"
#include "relux/error.hpp"
#include "relux/io/formats.hpp"
#include "relux/io/manifest.hpp"
#include "relux/io/pfm.hpp"
#include "relux/io/png.hpp"
#include "relux/io/service.hpp"
#include "relux/log.hpp"
#include "relux/metrics.hpp"
#include "relux/olatoken.hpp"
#include "relux/parallel.hpp"
#include "relux/toy/scene.hpp"
#include "relux/toy/trainer.hpp"
#include "relux/window_blend.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relux;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what(), e.byte);
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_image(const std::string& path, const Image& image, double exposure) {
    if (fs::path(path).extension() == ".png") {
        const auto bytes = io::encode_png(io::tonemap_to_srgb8(image, exposure));
        io::write_file(path, bytes);
    } else {
        io::write_pfm(path, image);
    }
}

struct Common {
    std::uint64_t seed = 0;
    int threads = 0;
    std::string output;
};

void add_common(CLI::App* app, Common& c, bool with_output = true) {
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option_function<int>(
        "--threads", [&c](int t) {
            c.threads = t;
            if (t > 0) set_thread_count(t);
        },
        "Worker threads (0 = hardware)");
    if (with_output) app->add_option("-o,--output", c.output, "Output path");
}

// ---- bipack ----

int bipack_gen(const std::string& seq_a, const std::string& seq_b, std::int64_t rate, double duration,
               const std::string& out) {
    const auto a = io::load_sequence(seq_a);
    const auto b = io::load_sequence(seq_b);
    if (duration <= 0.0) duration = std::min(a.duration(), b.duration());
    const auto schedule = bipack::build_bipack(a, b, rate, duration);
    write_text(out, io::schedule_to_jsonl(schedule));
    log::info(fmt::format("wrote {} schedule entries", schedule.entries.size()));
    return 0;
}

int bipack_demux(const std::string& in_dir, const std::string& sched, const std::string& out) {
    const auto schedule = io::schedule_from_jsonl(read_text(sched));
    SphereLayout layout;
    if (!schedule.entries.empty()) {
        for (const auto& l : schedule.entries.front().lighting.lights) layout.directions.push_back(l.direction);
    }
    const auto stream = io::load_stream(in_dir, layout);
    const auto [a, b] = bipack::demux(stream, schedule);
    io::save_stream(io::join_path(out, "A"), a);
    io::save_stream(io::join_path(out, "B"), b);
    std::cout << json{{"a_frames", a.size()}, {"b_frames", b.size()}}.dump() << "\n";
    return 0;
}

int bipack_check(const std::string& sched, double threshold, double bound) {
    const auto schedule = io::schedule_from_jsonl(read_text(sched));
    const auto report = bipack::validate_flicker(schedule, threshold, bound);
    json j{{"pass", report.pass},
           {"stream_rate", report.stream_rate},
           {"change_rate", report.change_rate},
           {"fusion_threshold", report.fusion_threshold},
           {"slow_change_bound", report.slow_change_bound},
           {"failures", report.failures}};
    std::cout << j.dump(2) << "\n";
    return report.pass ? 0 : kDataError;
}

// ---- olat ----

int olat_composite(const std::string& stack_path, const std::string& lights, const std::string& hdri, double rot,
                   double exposure, bool snap, const std::string& out) {
    const auto stack = io::load_stack(stack_path);
    Image result;
    if (!hdri.empty()) {
        const olat::HdriImage env(io::read_pfm(hdri));
        result = olat::composite(stack, olat::hdri_to_lights(env, stack.layout, rot));
    } else if (!lights.empty()) {
        const auto condition = io::load_lighting(lights);
        const double tol = snap ? std::numeric_limits<double>::infinity() : 1.0;
        result = olat::composite_weights(stack, olat::resolve_weights(stack, condition, tol));
    } else {
        throw CLI::ValidationError("olat composite", "needs --hdri or --lights");
    }
    write_image(out, result, exposure);
    return 0;
}

int olat_dataset(const std::string& stack_path, const std::string& hdri_dir, int n, int frames, std::uint64_t seed,
                 const std::string& out) {
    const auto stack = io::load_stack(stack_path);
    std::vector<olat::HdriImage> hdris;
    std::vector<std::string> ids;
    for (auto& [id, h] : io::load_hdri_dir(hdri_dir)) {
        ids.push_back(id);
        hdris.push_back(std::move(h));
    }
    if (hdris.empty()) throw InvalidArgument("no .pfm environments in " + hdri_dir);
    const auto data = olat::build_olat_dataset(stack, hdris, n, frames, seed);
    fs::create_directories(out);
    json records = json::array();
    for (std::size_t i = 0; i < data.tuples.size(); ++i) {
        const std::string dir = io::join_path(out, fmt::format("tuple_{:04d}", i));
        io::save_stream(io::join_path(dir, "input"), data.tuples[i].input_video);
        io::save_stream(io::join_path(dir, "target"), data.tuples[i].target_video);
        const auto& r = data.records[i];
        records.push_back({{"tuple", fs::path(dir).filename().string()},
                           {"input_hdri", ids[r.input_hdri]},
                           {"input_rotation_deg", r.input_rotation},
                           {"target_hdri", ids[r.target_hdri]},
                           {"target_rotation_deg", r.target_rotation},
                           {"motion", {{"dx", r.motion_step.dx}, {"dy", r.motion_step.dy}, {"zoom", r.motion_step.zoom}}}});
    }
    write_text(io::join_path(out, "records.json"), json{{"seed", seed}, {"tuples", records}}.dump(2) + "\n");
    return 0;
}

int olat_synth(int lights, int size, const std::string& out) {
    const auto scene = toy::LambertianScene::sphere(size);
    const auto stack = toy::render_olat_stack(scene, SphereLayout::make_default(static_cast<std::size_t>(lights)));
    std::cout << io::save_stack(out, stack) << "\n";
    return 0;
}

// ---- token ----

int token_encode(const std::string& lights, std::size_t k, int octaves, double exposure, bool auto_exposure,
                 const std::string& out) {
    token::TokenConfig config;
    config.anchors = k;
    config.octaves = octaves;
    config.exposure_ref = exposure;
    config.auto_exposure = auto_exposure;
    const auto condition = io::load_lighting(lights);
    const auto tokens = token::raw_tokens(condition, config);
    json list = json::array();
    for (const auto& t : tokens) list.push_back({{"anchor", t.anchor}, {"features", t.features}});
    json j{{"anchors", k},
           {"octaves", octaves},
           {"gammas", config.gammas},
           {"direction_dim", config.direction_dim()},
           {"raw_dim", config.raw_dim()},
           {"tokens", list}};
    write_text(out, j.dump(2) + "\n");
    return 0;
}

// ---- toy ----

toy::ToyRunConfig load_run_config(const std::string& path) {
    return path.empty() ? toy::ToyRunConfig::defaults() : toy::ToyRunConfig::from_json(read_json_file(path));
}

std::vector<bipack::TrainingTuple> held_out_set(const toy::ToyRunConfig& rc, std::uint64_t seed) {
    const auto scene = toy::LambertianScene::sphere(rc.scene_size);
    return toy::make_toy_dataset(scene, rc.eval_samples, seed ^ 0x9e3779b97f4a7c15ULL, rc.data);
}

int toy_train(const std::string& config_path, std::uint64_t seed, const std::string& out, const std::string& report) {
    auto rc = load_run_config(config_path);
    rc.model.grid_height = rc.model.grid_width = rc.scene_size / rc.model.patch;
    rc.train.seed = seed;
    const auto scene = toy::LambertianScene::sphere(rc.scene_size);
    const auto data = toy::make_toy_dataset(scene, rc.train_samples, seed, rc.data);
    toy::ToyModel model(rc.model, seed);
    log::info(fmt::format("training {} parameters for {} steps", model.parameter_count(), rc.train.steps));
    double window = 0.0;
    rc.train.on_step = [&](int step, double loss) {
        window += loss;
        if ((step + 1) % 500 == 0) {
            log::info(fmt::format("step {} loss {:.5f}", step + 1, window / 500.0));
            window = 0.0;
        }
    };
    toy::TrainLog tl;
    try {
        tl = toy::train(model, data, rc.train);
    } catch (const toy::TrainingDivergence& e) {
        model.restore(e.checkpoint());
        model.save(out + ".diverged");
        throw;
    }
    model.save(out);
    if (!report.empty()) {
        json j{{"config", rc.to_json()}, {"seed", seed}, {"seconds", tl.seconds}, {"losses", tl.losses},
               {"parameters", model.parameter_count()}};
        write_text(report, j.dump() + "\n");
    }
    std::cout << json{{"model", out}, {"steps", tl.losses.size()}, {"seconds", tl.seconds},
                      {"final_loss", tl.losses.empty() ? 0.0 : tl.losses.back()}}
                     .dump()
              << "\n";
    return 0;
}

int toy_eval(const std::string& model_path, const std::string& config_path, std::uint64_t seed, int steps,
             const std::string& report) {
    const auto model = toy::ToyModel::load(model_path);
    auto rc = load_run_config(config_path);
    if (steps > 0) rc.eval_steps = steps;
    const auto held = held_out_set(rc, seed);
    const auto r = toy::evaluate(model, held, rc.eval_steps, seed);
    json j = r.to_json();
    j["steps"] = rc.eval_steps;
    write_text(report, j.dump(2) + "\n");
    if (report.empty() || report == "-") return 0;
    std::cout << fmt::format("mean PSNR {:.2f} dB (min {:.2f}, static {:.2f}, dynamic {:.2f})\n", r.mean_psnr,
                             r.min_psnr, r.mean_static, r.mean_dynamic);
    return 0;
}

// ---- blend ----

int blend_plan(const std::string& spec, const std::string& out) {
    const auto plan = blend::parse_plan(spec);
    json windows = json::array();
    for (std::size_t w = 0; w < plan.windows.size(); ++w)
        windows.push_back({{"start", plan.windows[w].start}, {"end", plan.windows[w].end}, {"weights", plan.weights[w]}});
    double worst = 0.0;
    for (int f = 0; f < plan.frames; ++f) {
        double s = 0.0;
        for (std::size_t w = 0; w < plan.windows.size(); ++w) s += plan.normalized_weight(w, f);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    json j{{"frames", plan.frames},
           {"window", plan.window},
           {"stride", plan.stride},
           {"windows", windows},
           {"max_partition_error", worst}};
    write_text(out, j.dump(2) + "\n");
    return 0;
}

// ---- metrics ----

metrics::FlowField flow_from_image(const Image& img) {
    metrics::FlowField f;
    f.width = img.width();
    f.height = img.height();
    f.data.resize(2 * img.pixel_count());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const auto i = static_cast<std::size_t>(y) * img.width() + x;
            f.data[2 * i] = img.at(x, y, 0);
            f.data[2 * i + 1] = img.at(x, y, 1);
        }
    return f;
}

int metrics_cmd(const std::string& pred_dir, const std::string& gt_dir, const std::string& mask_dir,
                const std::string& flow_dir, const std::string& report) {
    const auto pred_files = io::list_pfm(pred_dir);
    const auto gt_files = io::list_pfm(gt_dir);
    if (pred_files.size() != gt_files.size() || pred_files.empty())
        throw InvalidArgument("prediction and ground-truth directories need the same nonzero number of frames");
    std::vector<std::string> mask_files;
    if (!mask_dir.empty()) {
        mask_files = io::list_pfm(mask_dir);
        if (mask_files.size() != 1 && mask_files.size() != pred_files.size())
            throw InvalidArgument("mask directory needs one mask or one per frame");
    }
    std::vector<Image> pred;
    json frames = json::array();
    double sum_psnr = 0.0, sum_ssim = 0.0;
    std::vector<metrics::EvalMask> masks;
    for (const auto& m : mask_files) masks.push_back(metrics::EvalMask::from_image(io::read_pfm(m)));
    for (std::size_t i = 0; i < pred_files.size(); ++i) {
        pred.push_back(io::read_pfm(pred_files[i]));
        const Image gt = io::read_pfm(gt_files[i]);
        const metrics::EvalMask* mask = masks.empty() ? nullptr : &masks[masks.size() == 1 ? 0 : i];
        const double p = metrics::psnr(pred.back(), gt, mask);
        const double s = metrics::ssim(pred.back(), gt, mask);
        sum_psnr += p;
        sum_ssim += s;
        frames.push_back({{"frame", fs::path(pred_files[i]).filename().string()}, {"psnr", p}, {"ssim", s}});
    }
    const auto n = static_cast<double>(pred_files.size());
    json j{{"frames", frames}, {"aggregate", {{"psnr", sum_psnr / n}, {"ssim", sum_ssim / n}}}};
    if (pred.size() > 1) {
        std::vector<metrics::FlowField> flows;
        if (!flow_dir.empty()) {
            for (const auto& f : io::list_pfm(flow_dir)) flows.push_back(flow_from_image(io::read_pfm(f)));
            if (flows.size() != pred.size() - 1) throw InvalidArgument("flow directory needs one field per frame pair");
        } else {
            for (std::size_t i = 0; i + 1 < gt_files.size(); ++i)
                flows.push_back(metrics::block_matching_flow(io::read_pfm(gt_files[i]), io::read_pfm(gt_files[i + 1])));
        }
        const metrics::EvalMask* mask = masks.size() == 1 ? &masks[0] : nullptr;
        j["aggregate"]["t_psnr"] = metrics::t_psnr(pred, flows, mask);
        j["aggregate"]["flow_source"] = flow_dir.empty() ? "block_matching" : "file";
    }
    write_text(report, j.dump(2) + "\n");
    return 0;
}

// ---- serve ----

int serve_cmd(const std::string& stack_path, const std::string& hdri_dir, const std::string& bind, int max_side) {
    auto stack = io::load_stack(stack_path);
    std::vector<std::pair<std::string, olat::HdriImage>> hdris;
    if (!hdri_dir.empty()) hdris = io::load_hdri_dir(hdri_dir);
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--bind", "expected host:port");
    const std::string host = bind.substr(0, colon);
    const int port = std::stoi(bind.substr(colon + 1));
    io::ServiceOptions options;
    options.max_side = max_side;
    const io::PreviewService service(std::move(stack), std::move(hdris), options);
    std::cerr << fmt::format("relux: serving on http://{}:{}\n", host, port);
    service.serve(host, port);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    log::init_from_env();
    CLI::App app{"relux: light-stage relighting toolkit"};
    app.require_subcommand(1);
    Common common;
    int code = 0;

    // bipack
    auto* bipack_cmd = app.add_subcommand("bipack", "Bi-pack capture schedules");
    bipack_cmd->require_subcommand(1);
    std::string seq_a, seq_b, in_dir, sched;
    std::int64_t rate = 120;
    double duration = 0.0, threshold = 60.0, bound = 2.0;
    auto* gen = bipack_cmd->add_subcommand("gen", "Interleave two lighting sequences into a schedule");
    gen->add_option("--seq-a", seq_a, "Sequence A (JSON)")->required();
    gen->add_option("--seq-b", seq_b, "Sequence B (JSON)")->required();
    gen->add_option("--rate", rate, "Global frame rate in Hz");
    gen->add_option("--duration", duration, "Seconds (default: shorter sequence)");
    add_common(gen, common);
    gen->callback([&] { code = bipack_gen(seq_a, seq_b, rate, duration, common.output); });
    auto* demux = bipack_cmd->add_subcommand("demux", "Split a captured stream into A and B");
    demux->add_option("--in", in_dir, "Frame stream directory")->required();
    demux->add_option("--sched", sched, "Schedule (JSONL)")->required();
    add_common(demux, common);
    demux->callback([&] {
        if (common.output.empty()) throw CLI::ValidationError("-o", "output directory required");
        code = bipack_demux(in_dir, sched, common.output);
    });
    auto* check = bipack_cmd->add_subcommand("check", "Validate flicker constraints of a schedule");
    check->add_option("schedule", sched, "Schedule (JSONL)")->required();
    check->add_option("--threshold", threshold, "Per-stream fusion threshold in Hz");
    check->add_option("--bound", bound, "Largest lighting change rate in Hz");
    check->callback([&] { code = bipack_check(sched, threshold, bound); });

    // olat
    auto* olat_cmd = app.add_subcommand("olat", "OLAT compositing and datasets");
    olat_cmd->require_subcommand(1);
    std::string stack_path, lights_path, hdri_path, hdri_dir;
    double rot = 0.0, exposure = 1.0;
    bool snap = false;
    int n = 50, frames = 16, synth_lights = 64, synth_size = 64;
    auto* comp = olat_cmd->add_subcommand("composite", "Relight a stack by an HDRI or a light list");
    comp->add_option("--stack", stack_path, "Stack manifest")->required();
    comp->add_option("--hdri", hdri_path, "Equirectangular environment (PFM)");
    comp->add_option("--lights", lights_path, "Lighting condition (JSON)");
    comp->add_option("--rot", rot, "Environment rotation about +y in degrees");
    comp->add_option("--exposure", exposure, "Exposure for PNG output");
    comp->add_flag("--snap", snap, "Move each light to its nearest stage light instead of requiring a 1 degree match");
    add_common(comp, common);
    comp->callback([&] {
        if (common.output.empty()) throw CLI::ValidationError("-o", "output image required");
        code = olat_composite(stack_path, lights_path, hdri_path, rot, exposure, snap, common.output);
    });
    auto* ds = olat_cmd->add_subcommand("dataset", "Build relighting tuples from a stack and HDRIs");
    ds->add_option("--stack", stack_path, "Stack manifest")->required();
    ds->add_option("--hdris", hdri_dir, "Directory of PFM environments")->required();
    ds->add_option("--n", n, "Number of tuples");
    ds->add_option("--frames", frames, "Frames per tuple");
    add_common(ds, common);
    ds->callback([&] {
        if (common.output.empty()) throw CLI::ValidationError("-o", "output directory required");
        code = olat_dataset(stack_path, hdri_dir, n, frames, common.seed, common.output);
    });
    auto* synth = olat_cmd->add_subcommand("synth", "Render the OLAT stack of a Lambertian sphere");
    synth->add_option("--lights", synth_lights, "Number of stage lights");
    synth->add_option("--size", synth_size, "Image side in pixels");
    add_common(synth, common);
    synth->callback([&] {
        if (common.output.empty()) throw CLI::ValidationError("-o", "output directory required");
        code = olat_synth(synth_lights, synth_size, common.output);
    });

    // token
    auto* token_cmd = app.add_subcommand("token", "Light tokens");
    token_cmd->require_subcommand(1);
    std::size_t k = 128;
    int octaves = 4;
    double exposure_ref = 1.0;
    bool auto_exposure = false;
    auto* enc = token_cmd->add_subcommand("encode", "Emit raw tokens of a lighting condition");
    enc->add_option("--lights", lights_path, "Lighting condition (JSON)")->required();
    enc->add_option("--k", k, "Anchor count");
    enc->add_option("--octaves", octaves, "Fourier octaves");
    enc->add_option("--exposure-ref", exposure_ref, "Intensity normalizer");
    enc->add_flag("--auto-exposure", auto_exposure, "Normalize by the mean light luminance");
    add_common(enc, common);
    enc->callback([&] { code = token_encode(lights_path, k, octaves, exposure_ref, auto_exposure, common.output); });

    // toy
    auto* toy_cmd = app.add_subcommand("toy", "Toy relighting model");
    toy_cmd->require_subcommand(1);
    std::string config_path, model_path, report_path;
    int eval_steps = 0;
    auto* tr = toy_cmd->add_subcommand("train", "Train on the synthetic Lambertian dataset");
    tr->add_option("--config", config_path, "Run configuration (JSON)");
    tr->add_option("--report", report_path, "Training log (JSON)");
    add_common(tr, common);
    tr->callback([&] {
        if (common.output.empty()) throw CLI::ValidationError("-o", "model path required");
        code = toy_train(config_path, common.seed, common.output, report_path);
    });
    auto* ev = toy_cmd->add_subcommand("eval", "Evaluate a trained model on held-out lightings");
    ev->add_option("--model", model_path, "Model file")->required();
    ev->add_option("--config", config_path, "Run configuration (JSON)");
    ev->add_option("--report", report_path, "Report path (JSON)");
    ev->add_option("--steps", eval_steps, "Sampling steps");
    add_common(ev, common, false);
    ev->callback([&] { code = toy_eval(model_path, config_path, common.seed, eval_steps, report_path); });

    // blend
    auto* blend_cmd = app.add_subcommand("blend", "Overlapping window plans");
    std::string plan_spec;
    blend_cmd->add_option("--plan", plan_spec, "Plan such as N=200,W=37,S=18")->required();
    add_common(blend_cmd, common);
    blend_cmd->callback([&] { code = blend_plan(plan_spec, common.output); });

    // metrics
    auto* metrics_app = app.add_subcommand("metrics", "PSNR, SSIM and T-PSNR of frame directories");
    std::string pred_dir, gt_dir, mask_dir, flow_dir;
    metrics_app->add_option("--pred", pred_dir, "Predicted frames (PFM)")->required();
    metrics_app->add_option("--gt", gt_dir, "Ground-truth frames (PFM)")->required();
    metrics_app->add_option("--mask", mask_dir, "Masks (PFM, one or one per frame)");
    metrics_app->add_option("--flows", flow_dir, "Flow fields (PFM, dx in R and dy in G)");
    metrics_app->add_option("--report", report_path, "Report path (JSON)");
    add_common(metrics_app, common, false);
    metrics_app->callback([&] { code = metrics_cmd(pred_dir, gt_dir, mask_dir, flow_dir, report_path); });

    // serve
    auto* serve_app = app.add_subcommand("serve", "Preview HTTP service");
    std::string bind = "127.0.0.1:8080";
    int max_side = 256;
    serve_app->add_option("--stack", stack_path, "Stack manifest")->required();
    serve_app->add_option("--hdris", hdri_dir, "Directory of PFM environments");
    serve_app->add_option("--bind", bind, "host:port");
    serve_app->add_option("--max-side", max_side, "Preview resolution");
    add_common(serve_app, common, false);
    serve_app->callback([&] { code = serve_cmd(stack_path, hdri_dir, bind, max_side); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageError;
    } catch (const std::exception& e) {
        // Bad inputs, malformed files and hash mismatches all land here.
        std::cerr << "relux: " << e.what() << "\n";
        return kDataError;
    }
    return code;
}
