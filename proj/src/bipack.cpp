#include "relux/bipack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relux/error.hpp"

namespace relux::bipack {

namespace {

constexpr double kTimeTolerance = 1e-9;

LightingCondition lerp_condition(const LightingCondition& a, const LightingCondition& b, double f) {
    LightingCondition out = a;
    for (std::size_t i = 0; i < out.lights.size(); ++i) {
        const Rgb& x = a.lights[i].intensity;
        const Rgb& y = b.lights[i].intensity;
        out.lights[i].intensity = {x.r + f * (y.r - x.r), x.g + f * (y.g - x.g), x.b + f * (y.b - x.b)};
    }
    return out;
}

bool same_lighting(const LightingCondition& a, const LightingCondition& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a.lights[i].direction == b.lights[i].direction) || !(a.lights[i].intensity == b.lights[i].intensity))
            return false;
    }
    return true;
}

}  // namespace

char tag_char(StreamTag tag) { return tag == StreamTag::A ? 'A' : 'B'; }

double LightingSequence::duration() const {
    if (keyframes.size() <= 1) return std::numeric_limits<double>::infinity();
    return static_cast<double>(keyframes.size() - 1) / keyframe_rate;
}

void LightingSequence::validate() const {
    if (keyframes.empty()) throw InvalidArgument("lighting sequence has no keyframes");
    if (!(keyframe_rate > 0.0) || !(playback_rate > 0.0)) throw InvalidArgument("sequence rates must be positive");
    const auto& first = keyframes.front();
    for (const auto& k : keyframes) {
        k.validate();
        if (k.size() != first.size()) throw InvalidArgument("keyframes differ in light count");
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (!(k.lights[i].direction == first.lights[i].direction))
                throw InvalidArgument("keyframes differ in light directions");
        }
    }
}

namespace {

LightingCondition interpolate_unchecked(const LightingSequence& seq, double t) {
    if (!(t >= 0.0) || t > seq.duration() + kTimeTolerance) {
        throw InvalidArgument("time " + std::to_string(t) + " outside the sequence");
    }
    if (seq.keyframes.size() == 1) return seq.keyframes.front();

    const double pos = t * seq.keyframe_rate;
    const double nearest = std::round(pos);
    const auto last = seq.keyframes.size() - 1;
    if (std::abs(pos - nearest) <= kTimeTolerance * std::max(1.0, seq.keyframe_rate)) {
        return seq.keyframes[std::min(static_cast<std::size_t>(nearest), last)];
    }
    const auto k = std::min(static_cast<std::size_t>(std::floor(pos)), last - 1);
    return lerp_condition(seq.keyframes[k], seq.keyframes[k + 1], pos - static_cast<double>(k));
}

}  // namespace

LightingCondition interpolate_sequence(const LightingSequence& seq, double t) {
    seq.validate();
    return interpolate_unchecked(seq, t);
}

BiPackSchedule build_bipack(const LightingSequence& a, const LightingSequence& b, std::int64_t global_rate,
                            double duration) {
    if (global_rate <= 0 || global_rate % 2 != 0) throw InvalidArgument("global rate must be a positive even integer");
    if (!(duration >= 0.0)) throw InvalidArgument("duration must be nonnegative");
    a.validate();
    b.validate();
    if (duration > a.duration() + kTimeTolerance || duration > b.duration() + kTimeTolerance) {
        throw InvalidArgument("duration exceeds a lighting sequence");
    }

    const double exact = duration * static_cast<double>(global_rate);
    const double rounded = std::round(exact);
    const auto count = static_cast<std::int64_t>(std::abs(exact - rounded) < 1e-6 ? rounded : std::floor(exact));

    BiPackSchedule schedule;
    schedule.global_rate = global_rate;
    schedule.keyframe_rate_a = a.keyframe_rate;
    schedule.keyframe_rate_b = b.keyframe_rate;
    schedule.entries.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        const Rational time{i, global_rate};
        const bool is_a = i % 2 == 0;
        schedule.entries.push_back({i, is_a ? StreamTag::A : StreamTag::B,
                                    interpolate_unchecked(is_a ? a : b, std::min(time.value(), duration)), time});
    }
    return schedule;
}

double estimate_change_rate(const BiPackSchedule& schedule, StreamTag tag) {
    std::vector<std::vector<double>> samples;
    for (const auto& e : schedule.entries) {
        if (e.tag != tag) continue;
        std::vector<double> v;
        v.reserve(e.lighting.size() * 3);
        for (const auto& l : e.lighting.lights) {
            v.push_back(l.intensity.r);
            v.push_back(l.intensity.g);
            v.push_back(l.intensity.b);
        }
        samples.push_back(std::move(v));
    }
    if (samples.size() < 3) return 0.0;

    double scale = 0.0;
    for (const auto& s : samples)
        for (double x : s) scale = std::max(scale, std::abs(x));
    const double tol = 1e-9 * scale + 1e-12;

    // A keyframe shows up as a kink; one that falls between two samples kinks both neighbours.
    std::size_t clusters = 0;
    bool previous_kink = false;
    for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
        double worst = 0.0;
        for (std::size_t c = 0; c < samples[k].size(); ++c) {
            worst = std::max(worst, std::abs(samples[k + 1][c] - 2.0 * samples[k][c] + samples[k - 1][c]));
        }
        const bool kink = worst > tol;
        if (kink && !previous_kink) ++clusters;
        previous_kink = kink;
    }
    const double span = static_cast<double>(samples.size()) / schedule.stream_rate();
    return static_cast<double>(clusters) / span;
}

FlickerReport validate_flicker(const BiPackSchedule& schedule, double fusion_threshold, double slow_change_bound) {
    FlickerReport report;
    report.fusion_threshold = fusion_threshold;
    report.slow_change_bound = slow_change_bound;
    report.stream_rate = schedule.stream_rate();

    if (schedule.keyframe_rate_a && schedule.keyframe_rate_b) {
        report.change_rate = std::max(*schedule.keyframe_rate_a, *schedule.keyframe_rate_b);
    } else {
        report.change_rate =
            std::max(estimate_change_rate(schedule, StreamTag::A), estimate_change_rate(schedule, StreamTag::B));
    }

    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        const auto& e = schedule.entries[i];
        const StreamTag expected = i % 2 == 0 ? StreamTag::A : StreamTag::B;
        if (e.index != static_cast<std::int64_t>(i) || e.tag != expected) {
            report.failures.push_back("entry " + std::to_string(i) + " breaks A/B alternation");
            break;
        }
        if (!same_value(e.time, Rational{e.index, schedule.global_rate})) {
            report.failures.push_back("entry " + std::to_string(i) + " timestamp is not index/global_rate");
            break;
        }
    }
    if (report.stream_rate < fusion_threshold) {
        report.failures.push_back("per-stream rate " + std::to_string(report.stream_rate) +
                                  " Hz is below the flicker fusion threshold " + std::to_string(fusion_threshold) +
                                  " Hz");
    }
    if (report.change_rate > slow_change_bound) {
        report.failures.push_back("lighting changes at " + std::to_string(report.change_rate) +
                                  " Hz, above the slow-change bound " + std::to_string(slow_change_bound) + " Hz");
    }
    report.pass = report.failures.empty();
    return report;
}

void FrameStream::validate() const {
    if (rate.num <= 0 || rate.den <= 0) throw InvalidArgument("stream rate must be positive");
    const double period = 1.0 / rate.value();
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const double dt = frames[i].time.value() - frames[i - 1].time.value();
        if (!(dt > 0.0) || std::abs(dt - period) > kTimeTolerance) {
            throw InvalidArgument("frame " + std::to_string(i) + " breaks uniform timestamps");
        }
    }
}

void TrainingTuple::validate() const {
    if (input_video.size() != target_video.size()) throw InvalidArgument("tuple videos differ in frame count");
    if (target_lighting.keyframes.size() != target_video.size())
        throw InvalidArgument("tuple lighting count differs from frame count");
    for (std::size_t i = 0; i < input_video.size(); ++i) {
        if (!same_value(input_video.frames[i].time, target_video.frames[i].time))
            throw InvalidArgument("tuple timestamps differ at frame " + std::to_string(i));
        if (target_video.frames[i].interpolated)
            throw InvalidArgument("interpolated frame on the target side at " + std::to_string(i));
        if (!same_lighting(target_video.frames[i].lighting, target_lighting.keyframes[i]))
            throw InvalidArgument("target frame lighting differs from target lighting at " + std::to_string(i));
    }
}

FrameStream mux(const FrameStream& a, const FrameStream& b) {
    if (a.size() != b.size() && a.size() != b.size() + 1) throw InvalidArgument("streams cannot be interleaved");
    FrameStream out;
    out.rate = {a.rate.num * 2, a.rate.den};
    out.frames.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.frames.push_back(a.frames[i]);
        if (i < b.size()) out.frames.push_back(b.frames[i]);
    }
    return out;
}

std::pair<FrameStream, FrameStream> demux(const FrameStream& stream, const BiPackSchedule& schedule) {
    if (stream.size() != schedule.entries.size())
        throw InvalidArgument("stream has " + std::to_string(stream.size()) + " frames, schedule has " +
                              std::to_string(schedule.entries.size()));
    if (!same_value(stream.rate, Rational{schedule.global_rate, 1}))
        throw InvalidArgument("stream rate does not match the schedule rate");

    std::pair<FrameStream, FrameStream> out;
    out.first.rate = {schedule.global_rate, 2};
    out.second.rate = {schedule.global_rate, 2};
    for (std::size_t i = 0; i < stream.size(); ++i) {
        Frame f = stream.frames[i];
        if (f.lighting.empty()) f.lighting = schedule.entries[i].lighting;
        (schedule.entries[i].tag == StreamTag::A ? out.first : out.second).frames.push_back(std::move(f));
    }
    return out;
}

Image linear_interpolate(const Image& a, const Image& b, double alpha) {
    if (!a.same_shape(b)) throw InvalidArgument("interpolated frames differ in size");
    Image out = a;
    auto dst = out.data();
    auto src = b.data();
    const auto f = static_cast<float>(alpha);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = dst[i] + f * (src[i] - dst[i]);
    return out;
}

namespace {

// Builds (source resampled to target timestamps, target lighting, target) over the target frames
// bracketed by source frames.
TrainingTuple resample_onto(const FrameStream& source, const FrameStream& target,
                            const FrameInterpolator& interpolator) {
    TrainingTuple tuple;
    tuple.input_video.rate = target.rate;
    tuple.target_video.rate = target.rate;
    tuple.target_lighting.keyframe_rate = target.rate.value();
    tuple.target_lighting.playback_rate = target.rate.value();

    std::size_t k = 0;
    for (const auto& tf : target.frames) {
        while (k + 1 < source.size() && !less(tf.time, source.frames[k + 1].time)) ++k;
        if (k + 1 >= source.size() || less(tf.time, source.frames[k].time)) continue;
        const Frame& f0 = source.frames[k];
        const Frame& f1 = source.frames[k + 1];

        // alpha = (t - t0) / (t1 - t0), evaluated on integers.
        const std::int64_t t = tf.time.num * f0.time.den * f1.time.den;
        const std::int64_t t0 = f0.time.num * tf.time.den * f1.time.den;
        const std::int64_t t1 = f1.time.num * tf.time.den * f0.time.den;
        const double alpha = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);

        Frame mid;
        mid.time = tf.time;
        mid.interpolated = alpha != 0.0;
        mid.image = alpha == 0.0 ? f0.image : interpolator(f0.image, f1.image, alpha);
        mid.lighting = (f0.lighting.size() == f1.lighting.size() && !f0.lighting.empty())
                           ? lerp_condition(f0.lighting, f1.lighting, alpha)
                           : f0.lighting;
        tuple.input_video.frames.push_back(std::move(mid));
        tuple.target_video.frames.push_back(tf);
        tuple.target_lighting.keyframes.push_back(tf.lighting);
    }
    return tuple;
}

}  // namespace

std::pair<TrainingTuple, TrainingTuple> align_pair(const FrameStream& a, const FrameStream& b,
                                                   const FrameInterpolator& interpolator) {
    if (a.size() < 2 || b.size() < 2) throw InvalidArgument("alignment needs at least two frames per stream");
    a.validate();
    b.validate();
    return {resample_onto(a, b, interpolator), resample_onto(b, a, interpolator)};
}

}  // namespace relux::bipack
