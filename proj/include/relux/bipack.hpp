#pragma once

// Bi-pack capture: two slowly varying lighting sequences interleaved frame by
// frame at a rate above flicker fusion, then split back into two videos and
// resampled onto each other's timestamps to form pixel-aligned training pairs.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relux/geometry.hpp"
#include "relux/image.hpp"

namespace relux::bipack {

/// Exact time in seconds as num/den. Schedules use den = frame rate, num = frame index.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    /// Compares values, not representations.
    friend bool same_value(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
    friend bool less(const Rational& a, const Rational& b) { return a.num * b.den < b.num * a.den; }
    bool operator==(const Rational&) const = default;
};

struct LightingSequence {
    std::vector<LightingCondition> keyframes;
    double keyframe_rate = 1.0;   // Hz
    double playback_rate = 60.0;  // Hz

    /// Seconds covered. A single keyframe holds constant for all t >= 0.
    double duration() const;
    /// Throws InvalidArgument unless nonempty with consistent light count and directions.
    void validate() const;
};

/// Lighting at time t (seconds): per-light linear blend of the bracketing keyframes.
LightingCondition interpolate_sequence(const LightingSequence& seq, double t);

enum class StreamTag { A, B };
char tag_char(StreamTag tag);

struct ScheduleEntry {
    std::int64_t index = 0;
    StreamTag tag = StreamTag::A;
    LightingCondition lighting;
    Rational time;
};

struct BiPackSchedule {
    std::int64_t global_rate = 120;
    std::vector<ScheduleEntry> entries;
    /// Keyframe rates of the source sequences, when known.
    std::optional<double> keyframe_rate_a;
    std::optional<double> keyframe_rate_b;

    double stream_rate() const { return static_cast<double>(global_rate) / 2.0; }
};

/// Frame 2k carries A at 2k/rate, frame 2k+1 carries B at (2k+1)/rate.
BiPackSchedule build_bipack(const LightingSequence& a, const LightingSequence& b, std::int64_t global_rate,
                            double duration);

struct FlickerReport {
    bool pass = false;
    double stream_rate = 0.0;
    double change_rate = 0.0;
    double fusion_threshold = 0.0;
    double slow_change_bound = 0.0;
    std::vector<std::string> failures;
};

/// Per-stream rate must reach `fusion_threshold` and lighting may change at most `slow_change_bound` times a second.
FlickerReport validate_flicker(const BiPackSchedule& schedule, double fusion_threshold = 60.0,
                               double slow_change_bound = 2.0);

/// Keyframe rate recovered from one stream's intensities: slope changes of the piecewise linear trajectory per second.
double estimate_change_rate(const BiPackSchedule& schedule, StreamTag tag);

struct Frame {
    Image image;
    Rational time;
    LightingCondition lighting;
    bool interpolated = false;
};

struct FrameStream {
    std::vector<Frame> frames;
    Rational rate{60, 1};  // Hz

    std::size_t size() const { return frames.size(); }
    /// Strictly increasing timestamps spaced 1/rate apart within 1e-9 s.
    void validate() const;
};

/// Input video, the lighting the output should carry per frame, and the captured output.
struct TrainingTuple {
    FrameStream input_video;
    LightingSequence target_lighting;
    FrameStream target_video;

    /// Equal frame counts, identical timestamps, target frames carry target_lighting, target never interpolated.
    void validate() const;
};

/// Interleaves two streams (A first). Used to simulate a capture.
FrameStream mux(const FrameStream& a, const FrameStream& b);

std::pair<FrameStream, FrameStream> demux(const FrameStream& stream, const BiPackSchedule& schedule);

/// Produces the frame between `a` and `b` at fraction alpha in [0, 1].
using FrameInterpolator = std::function<Image(const Image& a, const Image& b, double alpha)>;

/// Per-pixel a + alpha * (b - a).
Image linear_interpolate(const Image& a, const Image& b, double alpha);

/// Resamples each stream onto the other's timestamps. Returns (V_A', L_B, V_B) and (V_B', L_A, V_A);
/// target frames without a bracketing pair on the input side are dropped.
std::pair<TrainingTuple, TrainingTuple> align_pair(const FrameStream& a, const FrameStream& b,
                                                   const FrameInterpolator& interpolator = linear_interpolate);

}  // namespace relux::bipack
