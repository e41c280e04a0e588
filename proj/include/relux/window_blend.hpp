#pragma once

// Overlapping temporal windows for long-video inference, fused by normalized
// weighted averaging with raised-cosine tapers across each overlap.

#include <string>
#include <vector>

namespace relux::blend {

struct Window {
    int start = 0;
    int end = 0;  // exclusive

    int length() const { return end - start; }
};

struct WindowPlan {
    int frames = 0;
    int window = 0;
    int stride = 0;
    std::vector<Window> windows;
    /// weights[w][i]: weight of local frame i in window w, before normalization.
    std::vector<std::vector<double>> weights;

    /// Normalized weight of window w at global frame f (0 outside the window).
    double normalized_weight(std::size_t w, int f) const;
    /// Number of windows covering frame f.
    int coverage(int f) const;
};

/// Windows start at 0, S, 2S, ...; the last is right-aligned to end at N. W >= N gives one window.
WindowPlan plan_windows(int frames, int window, int stride);

/// Parses "N=200,W=37,S=18". S defaults to W/2 when omitted.
WindowPlan parse_plan(const std::string& spec);

/// Per-window predictions: predictions[w][i] is the flattened tensor of local frame i.
using Frames = std::vector<std::vector<double>>;

/// Fused frame f = sum_w weight_w(f) pred_w(f) / sum_w weight_w(f). Frames covered by one window are copied.
Frames blend(const std::vector<Frames>& predictions, const WindowPlan& plan);

}  // namespace relux::blend
