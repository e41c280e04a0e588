#include "relux/window_blend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "relux/error.hpp"

namespace relux::blend {

namespace {

// Rising half of a raised cosine over an overlap of n frames; strictly inside (0, 1).
double ramp(int i, int n) {
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (i + 1) / (n + 1)));
}

}  // namespace

WindowPlan plan_windows(int frames, int window, int stride) {
    if (stride <= 0) throw InvalidArgument("stride must be positive");
    if (frames < 1 || window < 1) throw InvalidArgument("frame count and window length must be positive");
    if (stride > window) throw InvalidArgument("stride larger than the window leaves gaps");

    WindowPlan plan;
    plan.frames = frames;
    plan.window = std::min(window, frames);
    plan.stride = stride;
    if (window >= frames) {
        plan.windows.push_back({0, frames});
    } else {
        for (int s = 0; s + window < frames; s += stride) plan.windows.push_back({s, s + window});
        plan.windows.push_back({frames - window, frames});
    }

    plan.weights.resize(plan.windows.size());
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        const Window& win = plan.windows[w];
        const int left = w > 0 ? std::max(0, plan.windows[w - 1].end - win.start) : 0;
        const int right = w + 1 < plan.windows.size() ? std::max(0, win.end - plan.windows[w + 1].start) : 0;
        auto& wt = plan.weights[w];
        wt.assign(static_cast<std::size_t>(win.length()), 1.0);
        for (int i = 0; i < left; ++i) wt[static_cast<std::size_t>(i)] = ramp(i, left);
        for (int i = 0; i < right; ++i) {
            const int local = win.length() - right + i;
            wt[static_cast<std::size_t>(local)] = std::min(wt[static_cast<std::size_t>(local)], ramp(right - 1 - i, right));
        }
    }
    return plan;
}

WindowPlan parse_plan(const std::string& spec) {
    std::map<char, int> values;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq != 1) throw InvalidArgument("plan entries look like N=200: '" + item + "'");
        try {
            values[item[0]] = std::stoi(item.substr(2));
        } catch (const std::exception&) {
            throw InvalidArgument("bad number in plan entry '" + item + "'");
        }
    }
    if (!values.count('N') || !values.count('W')) throw InvalidArgument("plan needs N and W");
    const int w = values['W'];
    const int s = values.count('S') ? values['S'] : std::max(1, w / 2);
    return plan_windows(values['N'], w, s);
}

double WindowPlan::normalized_weight(std::size_t w, int f) const {
    const Window& win = windows.at(w);
    if (f < win.start || f >= win.end) return 0.0;
    double total = 0.0;
    for (std::size_t o = 0; o < windows.size(); ++o) {
        if (f >= windows[o].start && f < windows[o].end)
            total += weights[o][static_cast<std::size_t>(f - windows[o].start)];
    }
    return weights[w][static_cast<std::size_t>(f - win.start)] / total;
}

int WindowPlan::coverage(int f) const {
    int n = 0;
    for (const auto& win : windows) n += (f >= win.start && f < win.end) ? 1 : 0;
    return n;
}

Frames blend(const std::vector<Frames>& predictions, const WindowPlan& plan) {
    if (predictions.size() != plan.windows.size())
        throw InvalidArgument("expected " + std::to_string(plan.windows.size()) + " window predictions");
    std::size_t frame_size = 0;
    for (std::size_t w = 0; w < predictions.size(); ++w) {
        if (predictions[w].size() != static_cast<std::size_t>(plan.windows[w].length()))
            throw InvalidArgument("prediction length differs from window " + std::to_string(w));
        for (const auto& f : predictions[w]) {
            if (frame_size == 0) frame_size = f.size();
            if (f.size() != frame_size) throw InvalidArgument("predicted frames differ in size");
        }
    }

    Frames out(static_cast<std::size_t>(plan.frames));
    std::vector<double> total(static_cast<std::size_t>(plan.frames), 0.0);
    std::vector<int> sole(static_cast<std::size_t>(plan.frames), -1);
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        for (int f = plan.windows[w].start; f < plan.windows[w].end; ++f) {
            const auto fi = static_cast<std::size_t>(f);
            total[fi] += plan.weights[w][static_cast<std::size_t>(f - plan.windows[w].start)];
            sole[fi] = plan.coverage(f) == 1 ? static_cast<int>(w) : -1;
        }
    }
    for (std::size_t f = 0; f < out.size(); ++f) {
        if (sole[f] >= 0) {
            const auto w = static_cast<std::size_t>(sole[f]);
            out[f] = predictions[w][f - static_cast<std::size_t>(plan.windows[w].start)];
        } else {
            out[f].assign(frame_size, 0.0);
        }
    }
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        for (int f = plan.windows[w].start; f < plan.windows[w].end; ++f) {
            const auto fi = static_cast<std::size_t>(f);
            if (sole[fi] >= 0) continue;
            const auto local = static_cast<std::size_t>(f - plan.windows[w].start);
            const double weight = plan.weights[w][local] / total[fi];
            const auto& src = predictions[w][local];
            auto& dst = out[fi];
            for (std::size_t i = 0; i < frame_size; ++i) dst[i] += weight * src[i];
        }
    }
    return out;
}

}  // namespace relux::blend
