#pragma once

// JSON and directory formats used by the command-line tools.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relux/bipack.hpp"
#include "relux/compositor.hpp"
#include "relux/geometry.hpp"

namespace relux::io {

/// {"lights":[{"dir":[x,y,z]}, ...]}
nlohmann::json layout_to_json(const SphereLayout& layout);
SphereLayout layout_from_json(const nlohmann::json& j);
SphereLayout load_layout(const std::string& path);
void save_layout(const std::string& path, const SphereLayout& layout);

/// {"lights":[{"dir":[x,y,z],"rgb":[r,g,b]}, ...]}
nlohmann::json lighting_to_json(const LightingCondition& lighting);
LightingCondition lighting_from_json(const nlohmann::json& j);
LightingCondition load_lighting(const std::string& path);

/// {"layout":"layout.json" | "directions":[[x,y,z],...], "keyframe_rate":1, "playback_rate":60,
///  "keyframes":[[[r,g,b],...], ...]}
bipack::LightingSequence load_sequence(const std::string& path);
void save_sequence(const std::string& path, const bipack::LightingSequence& seq, const std::string& layout_ref);

/// One JSON object per line: {"i":n,"tag":"A","t_num":n,"t_den":120,"lights":[[r,g,b],...],"kf_hz":1}.
/// "kf_hz" carries the source keyframe rate and may be absent.
std::string schedule_to_jsonl(const bipack::BiPackSchedule& schedule);
/// Light directions come from `layout`; pass an empty layout to use the default layout of matching size.
bipack::BiPackSchedule schedule_from_jsonl(const std::string& text, const SphereLayout& layout = {});

/// Stack manifest {"version":1,"layout":"layout.json","images":[...],"scale":1.0,"hashes":{...}}.
olat::OlatStack load_stack(const std::string& manifest_path);
/// Writes layout.json, olat_NNNN.pfm and stack.json (with hashes) into `dir`. Returns the manifest path.
std::string save_stack(const std::string& dir, const olat::OlatStack& stack);

/// All *.pfm files of a directory keyed by file stem, in name order.
std::vector<std::pair<std::string, olat::HdriImage>> load_hdri_dir(const std::string& dir);
/// *.pfm files of a directory in name order.
std::vector<std::string> list_pfm(const std::string& dir);

/// Writes frame_NNNNN.pfm plus stream.json (timestamps and lighting) into `dir`.
void save_stream(const std::string& dir, const bipack::FrameStream& stream);
bipack::FrameStream load_stream(const std::string& dir, const SphereLayout& layout = {});

}  // namespace relux::io
