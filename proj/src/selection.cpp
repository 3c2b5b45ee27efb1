#include "headsplat/selection.hpp"

#include "headsplat/avatar.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace headsplat {

std::vector<Vec3> depose_frame(const MeshSequence& sequence, std::size_t frame_index) {
    if (frame_index >= sequence.frames.size()) {
        throw Error("frame index " + std::to_string(frame_index) + " out of range");
    }
    const auto& frame = sequence.frames[frame_index];
    const Mat3 inv = frame.rotation.normalized().toRotationMatrix().transpose();
    std::vector<Vec3> out(frame.vertices.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv * (frame.vertices[i] - frame.translation);
    }
    return out;
}

std::vector<double> face_center_offsets(std::span<const Vec3> deposed, const TriMesh& neutral) {
    if (deposed.size() != neutral.vertices.size()) {
        throw TopologyMismatch("deposed frame has " + std::to_string(deposed.size()) +
                               " vertices, neutral has " +
                               std::to_string(neutral.vertices.size()));
    }
    std::vector<double> offsets(neutral.faces.size());
    for (std::size_t f = 0; f < neutral.faces.size(); ++f) {
        const auto& face = neutral.faces[f];
        offsets[f] = (face_centroid(deposed, face) - face_centroid(neutral.vertices, face)).norm();
    }
    return offsets;
}

std::vector<FaceIndex> select_faces(std::span<const double> offsets, const TriMesh& mesh,
                                    const SelectionConfig& config) {
    if (offsets.size() != mesh.faces.size()) {
        throw DimensionMismatch("offset count does not match face count");
    }
    if (!(config.threshold > 0.0)) throw Error("selection threshold must be positive");

    std::vector<char> in_region(mesh.faces.size(), 0);
    std::vector<char> chosen(mesh.faces.size(), 0);
    for (const auto& name : config.key_regions) {
        const auto it = mesh.regions.find(name);
        if (it == mesh.regions.end() || it->second.empty()) continue;
        double sum = 0.0;
        for (auto f : it->second) {
            sum += offsets[f];
            in_region[f] = 1;
        }
        if (sum / static_cast<double>(it->second.size()) > config.threshold) {
            for (auto f : it->second) chosen[f] = 1;
        }
    }
    for (std::size_t f = 0; f < offsets.size(); ++f) {
        if (!in_region[f] && offsets[f] > config.threshold) chosen[f] = 1;
    }
    std::vector<FaceIndex> out;
    for (std::size_t f = 0; f < chosen.size(); ++f) {
        if (chosen[f]) out.push_back(f);
    }
    return out;
}

std::vector<char> face_membership(std::span<const FaceIndex> faces, std::size_t face_count) {
    std::vector<char> member(face_count, 0);
    for (auto f : faces) {
        if (f >= face_count) throw TopologyMismatch("selected face out of range");
        member[f] = 1;
    }
    return member;
}

std::vector<std::size_t> splats_on_faces(const SplatModel& model,
                                         std::span<const FaceIndex> faces) {
    std::size_t max_face = 0;
    for (const auto& s : model.splats) max_face = std::max(max_face, s.parent_face + 1);
    for (auto f : faces) max_face = std::max(max_face, f + 1);
    const auto member = face_membership(faces, max_face);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < model.splats.size(); ++i) {
        if (member[model.splats[i].parent_face]) out.push_back(i);
    }
    return out;
}

SelectionMask build_selection(const MeshSequence& sequence, std::size_t frame_index,
                              const SplatModel& model, const SelectionConfig& config) {
    check_binding(model, sequence.neutral.faces.size());
    const auto deposed = depose_frame(sequence, frame_index);
    const auto offsets = face_center_offsets(deposed, sequence.neutral);
    SelectionMask mask;
    mask.frame_index = frame_index;
    mask.selected_faces = select_faces(offsets, sequence.neutral, config);
    mask.selected_splats = splats_on_faces(model, mask.selected_faces);
    return mask;
}

std::size_t SelectionCache::non_empty_frames() const {
    return static_cast<std::size_t>(
        std::count_if(frames.begin(), frames.end(), [](const auto& f) { return !f.empty(); }));
}

SelectionMask SelectionCache::mask_for(std::size_t frame_index, const SplatModel& model) const {
    if (frame_index >= frames.size()) {
        throw Error("selection cache has no entry for frame " + std::to_string(frame_index));
    }
    SelectionMask mask;
    mask.frame_index = frame_index;
    mask.selected_faces = frames[frame_index];
    mask.selected_splats = splats_on_faces(model, mask.selected_faces);
    return mask;
}

SelectionCache precompute_selections(const MeshSequence& sequence,
                                     const SelectionConfig& config) {
    SelectionCache cache;
    cache.threshold = config.threshold;
    cache.frames.resize(sequence.frames.size());
    for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
        const auto offsets = face_center_offsets(depose_frame(sequence, i), sequence.neutral);
        cache.frames[i] = select_faces(offsets, sequence.neutral, config);
    }
    return cache;
}

void save_selection_cache(const std::filesystem::path& path, const SelectionCache& cache) {
    nlohmann::json j;
    j["threshold"] = cache.threshold;
    j["frames"] = nlohmann::json::array();
    for (std::size_t i = 0; i < cache.frames.size(); ++i) {
        j["frames"].push_back({{"frame_index", i}, {"faces", cache.frames[i]}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

SelectionCache load_selection_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAsset(path.string());
    SelectionCache cache;
    try {
        const auto j = nlohmann::json::parse(in);
        cache.threshold = j.at("threshold").get<double>();
        const auto& frames = j.at("frames");
        cache.frames.resize(frames.size());
        for (const auto& rec : frames) {
            const auto idx = rec.at("frame_index").get<std::size_t>();
            if (idx >= frames.size()) throw SchemaError("frame_index out of range");
            auto faces = rec.at("faces").get<std::vector<FaceIndex>>();
            std::sort(faces.begin(), faces.end());
            faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
            cache.frames[idx] = std::move(faces);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return cache;
}

} // namespace headsplat
