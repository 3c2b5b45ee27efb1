#include "headsplat/dataset.hpp"

#include "headsplat/mesh_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace headsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path require(const fs::path& root, const std::string& rel) {
    const fs::path p = root / rel;
    if (!fs::exists(p)) throw MissingAsset(p.string());
    return p;
}

std::string relative_to(const fs::path& p, const fs::path& root) {
    return fs::relative(p, root).generic_string();
}

} // namespace

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAsset(path.string());
    DatasetManifest m;
    m.root = fs::absolute(path).parent_path();
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kManifestSchemaVersion) {
            throw SchemaError("unsupported manifest schema_version " + std::to_string(version));
        }
        m.neutral_mesh = require(m.root, j.at("neutral_mesh").get<std::string>());
        if (j.contains("regions")) {
            for (const auto& [name, faces] : j.at("regions").items()) {
                m.regions[name] = faces.get<std::vector<FaceIndex>>();
            }
        }
        for (const auto& cj : j.at("cameras")) m.cameras.push_back(camera_from_json(cj));
        for (const auto& fj : j.at("frames")) {
            FrameRecord fr;
            fr.vertices = require(m.root, fj.at("vertices").get<std::string>());
            if (fj.contains("rotation")) {
                const auto r = fj.at("rotation").get<std::vector<double>>();
                if (r.size() != 4) throw SchemaError("frame rotation must have 4 entries");
                fr.rotation = Quat(r[0], r[1], r[2], r[3]);
                if (std::abs(fr.rotation.norm() - 1.0) > 1e-6) {
                    throw SchemaError("frame rotation is not a unit quaternion");
                }
            }
            if (fj.contains("translation")) {
                const auto t = fj.at("translation").get<std::vector<double>>();
                if (t.size() != 3) throw SchemaError("frame translation must have 3 entries");
                fr.translation = Vec3(t[0], t[1], t[2]);
            }
            const auto images = fj.at("images").get<std::vector<std::string>>();
            if (images.size() != m.cameras.size()) {
                throw SchemaError("frame " + std::to_string(m.frames.size()) + " lists " +
                                  std::to_string(images.size()) + " images for " +
                                  std::to_string(m.cameras.size()) + " cameras");
            }
            for (const auto& img : images) fr.images.push_back(require(m.root, img));
            m.frames.push_back(std::move(fr));
        }
        m.train_views = j.at("train_views").get<std::vector<std::size_t>>();
        m.test_views = j.value("test_views", std::vector<std::size_t>{});
        if (j.contains("ground_truth")) {
            m.ground_truth = require(m.root, j.at("ground_truth").get<std::string>());
        }
        if (j.contains("background")) {
            const auto b = j.at("background").get<std::vector<double>>();
            if (b.size() != 3) throw SchemaError("background must have 3 entries");
            m.background = Vec3(b[0], b[1], b[2]);
        }
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }

    if (m.frames.empty()) throw SchemaError("manifest has no frames");
    if (m.train_views.empty()) throw SchemaError("manifest has no training views");
    std::set<std::size_t> train(m.train_views.begin(), m.train_views.end());
    for (auto v : m.train_views) {
        if (v >= m.cameras.size()) throw SchemaError("train view " + std::to_string(v) + " out of range");
    }
    for (auto v : m.test_views) {
        if (v >= m.cameras.size()) throw SchemaError("test view " + std::to_string(v) + " out of range");
        if (train.count(v)) {
            throw SchemaError("view " + std::to_string(v) + " is both a train and a test view");
        }
    }
    return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
    json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["neutral_mesh"] = relative_to(m.neutral_mesh, m.root);
    j["regions"] = json::object();
    for (const auto& [name, faces] : m.regions) j["regions"][name] = faces;
    j["cameras"] = json::array();
    for (const auto& c : m.cameras) j["cameras"].push_back(camera_to_json(c));
    j["frames"] = json::array();
    for (const auto& fr : m.frames) {
        json fj;
        fj["vertices"] = relative_to(fr.vertices, m.root);
        const Quat& q = fr.rotation;
        fj["rotation"] = {q.w(), q.x(), q.y(), q.z()};
        fj["translation"] = {fr.translation.x(), fr.translation.y(), fr.translation.z()};
        fj["images"] = json::array();
        for (const auto& img : fr.images) fj["images"].push_back(relative_to(img, m.root));
        j["frames"].push_back(fj);
    }
    j["train_views"] = m.train_views;
    j["test_views"] = m.test_views;
    if (m.ground_truth) j["ground_truth"] = relative_to(*m.ground_truth, m.root);
    j["background"] = {m.background.x(), m.background.y(), m.background.z()};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

MeshSequence load_sequence(const DatasetManifest& manifest) {
    MeshSequence seq;
    seq.neutral = read_obj(manifest.neutral_mesh);
    seq.neutral.regions = manifest.regions;
    seq.neutral.validate();
    seq.frames.reserve(manifest.frames.size());
    for (const auto& fr : manifest.frames) {
        MeshFrame frame;
        frame.vertices = read_frame_vertices(fr.vertices);
        frame.rotation = fr.rotation;
        frame.translation = fr.translation;
        seq.frames.push_back(std::move(frame));
    }
    seq.validate();
    return seq;
}

void ResidencyTracker::add(std::size_t bytes) {
    const std::size_t now = current_.fetch_add(bytes) + bytes;
    std::size_t prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
}

void ResidencyTracker::release(std::size_t bytes) { current_.fetch_sub(bytes); }

ResidentBytes::ResidentBytes(std::shared_ptr<ResidencyTracker> tracker, std::size_t bytes)
    : tracker_(std::move(tracker)), bytes_(bytes) {
    if (tracker_) tracker_->add(bytes_);
}

ResidentBytes::ResidentBytes(ResidentBytes&& other) noexcept
    : tracker_(std::move(other.tracker_)), bytes_(other.bytes_) {
    other.bytes_ = 0;
}

ResidentBytes& ResidentBytes::operator=(ResidentBytes&& other) noexcept {
    if (this != &other) {
        reset();
        tracker_ = std::move(other.tracker_);
        bytes_ = other.bytes_;
        other.bytes_ = 0;
    }
    return *this;
}

ResidentBytes::~ResidentBytes() { reset(); }

void ResidentBytes::reset() {
    if (tracker_ && bytes_) tracker_->release(bytes_);
    tracker_.reset();
    bytes_ = 0;
}

FrameBatch load_frame_batch(const DatasetManifest& manifest, std::size_t frame,
                            std::span<const std::size_t> views) {
    if (frame >= manifest.frames.size()) throw Error("frame index out of range");
    FrameBatch batch;
    batch.frame_index = frame;
    for (auto v : views) {
        BatchView bv;
        bv.view_index = v;
        bv.camera = manifest.cameras.at(v);
        bv.image = read_png(manifest.frames[frame].images.at(v));
        if (bv.image.width != bv.camera.width || bv.image.height != bv.camera.height) {
            throw DimensionMismatch("image " + manifest.frames[frame].images[v].string() +
                                    " does not match its camera size");
        }
        batch.views.push_back(std::move(bv));
    }
    return batch;
}

} // namespace headsplat
