#pragma once

#include "headsplat/camera.hpp"
#include "headsplat/geometry.hpp"
#include "headsplat/image.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace headsplat {

inline constexpr int kManifestSchemaVersion = 1;

struct FrameRecord {
    std::filesystem::path vertices;        // float32 buffer or OBJ
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();
    std::vector<std::filesystem::path> images; // one per camera
};

/// Parsed dataset manifest; every path is absolute (resolved against the
/// manifest's directory).
struct DatasetManifest {
    std::filesystem::path root;
    std::filesystem::path neutral_mesh;
    std::map<std::string, std::vector<FaceIndex>> regions;
    std::vector<FrameRecord> frames;
    std::vector<Camera> cameras;
    std::vector<std::size_t> train_views;
    std::vector<std::size_t> test_views;
    std::optional<std::filesystem::path> ground_truth;
    Vec3 background = Vec3::Ones();

    std::size_t num_frames() const { return frames.size(); }
    std::size_t num_views() const { return cameras.size(); }
};

/// Throws SchemaError on malformed content and MissingAsset naming the
/// first referenced file that does not exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` with paths relative to `manifest.root`.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads the neutral mesh, region masks, per-frame vertices and poses.
MeshSequence load_sequence(const DatasetManifest& manifest);

/// Counts bytes of decoded image data currently alive.
class ResidencyTracker {
public:
    void add(std::size_t bytes);
    void release(std::size_t bytes);
    std::size_t current() const { return current_.load(); }
    std::size_t peak() const { return peak_.load(); }

private:
    std::atomic<std::size_t> current_{0};
    std::atomic<std::size_t> peak_{0};
};

/// RAII share of a tracker's byte count.
class ResidentBytes {
public:
    ResidentBytes() = default;
    ResidentBytes(std::shared_ptr<ResidencyTracker> tracker, std::size_t bytes);
    ResidentBytes(ResidentBytes&& other) noexcept;
    ResidentBytes& operator=(ResidentBytes&& other) noexcept;
    ResidentBytes(const ResidentBytes&) = delete;
    ResidentBytes& operator=(const ResidentBytes&) = delete;
    ~ResidentBytes();

private:
    void reset();
    std::shared_ptr<ResidencyTracker> tracker_;
    std::size_t bytes_ = 0;
};

struct BatchView {
    std::size_t view_index = 0;
    Camera camera;
    Image image;
};

/// Every training view of one frame.
struct FrameBatch {
    std::size_t frame_index = 0;
    std::vector<BatchView> views;
    ResidentBytes residency;
};

/// Yields one frame batch at a time. Frames are drawn uniformly with
/// replacement; views inside a batch are shuffled. The next batch is decoded
/// on a background thread while the caller works on the current one, so at
/// most two batches of decoded images are alive at any time.
class BatchStream {
public:
    BatchStream(DatasetManifest manifest, std::uint64_t seed,
                std::vector<std::size_t> views = {});
    ~BatchStream();
    BatchStream(const BatchStream&) = delete;
    BatchStream& operator=(const BatchStream&) = delete;

    /// Waits for the prefetched batch, makes it current and starts decoding
    /// the next one. The reference stays valid until the following call.
    const FrameBatch& next();

    const ResidencyTracker& tracker() const { return *tracker_; }
    /// Bytes of one fully decoded batch.
    std::size_t batch_bytes() const;

private:
    struct Plan {
        std::size_t frame = 0;
        std::vector<std::size_t> views;
    };
    Plan plan_next();
    void launch();

    DatasetManifest manifest_;
    std::vector<std::size_t> views_;
    std::mt19937_64 rng_;
    std::shared_ptr<ResidencyTracker> tracker_;
    std::future<FrameBatch> pending_;
    std::optional<FrameBatch> current_;
};

/// Loads one frame's views synchronously (no prefetch, no accounting).
FrameBatch load_frame_batch(const DatasetManifest& manifest, std::size_t frame,
                            std::span<const std::size_t> views);

} // namespace headsplat
