#include "headsplat/evaluation.hpp"

#include "headsplat/avatar.hpp"
#include "headsplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace headsplat {

std::vector<std::int64_t> face_id_buffer(std::span<const Vec3> vertices, std::span<const Face> faces,
                                         const Camera& cam) {
    const int w = cam.width;
    const int h = cam.height;
    std::vector<std::int64_t> ids(std::size_t(w) * h, -1);
    std::vector<double> inv_depth(std::size_t(w) * h, 0.0);

    std::vector<Vec3> cam_pts(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) cam_pts[i] = cam.to_camera(vertices[i]);

    for (std::size_t f = 0; f < faces.size(); ++f) {
        Vec2 p[3];
        double iz[3];
        bool visible = true;
        for (int k = 0; k < 3; ++k) {
            const Vec3& c = cam_pts[faces[f][k]];
            if (c.z() <= kNearPlane) {
                visible = false;
                break;
            }
            iz[k] = 1.0 / c.z();
            p[k] = Vec2(cam.fx * c.x() * iz[k] + cam.cx, cam.fy * c.y() * iz[k] + cam.cy);
        }
        if (!visible) continue;
        const double area = (p[1] - p[0]).x() * (p[2] - p[0]).y() - (p[1] - p[0]).y() * (p[2] - p[0]).x();
        if (std::abs(area) < 1e-12) continue;

        const int x0 = std::max(0, int(std::ceil(std::min({p[0].x(), p[1].x(), p[2].x()}))));
        const int x1 = std::min(w - 1, int(std::floor(std::max({p[0].x(), p[1].x(), p[2].x()}))));
        const int y0 = std::max(0, int(std::ceil(std::min({p[0].y(), p[1].y(), p[2].y()}))));
        const int y1 = std::min(h - 1, int(std::floor(std::max({p[0].y(), p[1].y(), p[2].y()}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const Vec2 q(x, y);
                double b[3];
                for (int k = 0; k < 3; ++k) {
                    const Vec2& e0 = p[(k + 1) % 3];
                    const Vec2& e1 = p[(k + 2) % 3];
                    b[k] = ((e1 - e0).x() * (q - e0).y() - (e1 - e0).y() * (q - e0).x()) / area;
                }
                if (b[0] < 0.0 || b[1] < 0.0 || b[2] < 0.0) continue;
                const double d = b[0] * iz[0] + b[1] * iz[1] + b[2] * iz[2];
                const std::size_t idx = std::size_t(y) * w + x;
                if (d > inv_depth[idx]) {
                    inv_depth[idx] = d;
                    ids[idx] = std::int64_t(f);
                }
            }
        }
    }
    return ids;
}

std::vector<std::uint8_t> face_pixel_mask(std::span<const Vec3> vertices,
                                          std::span<const Face> faces,
                                          std::span<const FaceIndex> selected, const Camera& cam) {
    const auto member = face_membership(selected, faces.size());
    const auto ids = face_id_buffer(vertices, faces, cam);
    std::vector<std::uint8_t> mask(ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        mask[i] = ids[i] >= 0 && member[std::size_t(ids[i])] ? 1 : 0;
    }
    return mask;
}

EvalReport evaluate(const SplatModel& model, const DatasetManifest& manifest,
                    const MeshSequence& sequence, std::span<const std::size_t> views,
                    const SelectionCache* regions) {
    EvalReport report;
    const Vec3T<float> bg = manifest.background.cast<float>();
    for (std::size_t f = 0; f < sequence.frames.size(); ++f) {
        const auto world = realize_world(model, build_frame_rig(sequence, f)).cast<float>();
        const auto batch = load_frame_batch(manifest, f, views);
        for (const auto& view : batch.views) {
            const Image rendered = rasterize(world, view.camera, bg);
            EvalEntry e;
            e.frame = f;
            e.view = view.view_index;
            e.psnr = psnr(rendered, view.image);
            e.ssim = ssim(rendered, view.image);
            if (regions && f < regions->frames.size() && !regions->frames[f].empty()) {
                const auto mask = face_pixel_mask(sequence.frames[f].vertices,
                                                  sequence.neutral.faces, regions->frames[f],
                                                  view.camera);
                if (std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
                    e.region_psnr = region_psnr(rendered, view.image, mask);
                    e.has_region = true;
                }
            }
            report.entries.push_back(e);
        }
    }
    return report;
}

} // namespace headsplat
