#include "headsplat/mesh_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace headsplat {

namespace {

std::uint32_t parse_obj_index(const std::string& token, std::size_t vertex_count) {
    const auto slash = token.find('/');
    const long idx = std::stol(token.substr(0, slash));
    long resolved = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
    if (resolved < 0) throw SchemaError("bad OBJ face index '" + token + "'");
    return static_cast<std::uint32_t>(resolved);
}

float to_little_endian(float v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
        return v;
    }
}

} // namespace

TriMesh read_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAsset(path.string());
    TriMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x() >> v.y() >> v.z())) {
                throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed vertex");
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::uint32_t> poly;
            std::string tok;
            while (ls >> tok) poly.push_back(parse_obj_index(tok, mesh.vertices.size()));
            if (poly.size() < 3) {
                throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                                  ": face with fewer than 3 vertices");
            }
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
                mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
            }
        }
    }
    return mesh;
}

void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices,
               std::span<const Face> faces, std::optional<std::span<const Vec3>> vertex_colors) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const auto& v = vertices[i];
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
        if (vertex_colors) {
            const auto& c = (*vertex_colors)[i];
            out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
        }
        out << '\n';
    }
    for (const auto& f : faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

std::vector<Vec3> read_vertex_buffer(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingAsset(path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 12 != 0) {
        throw SchemaError(path.string() + ": size is not a multiple of 12 bytes");
    }
    std::vector<Vec3> out(bytes.size() / 12);
    for (std::size_t i = 0; i < out.size(); ++i) {
        float xyz[3];
        std::memcpy(xyz, bytes.data() + 12 * i, 12);
        out[i] = Vec3(to_little_endian(xyz[0]), to_little_endian(xyz[1]), to_little_endian(xyz[2]));
    }
    return out;
}

void write_vertex_buffer(const std::filesystem::path& path, std::span<const Vec3> vertices) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& v : vertices) {
        const float xyz[3] = {to_little_endian(static_cast<float>(v.x())),
                              to_little_endian(static_cast<float>(v.y())),
                              to_little_endian(static_cast<float>(v.z()))};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

std::vector<Vec3> read_frame_vertices(const std::filesystem::path& path) {
    if (path.extension() == ".obj") return read_obj(path).vertices;
    return read_vertex_buffer(path);
}

} // namespace headsplat
