#include "headsplat/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint and PLY writers assume a little-endian host");

namespace headsplat {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'P', 'L', 'A', 'T', '0', '1'};

template <typename V>
void put(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
    V v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw IoError("truncated checkpoint");
    return v;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const SplatModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(model.sh_degree));
    put<std::uint64_t>(out, model.splats.size());
    const int coeffs = sh_coeff_count(model.sh_degree);
    for (const auto& s : model.splats) {
        put<std::uint64_t>(out, s.parent_face);
        for (int i = 0; i < 3; ++i) put(out, s.xyz_em[i]);
        for (int i = 0; i < 4; ++i) put(out, s.rot_em[i]);
        for (int i = 0; i < 3; ++i) put(out, s.log_scale_em[i]);
        put(out, s.opacity_raw);
        for (int k = 0; k < coeffs; ++k) {
            for (int c = 0; c < 3; ++c) put(out, s.sh[k][c]);
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

SplatModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingAsset(path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw SchemaError(path.string() + ": not a splat checkpoint");
    }
    SplatModel model;
    model.sh_degree = static_cast<int>(get<std::uint32_t>(in));
    if (model.sh_degree > kMaxShDegree) throw SchemaError("checkpoint sh_degree out of range");
    const auto count = get<std::uint64_t>(in);
    const int coeffs = sh_coeff_count(model.sh_degree);
    model.splats.resize(count);
    for (auto& s : model.splats) {
        s.parent_face = get<std::uint64_t>(in);
        for (int i = 0; i < 3; ++i) s.xyz_em[i] = get<double>(in);
        for (int i = 0; i < 4; ++i) s.rot_em[i] = get<double>(in);
        for (int i = 0; i < 3; ++i) s.log_scale_em[i] = get<double>(in);
        s.opacity_raw = get<double>(in);
        for (int k = 0; k < coeffs; ++k) {
            for (int c = 0; c < 3; ++c) s.sh[k][c] = get<double>(in);
        }
    }
    return model;
}

void export_world_ply(const std::filesystem::path& path, const SplatWorld& world,
                      std::span<const std::size_t> parent_faces) {
    if (parent_faces.size() != world.size()) {
        throw DimensionMismatch("parent face list does not match splat count");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const int coeffs = sh_coeff_count(world.sh_degree);
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << world.size() << "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out << "property float " << name << "\n";
    }
    for (int i = 0; i < 3 * (coeffs - 1); ++i) out << "property float f_rest_" << i << "\n";
    out << "property float opacity\n";
    for (int i = 0; i < 3; ++i) out << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) out << "property float rot_" << i << "\n";
    out << "property int parent_face\n";
    out << "end_header\n";

    for (std::size_t n = 0; n < world.size(); ++n) {
        const auto& s = world.splats[n];
        for (int i = 0; i < 3; ++i) put(out, static_cast<float>(s.position[i]));
        for (int i = 0; i < 3; ++i) put(out, 0.0f);
        for (int c = 0; c < 3; ++c) put(out, static_cast<float>(s.sh[0][c]));
        // f_rest is channel-major: all R coefficients, then G, then B.
        for (int c = 0; c < 3; ++c) {
            for (int k = 1; k < coeffs; ++k) put(out, static_cast<float>(s.sh[k][c]));
        }
        const double op = std::clamp(s.opacity, 1e-12, 1.0 - 1e-12);
        put(out, static_cast<float>(std::log(op / (1.0 - op))));
        for (int i = 0; i < 3; ++i) put(out, static_cast<float>(std::log(s.scale[i])));
        for (int i = 0; i < 4; ++i) put(out, static_cast<float>(s.rotation[i]));
        put(out, static_cast<std::int32_t>(parent_faces[n]));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PlySnapshot import_world_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingAsset(path.string());
    std::string line;
    std::size_t count = 0;
    std::vector<std::string> props;
    std::vector<std::string> types;
    bool binary_le = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (tag == "element") {
            std::string name;
            ls >> name >> count;
        } else if (tag == "property") {
            std::string type, name;
            ls >> type >> name;
            types.push_back(type);
            props.push_back(name);
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!binary_le) throw SchemaError(path.string() + ": only binary_little_endian PLY supported");

    int rest = 0;
    for (const auto& p : props) rest += p.rfind("f_rest_", 0) == 0 ? 1 : 0;
    const int coeffs = 1 + rest / 3;
    int degree = 0;
    while (sh_coeff_count(degree) < coeffs) ++degree;

    PlySnapshot snap;
    snap.world.sh_degree = degree;
    snap.world.splats.resize(count);
    snap.parent_faces.resize(count, 0);
    std::vector<float> values(props.size());
    for (std::size_t n = 0; n < count; ++n) {
        std::int32_t parent = 0;
        for (std::size_t p = 0; p < props.size(); ++p) {
            if (types[p] == "int") {
                parent = get<std::int32_t>(in);
                values[p] = 0.0f;
            } else if (types[p] == "float") {
                values[p] = get<float>(in);
            } else {
                throw SchemaError("unsupported PLY property type " + types[p]);
            }
        }
        auto& s = snap.world.splats[n];
        for (std::size_t p = 0; p < props.size(); ++p) {
            const auto& name = props[p];
            const float v = values[p];
            if (name == "x") s.position[0] = v;
            else if (name == "y") s.position[1] = v;
            else if (name == "z") s.position[2] = v;
            else if (name.rfind("f_dc_", 0) == 0) s.sh[0][std::stoi(name.substr(5))] = v;
            else if (name.rfind("f_rest_", 0) == 0) {
                const int idx = std::stoi(name.substr(7));
                const int per_channel = coeffs - 1;
                s.sh[1 + idx % per_channel][idx / per_channel] = v;
            } else if (name == "opacity") s.opacity = 1.0f / (1.0f + std::exp(-v));
            else if (name.rfind("scale_", 0) == 0) s.scale[std::stoi(name.substr(6))] = std::exp(v);
            else if (name.rfind("rot_", 0) == 0) s.rotation[std::stoi(name.substr(4))] = v;
        }
        snap.parent_faces[n] = static_cast<std::size_t>(parent);
    }
    return snap;
}

} // namespace headsplat
