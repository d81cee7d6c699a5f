#include "mpmgs/scene.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mpmgs/errors.hpp"

namespace mpmgs {

using nlohmann::json;

namespace {

Vec3 vec3_from_json(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number()
        || !j[2].is_number())
        throw ParseError(std::string("field '") + field + "' must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

double number_or(const json& j, const char* field, double fallback) {
    if (!j.contains(field)) return fallback;
    if (!j[field].is_number()) throw ParseError(std::string("field '") + field + "' must be a number");
    return j[field].get<double>();
}

MaterialSpec material_from_json(const json& j) {
    MaterialSpec spec;
    if (j.contains("elastic")) spec.elastic = elastic_from_string(j["elastic"].get<std::string>());
    if (j.contains("plastic")) spec.plastic = plastic_from_string(j["plastic"].get<std::string>());
    const double e = number_or(j, "E", 1e5);
    const double nu = number_or(j, "nu", 0.3);
    const double fa = number_or(j, "friction_angle", 30.0);
    const double ys = number_or(j, "yield_stress", 1e4);
    try {
        spec.params = PhysicalParams(e, nu, fa, ys);
    } catch (const Error& err) {
        throw ValidationError(std::string("material block: ") + err.what());
    }
    return spec;
}

json material_to_json(const MaterialEntry& entry) {
    if (entry.learnable) return json("learnable");
    return json{{"elastic", to_string(entry.spec.elastic)},
                {"plastic", to_string(entry.spec.plastic)},
                {"E", entry.spec.params.youngs_modulus},
                {"nu", entry.spec.params.poisson_ratio},
                {"friction_angle", entry.spec.params.friction_angle_deg},
                {"yield_stress", entry.spec.params.yield_stress}};
}

BoundaryCondition boundary_from_json(const json& j) {
    BoundaryCondition c;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "ground_plane_sticky") {
        c.kind = BoundaryCondition::Kind::GroundPlaneSticky;
        c.height = number_or(j, "height", 0.0);
    } else if (kind == "ground_plane_slip") {
        c.kind = BoundaryCondition::Kind::GroundPlaneSlip;
        c.height = number_or(j, "height", 0.0);
    } else if (kind == "domain_walls") {
        c.kind = BoundaryCondition::Kind::DomainWalls;
        c.sticky = j.value("mode", std::string("slip")) == "sticky";
        c.margin_cells = static_cast<int>(number_or(j, "margin_cells", 2));
    } else if (kind == "impulse") {
        c.kind = BoundaryCondition::Kind::Impulse;
        c.vector = vec3_from_json(j.at("velocity"), "velocity");
    } else if (kind == "constant_force") {
        c.kind = BoundaryCondition::Kind::ConstantForce;
        c.vector = vec3_from_json(j.at("force"), "force");
    } else {
        throw ParseError("unknown boundary condition kind '" + kind + "'");
    }
    if (j.contains("region")) {
        c.region_min = vec3_from_json(j["region"].at("min"), "region.min");
        c.region_max = vec3_from_json(j["region"].at("max"), "region.max");
    }
    if (j.contains("time")) {
        const json& t = j["time"];
        if (!t.is_array() || t.size() != 2)
            throw ParseError("field 'time' must be [begin, end]");
        c.time_begin = t[0].get<double>();
        c.time_end = t[1].get<double>();
    }
    return c;
}

json boundary_to_json(const BoundaryCondition& c) {
    json j;
    switch (c.kind) {
        case BoundaryCondition::Kind::GroundPlaneSticky:
            j["kind"] = "ground_plane_sticky";
            j["height"] = c.height;
            break;
        case BoundaryCondition::Kind::GroundPlaneSlip:
            j["kind"] = "ground_plane_slip";
            j["height"] = c.height;
            break;
        case BoundaryCondition::Kind::DomainWalls:
            j["kind"] = "domain_walls";
            j["mode"] = c.sticky ? "sticky" : "slip";
            j["margin_cells"] = c.margin_cells;
            break;
        case BoundaryCondition::Kind::Impulse:
            j["kind"] = "impulse";
            j["velocity"] = vec3_to_json(c.vector);
            break;
        case BoundaryCondition::Kind::ConstantForce:
            j["kind"] = "constant_force";
            j["force"] = vec3_to_json(c.vector);
            break;
    }
    if (std::isfinite(c.region_min.x)) {
        j["region"] = {{"min", vec3_to_json(c.region_min)}, {"max", vec3_to_json(c.region_max)}};
    }
    if (c.time_begin != 0.0 || std::isfinite(c.time_end)) {
        j["time"] = json::array(
            {c.time_begin, std::isfinite(c.time_end)
                               ? json(c.time_end)
                               : json(std::numeric_limits<double>::max())});
    }
    return j;
}

ParticleSource source_from_json(const json& j) {
    ParticleSource s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box") {
        s.kind = ParticleSource::Kind::Box;
        s.box_min = vec3_from_json(j.at("min"), "min");
        s.box_max = vec3_from_json(j.at("max"), "max");
    } else if (kind == "sphere") {
        s.kind = ParticleSource::Kind::Sphere;
        s.center = vec3_from_json(j.at("center"), "center");
        s.radius = j.at("radius").get<double>();
    } else if (kind == "point_file") {
        s.kind = ParticleSource::Kind::PointFile;
        s.path = j.at("path").get<std::string>();
        s.opacity_threshold = number_or(j, "opacity_threshold", 0.0);
    } else {
        throw ParseError("unknown source kind '" + kind + "'");
    }
    s.density = number_or(j, "density", 1000.0);
    if (j.contains("velocity")) s.velocity = vec3_from_json(j["velocity"], "velocity");
    s.material = static_cast<int>(number_or(j, "material", 0));
    return s;
}

json source_to_json(const ParticleSource& s) {
    json j;
    switch (s.kind) {
        case ParticleSource::Kind::Box:
            j["kind"] = "box";
            j["min"] = vec3_to_json(s.box_min);
            j["max"] = vec3_to_json(s.box_max);
            break;
        case ParticleSource::Kind::Sphere:
            j["kind"] = "sphere";
            j["center"] = vec3_to_json(s.center);
            j["radius"] = s.radius;
            break;
        case ParticleSource::Kind::PointFile:
            j["kind"] = "point_file";
            j["path"] = s.path;
            j["opacity_threshold"] = s.opacity_threshold;
            break;
    }
    j["density"] = s.density;
    j["velocity"] = vec3_to_json(s.velocity);
    j["material"] = s.material;
    return j;
}

// deterministic uniform in [0, 1)
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SceneConfig scene_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
    SceneConfig cfg;
    try {
        if (j.contains("domain")) {
            cfg.domain_min = vec3_from_json(j["domain"].at("min"), "domain.min");
            cfg.domain_max = vec3_from_json(j["domain"].at("max"), "domain.max");
        }
        cfg.grid_resolution = static_cast<int>(number_or(j, "grid_resolution", 25));
        cfg.dt = number_or(j, "dt", 3e-4);
        if (j.contains("gravity")) cfg.gravity = vec3_from_json(j["gravity"], "gravity");
        cfg.frames = static_cast<int>(number_or(j, "frames", 150));
        cfg.sample_every = static_cast<int>(number_or(j, "sample_every", 10));
        cfg.seed = static_cast<std::uint64_t>(number_or(j, "seed", 1));
        if (j.contains("materials"))
            for (const json& m : j["materials"]) {
                MaterialEntry entry;
                if (m.is_string() && m.get<std::string>() == "learnable")
                    entry.learnable = true;
                else if (m.is_object())
                    entry.spec = material_from_json(m);
                else
                    throw ParseError("material entries must be objects or \"learnable\"");
                cfg.materials.push_back(entry);
            }
        if (j.contains("sources"))
            for (const json& s : j["sources"]) cfg.sources.push_back(source_from_json(s));
        if (j.contains("boundary_conditions"))
            for (const json& b : j["boundary_conditions"])
                cfg.boundary_conditions.push_back(boundary_from_json(b));
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
    validate_scene(cfg);
    return cfg;
}

SceneConfig load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open scene file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return scene_from_json_text(ss.str());
}

std::string scene_to_json_text(const SceneConfig& cfg) {
    json j;
    j["domain"] = {{"min", vec3_to_json(cfg.domain_min)}, {"max", vec3_to_json(cfg.domain_max)}};
    j["grid_resolution"] = cfg.grid_resolution;
    j["dt"] = cfg.dt;
    j["gravity"] = vec3_to_json(cfg.gravity);
    j["frames"] = cfg.frames;
    j["sample_every"] = cfg.sample_every;
    j["seed"] = cfg.seed;
    j["materials"] = json::array();
    for (const MaterialEntry& m : cfg.materials) j["materials"].push_back(material_to_json(m));
    j["sources"] = json::array();
    for (const ParticleSource& s : cfg.sources) j["sources"].push_back(source_to_json(s));
    j["boundary_conditions"] = json::array();
    for (const BoundaryCondition& b : cfg.boundary_conditions)
        j["boundary_conditions"].push_back(boundary_to_json(b));
    return j.dump(2);
}

void validate_scene(const SceneConfig& cfg) {
    const Vec3 extent = cfg.domain_max - cfg.domain_min;
    if (!(extent.x > 0) || !(extent.y > 0) || !(extent.z > 0))
        throw ValidationError("domain extent must be positive");
    if (std::fabs(extent.x - extent.y) > 1e-9 * extent.x
        || std::fabs(extent.x - extent.z) > 1e-9 * extent.x)
        throw ValidationError("domain must be a cube");
    if (cfg.grid_resolution < 5) throw ValidationError("grid_resolution must be at least 5");
    if (!(cfg.dt > 0)) throw ValidationError("dt must be positive");
    if (cfg.frames < 0) throw ValidationError("frames must be non-negative");
    if (cfg.sample_every < 1) throw ValidationError("sample_every must be at least 1");

    const double dx = extent.x / cfg.grid_resolution;
    const double margin = 2.0 * dx;
    const Vec3 inner_min = cfg.domain_min + Vec3::all(margin);
    const Vec3 inner_max = cfg.domain_max - Vec3::all(margin);

    for (std::size_t i = 0; i < cfg.sources.size(); ++i) {
        const ParticleSource& s = cfg.sources[i];
        const std::string tag = "source " + std::to_string(i) + ": ";
        if (s.material < 0 || s.material >= static_cast<int>(cfg.materials.size()))
            throw ValidationError(tag + "material index out of range");
        if (!(s.density > 0)) throw ValidationError(tag + "density must be positive");
        if (s.kind == ParticleSource::Kind::Box) {
            const Vec3 size = s.box_max - s.box_min;
            if (!(size.x > 0) || !(size.y > 0) || !(size.z > 0))
                throw ValidationError(tag + "box must have positive extent");
            if (s.box_min.x < inner_min.x || s.box_min.y < inner_min.y
                || s.box_min.z < inner_min.z || s.box_max.x > inner_max.x
                || s.box_max.y > inner_max.y || s.box_max.z > inner_max.z)
                throw ValidationError(tag + "box must lie 2 cells inside the domain");
        } else if (s.kind == ParticleSource::Kind::Sphere) {
            if (!(s.radius > 0)) throw ValidationError(tag + "sphere radius must be positive");
            if (s.center.x - s.radius < inner_min.x || s.center.y - s.radius < inner_min.y
                || s.center.z - s.radius < inner_min.z || s.center.x + s.radius > inner_max.x
                || s.center.y + s.radius > inner_max.y || s.center.z + s.radius > inner_max.z)
                throw ValidationError(tag + "sphere must lie 2 cells inside the domain");
        }
        // CFL guard: dt * wavespeed <= 0.5 dx
        const MaterialEntry& entry = cfg.materials[s.material];
        const PhysicalParams p = entry.learnable ? PhysicalParams() : entry.spec.params;
        const double wavespeed = std::sqrt((p.lambda + 2.0 * p.mu) / s.density);
        if (cfg.dt * wavespeed > 0.5 * dx)
            throw ValidationError(tag + "CFL violated: dt * wavespeed "
                                  + std::to_string(cfg.dt * wavespeed) + " exceeds 0.5 dx "
                                  + std::to_string(0.5 * dx));
    }

    for (std::size_t i = 0; i < cfg.boundary_conditions.size(); ++i) {
        const BoundaryCondition& c = cfg.boundary_conditions[i];
        if (c.time_begin < 0 || c.time_end < c.time_begin)
            throw ValidationError("boundary condition " + std::to_string(i)
                                  + ": time window must be non-negative and ordered");
    }
}

SampledSource sample_shape(const ParticleSource& source, const GridField& grid,
                           std::uint64_t seed) {
    if (source.kind == ParticleSource::Kind::PointFile)
        throw ValidationError("sample_shape handles procedural sources only");

    const double dx = grid.dx;
    const double half = 0.5 * dx;
    const auto inside = [&](const Vec3& c) {
        if (source.kind == ParticleSource::Kind::Box)
            return c.x >= source.box_min.x && c.x <= source.box_max.x && c.y >= source.box_min.y
                && c.y <= source.box_max.y && c.z >= source.box_min.z && c.z <= source.box_max.z;
        return (c - source.center).squared_norm() <= source.radius * source.radius;
    };

    SampledSource out;
    std::mt19937_64 rng(seed);
    const double particle_volume = half * half * half;
    const double mass = source.density * particle_volume;
    const double kernel_sigma = dx / 4.0;

    for (int i = 0; i < grid.cells; ++i) {
        for (int j = 0; j < grid.cells; ++j) {
            for (int k = 0; k < grid.cells; ++k) {
                const Vec3 cell_origin = grid.origin + Vec3(i, j, k) * dx;
                if (!inside(cell_origin + Vec3::all(half))) continue;
                for (int oct = 0; oct < 8; ++oct) {
                    const Vec3 offset{static_cast<double>(oct & 1),
                                      static_cast<double>((oct >> 1) & 1),
                                      static_cast<double>((oct >> 2) & 1)};
                    const Vec3 jitter{next_uniform(rng), next_uniform(rng), next_uniform(rng)};
                    out.positions.push_back(cell_origin + (offset + jitter) * half);
                    out.masses.push_back(mass);
                    out.volumes.push_back(particle_volume);
                    GaussianKernel kern;
                    kern.center = out.positions.back();
                    kern.covariance = Mat3::identity() * (kernel_sigma * kernel_sigma);
                    out.kernels.push_back(std::move(kern));
                }
            }
        }
    }
    if (out.positions.empty())
        throw EmptySource("source geometry covers no grid cell");
    return out;
}

namespace {

Mat3 covariance_from_scale_rotation(const Vec3& scale, const double quat[4]) {
    // quaternion (w, x, y, z), normalized here
    double w = quat[0], x = quat[1], y = quat[2], z = quat[3];
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    Mat3 r = Mat3::identity();
    if (n > 1e-12) {
        w /= n; x /= n; y /= n; z /= n;
        r = Mat3(1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y));
    }
    const Mat3 s2 = Mat3::diag(scale.cwise_mul(scale));
    return (r * s2 * r.transposed()).symmetrized();
}

PointCloud load_points_ascii(std::istream& is, const std::string& path) {
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (vals.empty()) continue;
        if (vals.size() != 3 && vals.size() != 11)
            throw ParseError(path + ":" + std::to_string(line_no)
                             + ": expected 3 or 11 numbers per point");
        cloud.positions.push_back({vals[0], vals[1], vals[2]});
        if (vals.size() == 11) {
            const Vec3 scale{vals[3], vals[4], vals[5]};
            const double quat[4] = {vals[6], vals[7], vals[8], vals[9]};
            cloud.covariances.push_back(covariance_from_scale_rotation(scale, quat));
            cloud.opacities.push_back(vals[10]);
            cloud.has_covariance = true;
        }
    }
    if (cloud.has_covariance && cloud.covariances.size() != cloud.positions.size())
        throw ParseError(path + ": mixed 3-column and 11-column point lines");
    return cloud;
}

struct PlyProperty {
    std::string name;
    int byte_size = 0;
    bool is_float = false;  // float or double
    bool is_double = false;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

PointCloud load_points_ply(std::istream& is, const std::string& path) {
    std::string line;
    std::getline(is, line);  // "ply" already sniffed by the caller
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> props;
    bool in_vertex_element = false;

    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") binary = true;
            else if (fmt != "ascii")
                throw ParseError(path + ": unsupported ply format '" + fmt + "'");
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                in_vertex_element = true;
                vertex_count = count;
            } else {
                if (!in_vertex_element && count > 0)
                    throw ParseError(path + ": element '" + name + "' precedes vertex data");
                in_vertex_element = false;  // trailing elements are ignored
            }
        } else if (word == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            ls >> type >> name;
            if (type == "list")
                throw ParseError(path + ": list properties are not supported in vertex elements");
            PlyProperty p;
            p.name = name;
            if (type == "float" || type == "float32") { p.byte_size = 4; p.is_float = true; }
            else if (type == "double" || type == "float64") { p.byte_size = 8; p.is_double = true; }
            else if (type == "uchar" || type == "int8" || type == "uint8" || type == "char") p.byte_size = 1;
            else if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") p.byte_size = 2;
            else if (type == "int" || type == "uint" || type == "int32" || type == "uint32") p.byte_size = 4;
            else throw ParseError(path + ": unsupported ply property type '" + type + "'");
            props.push_back(p);
        } else if (word == "end_header") {
            break;
        }
    }
    if (vertex_count == 0) throw EmptyCloud(path + ": ply file has no vertices");

    int ix = -1, iy = -1, iz = -1, iop = -1;
    int iscale[3] = {-1, -1, -1}, irot[4] = {-1, -1, -1, -1};
    std::vector<int> payload_fields;
    for (std::size_t i = 0; i < props.size(); ++i) {
        const std::string& n = props[i].name;
        if (n == "x") ix = static_cast<int>(i);
        else if (n == "y") iy = static_cast<int>(i);
        else if (n == "z") iz = static_cast<int>(i);
        else if (n == "opacity") iop = static_cast<int>(i);
        else if (n == "scale_0") iscale[0] = static_cast<int>(i);
        else if (n == "scale_1") iscale[1] = static_cast<int>(i);
        else if (n == "scale_2") iscale[2] = static_cast<int>(i);
        else if (n == "rot_0") irot[0] = static_cast<int>(i);
        else if (n == "rot_1") irot[1] = static_cast<int>(i);
        else if (n == "rot_2") irot[2] = static_cast<int>(i);
        else if (n == "rot_3") irot[3] = static_cast<int>(i);
        else payload_fields.push_back(static_cast<int>(i));
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError(path + ": ply vertex element lacks x/y/z properties");
    const bool full_gaussian = iscale[0] >= 0 && iscale[1] >= 0 && iscale[2] >= 0 && irot[0] >= 0
                            && irot[1] >= 0 && irot[2] >= 0 && irot[3] >= 0;

    PointCloud cloud;
    cloud.has_covariance = full_gaussian;
    std::vector<double> row(props.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (binary) {
            for (std::size_t p = 0; p < props.size(); ++p) {
                char buf[8];
                is.read(buf, props[p].byte_size);
                if (!is) throw ParseError(path + ": truncated ply vertex data");
                if (props[p].is_float) {
                    float f;
                    std::memcpy(&f, buf, 4);
                    row[p] = f;
                } else if (props[p].is_double) {
                    double d;
                    std::memcpy(&d, buf, 8);
                    row[p] = d;
                } else {
                    row[p] = 0.0;  // integer property, carried as zero payload
                }
            }
        } else {
            for (std::size_t p = 0; p < props.size(); ++p)
                if (!(is >> row[p])) throw ParseError(path + ": truncated ply vertex data");
        }
        cloud.positions.push_back({row[ix], row[iy], row[iz]});
        if (full_gaussian) {
            // 3DGS convention: stored scales are logarithmic, opacity is a logit
            const Vec3 scale{std::exp(row[iscale[0]]), std::exp(row[iscale[1]]),
                             std::exp(row[iscale[2]])};
            const double quat[4] = {row[irot[0]], row[irot[1]], row[irot[2]], row[irot[3]]};
            cloud.covariances.push_back(covariance_from_scale_rotation(scale, quat));
        }
        cloud.opacities.push_back(iop >= 0 ? sigmoid(row[iop]) : 1.0);
        if (!payload_fields.empty()) {
            std::vector<float> extra;
            extra.reserve(payload_fields.size());
            for (int f : payload_fields) extra.push_back(static_cast<float>(row[f]));
            cloud.payload.push_back(std::move(extra));
        }
    }
    return cloud;
}

}  // namespace

PointCloud load_points(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open point file '" + path + "'");
    char sniff[3] = {0, 0, 0};
    is.read(sniff, 3);
    is.seekg(0);
    PointCloud cloud;
    if (sniff[0] == 'p' && sniff[1] == 'l' && sniff[2] == 'y')
        cloud = load_points_ply(is, path);
    else
        cloud = load_points_ascii(is, path);
    if (cloud.positions.empty()) throw EmptyCloud("point file '" + path + "' holds no points");
    return cloud;
}

void normalize_points(PointCloud& cloud, const Vec3& domain_min, const Vec3& domain_max) {
    if (cloud.positions.empty()) throw EmptyCloud("cannot normalize an empty cloud");
    Vec3 lo = cloud.positions[0], hi = cloud.positions[0];
    for (const Vec3& p : cloud.positions) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    const Vec3 cloud_extent = hi - lo;
    const double max_extent = std::max({cloud_extent.x, cloud_extent.y, cloud_extent.z});
    const Vec3 domain_extent = domain_max - domain_min;
    const Vec3 target_lo = domain_min + domain_extent * 0.1;
    const Vec3 target_extent = domain_extent * 0.8;

    double scale = 1.0;
    if (max_extent > 1e-12) scale = std::min({target_extent.x, target_extent.y, target_extent.z}) / max_extent;

    for (Vec3& p : cloud.positions) {
        for (int a = 0; a < 3; ++a) {
            const double centered = 0.5 * (target_extent[a] - cloud_extent[a] * scale);
            p[a] = target_lo[a] + (p[a] - lo[a]) * scale + centered;
        }
    }
    if (cloud.has_covariance)
        for (Mat3& c : cloud.covariances) c *= scale * scale;
}

SceneRuntime build_runtime(const SceneConfig& config, bool require_concrete_materials) {
    validate_scene(config);
    SceneRuntime rt;
    rt.sim.grid = GridField::make(config.domain_min, config.domain_max, config.grid_resolution);
    rt.sim.params.dt = config.dt;
    rt.sim.params.gravity = config.gravity;
    rt.sim.boundaries.items = config.boundary_conditions;

    for (const MaterialEntry& m : config.materials) {
        if (m.learnable) {
            rt.any_learnable = true;
            if (require_concrete_materials)
                throw ValidationError(
                    "scene has a \"learnable\" material slot; run the estimator or provide "
                    "concrete materials");
            rt.sim.materials.entries.push_back(BlendedMaterial::from(MaterialSpec{}));
        } else {
            rt.sim.materials.entries.push_back(BlendedMaterial::from(m.spec));
        }
    }

    std::vector<Vec3> positions;
    std::vector<double> masses, volumes;
    std::vector<Vec3> velocities;
    std::vector<int> particle_material;

    for (std::size_t si = 0; si < config.sources.size(); ++si) {
        const ParticleSource& src = config.sources[si];
        SampledSource sampled;
        if (src.kind == ParticleSource::Kind::PointFile) {
            PointCloud cloud = load_points(src.path);
            normalize_points(cloud, config.domain_min, config.domain_max);
            const double half = 0.5 * rt.sim.grid.dx;
            const double particle_volume = half * half * half;
            const double default_sigma = rt.sim.grid.dx / 4.0;
            for (std::size_t p = 0; p < cloud.positions.size(); ++p) {
                const double opacity = p < cloud.opacities.size() ? cloud.opacities[p] : 1.0;
                if (opacity < src.opacity_threshold) continue;
                sampled.positions.push_back(cloud.positions[p]);
                sampled.masses.push_back(src.density * particle_volume);
                sampled.volumes.push_back(particle_volume);
                GaussianKernel kern;
                kern.center = cloud.positions[p];
                kern.covariance = cloud.has_covariance
                                      ? cloud.covariances[p]
                                      : Mat3::identity() * (default_sigma * default_sigma);
                kern.opacity = opacity;
                if (p < cloud.payload.size()) kern.payload = cloud.payload[p];
                sampled.kernels.push_back(std::move(kern));
            }
            if (sampled.positions.empty())
                throw EmptyCloud("source " + std::to_string(si)
                                 + ": all points filtered by the opacity threshold");
        } else {
            sampled = sample_shape(src, rt.sim.grid, config.seed + si);
        }
        for (std::size_t p = 0; p < sampled.positions.size(); ++p) {
            positions.push_back(sampled.positions[p]);
            masses.push_back(sampled.masses[p]);
            volumes.push_back(sampled.volumes[p]);
            velocities.push_back(src.velocity);
            particle_material.push_back(src.material);
            rt.particle_source.push_back(static_cast<int>(si));
            rt.kernels.push_back(std::move(sampled.kernels[p]));
        }
    }

    rt.sim.initial = init_state(positions, masses, volumes, rt.sim.grid);
    rt.sim.initial.v = std::move(velocities);  // per-source initial velocities
    rt.sim.materials.particle_material = std::move(particle_material);
    return rt;
}

}  // namespace mpmgs
