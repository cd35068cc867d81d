#include "recalign/instance_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace recalign::instance_io {

using json = nlohmann::json;
using prob::Channel;
using prob::FiniteSpace;
using prob::Pmf;

namespace {

FiniteSpace parse_space(const json& j, const std::string& key, const std::string& origin) {
    if (!j.contains(key)) throw ParseError(origin + ": missing '" + key + "'");
    return FiniteSpace(j.at(key).get<std::vector<std::string>>());
}

repmap::FiniteDomainModel parse_domain(const json& j, const std::string& key,
                                       const FiniteSpace& x, const FiniteSpace& y,
                                       const std::string& origin) {
    if (!j.contains(key)) throw ParseError(origin + ": missing '" + key + "' domain");
    const json& d = j.at(key);
    Pmf px(x, d.at("px").get<std::vector<double>>());
    Mat rows = Mat::from_rows(d.at("py_given_x").get<std::vector<std::vector<double>>>());
    Channel chan(x, y, std::move(rows));
    return repmap::FiniteDomainModel(x, y, std::move(px), std::move(chan));
}

} // namespace

repmap::Distortion Instance::default_distortion() const {
    if (x_points.has_value()) return repmap::Distortion::squared_euclidean(*x_points);
    return repmap::Distortion::zero_one(x_space.size());
}

Instance parse_instance_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    try {
        Instance inst;
        inst.name = j.value("name", origin);
        inst.x_space = parse_space(j, "x_space", origin);
        inst.y_space = parse_space(j, "y_space", origin);
        inst.z_space = parse_space(j, "z_space", origin);
        inst.seen = parse_domain(j, "seen", inst.x_space, inst.y_space, origin);
        inst.unseen = parse_domain(j, "unseen", inst.x_space, inst.y_space, origin);
        if (j.contains("x_points")) {
            auto pts = j.at("x_points").get<std::vector<std::vector<double>>>();
            if (pts.size() != inst.x_space.size())
                throw ParseError(origin + ": x_points count does not match x_space");
            inst.x_points = std::move(pts);
        }
        return inst;
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    } catch (const InvalidDistribution& e) {
        throw ParseError(origin + ": " + e.what());
    } catch (const SpaceMismatch& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_instance_text(buf.str(), path);
}

} // namespace recalign::instance_io
