#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recalign/repmap.hpp"

// JSON instance files: a pair of finite domains over shared X/Y spaces plus
// the representation space Z to search over. Schema:
//
// {
//   "name":   "example1-2x2",
//   "x_space": ["x0", "x1"],
//   "y_space": ["y0", "y1"],
//   "z_space": ["z0", "z1"],
//   "seen":   { "px": [...], "py_given_x": [[...], ...] },
//   "unseen": { "px": [...], "py_given_x": [[...], ...] },
//   "x_points": [[...], ...]   // optional embedding; selects
//                              // squared-Euclidean distortion
// }

namespace recalign::instance_io {

struct Instance {
    std::string name;
    prob::FiniteSpace x_space;
    prob::FiniteSpace y_space;
    prob::FiniteSpace z_space;
    repmap::FiniteDomainModel seen;
    repmap::FiniteDomainModel unseen;
    std::optional<std::vector<std::vector<double>>> x_points;

    repmap::Distortion default_distortion() const;
};

Instance parse_instance_text(const std::string& text, const std::string& origin);
Instance load_instance(const std::string& path);

} // namespace recalign::instance_io
