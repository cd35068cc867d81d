#include "recalign/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace recalign::frontier {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Compositions of `total` into `parts` nonnegative integers, first
// coordinate largest first. Divided by `total` these are the simplex grid
// rows; total = 1 yields exactly the unit rows.
std::vector<std::vector<double>> simplex_rows(int total, std::size_t parts) {
    std::vector<std::vector<double>> rows;
    std::vector<int> counts(parts, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int remaining) {
        if (pos + 1 == parts) {
            counts[pos] = remaining;
            std::vector<double> row(parts);
            for (std::size_t i = 0; i < parts; ++i)
                row[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
            rows.push_back(std::move(row));
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            counts[pos] = k;
            rec(pos + 1, remaining - k);
        }
    };
    rec(0, total);
    return rows;
}

std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t cap) {
    std::size_t result = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (base != 0 && result > cap / base)
            throw SearchSpaceTooLarge("map family exceeds the configured cap");
        result *= base;
    }
    if (result > cap) throw SearchSpaceTooLarge("map family exceeds the configured cap");
    return result;
}

// fn(i) for i in [0, n), chunked over `workers` threads. fn must only touch
// per-index state. The first exception thrown by any worker is rethrown on
// the caller after all threads joined.
void parallel_for_index(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    const std::size_t chunk = (n + nw - 1) / nw;
    std::vector<std::thread> threads;
    threads.reserve(nw);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < nw; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        threads.emplace_back([lo, hi, &fn, &first_error, &error_mutex] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct MapStats {
    double k = 0.0;          // discrepancy, +inf when undefined under KL
    double mi_u = 0.0;       // I_u(Y;Z)
    double mi_s = 0.0;       // I_s(Y;Z)
    double r_min = 0.0;      // min over decoders of R(f, theta)
    double r_theta = 0.0;    // R(f, theta) for the fixed decoder, when given
};

struct ScanRequest {
    bool need_k = false;
    bool need_r_min = false;
    DivergenceKind div = DivergenceKind::kl;
    const Distortion* loss = nullptr;
    const Decoder* theta = nullptr;
};

std::vector<MapStats> scan_family(const FiniteDomainModel& du, const FiniteDomainModel& ds,
                                  const MapFamily& family, const ScanRequest& req) {
    std::vector<MapStats> stats(family.count());
    parallel_for_index(family.count(), family.workers(), [&](std::size_t i) {
        const RepresentationMap f = family.map_at(i);
        MapStats s;
        const prob::JointPmf pu = repmap::pushforward_joint(du, f);
        const prob::JointPmf ps = repmap::pushforward_joint(ds, f);
        s.mi_u = prob::mutual_information(pu);
        s.mi_s = prob::mutual_information(ps);
        if (req.need_k) {
            try {
                s.k = prob::divergence(pu, ps, req.div);
            } catch (const SupportViolation&) {
                s.k = kInf;
            }
        }
        if (req.need_r_min) {
            const Decoder br = best_response_decoder(du, f, *req.loss);
            s.r_min = repmap::reconstruction_loss(du, f, br, *req.loss);
        }
        if (req.theta != nullptr)
            s.r_theta = repmap::reconstruction_loss(du, f, *req.theta, *req.loss);
        stats[i] = s;
    });
    return stats;
}

} // namespace

MapSearch MapSearch::deterministic_maps(std::size_t cap, int workers) {
    MapSearch s;
    s.kind = Kind::deterministic;
    s.cap = cap;
    s.workers = workers;
    return s;
}

MapSearch MapSearch::simplex(int resolution, std::size_t cap, int workers) {
    MapSearch s;
    s.kind = Kind::simplex_grid;
    s.resolution = resolution;
    s.cap = cap;
    s.workers = workers;
    return s;
}

MapFamily::MapFamily(FiniteSpace x_space, FiniteSpace z_space, const MapSearch& search)
    : x_space_(std::move(x_space)), z_space_(std::move(z_space)), workers_(search.workers) {
    deterministic_ = search.kind == MapSearch::Kind::deterministic;
    resolution_ = deterministic_ ? 1 : search.resolution;
    if (resolution_ < 1) throw Error("MapFamily: resolution must be >= 1");
    if (deterministic_) {
        for (std::size_t z = 0; z < z_space_.size(); ++z) {
            std::vector<double> row(z_space_.size(), 0.0);
            row[z] = 1.0;
            row_choices_.push_back(std::move(row));
        }
    } else {
        row_choices_ = simplex_rows(resolution_, z_space_.size());
    }
    count_ = checked_pow(row_choices_.size(), x_space_.size(), search.cap);
}

RepresentationMap MapFamily::map_at(std::size_t index) const {
    if (index >= count_) throw IndexOutOfRange("MapFamily::map_at: index out of range");
    const std::size_t base = row_choices_.size();
    const std::size_t nx = x_space_.size();
    // Mixed-radix decode; the x0 digit is the most significant so map ids
    // sort lexicographically in enumeration order.
    std::vector<std::size_t> digits(nx, 0);
    std::size_t rem = index;
    for (std::size_t x = nx; x-- > 0;) {
        digits[x] = rem % base;
        rem /= base;
    }
    Mat rows(nx, z_space_.size());
    std::string id = deterministic_ ? "d" : ("s" + std::to_string(resolution_) + ":");
    for (std::size_t x = 0; x < nx; ++x) {
        const auto& choice = row_choices_[digits[x]];
        for (std::size_t z = 0; z < z_space_.size(); ++z) rows(x, z) = choice[z];
        if (!deterministic_ && x > 0) id += '.';
        id += std::to_string(digits[x]);
    }
    return RepresentationMap(x_space_, z_space_, std::move(rows), std::move(id));
}

std::vector<RepresentationMap> enumerate_deterministic_maps(const FiniteSpace& x_space,
                                                            const FiniteSpace& z_space,
                                                            std::size_t cap) {
    MapFamily family(x_space, z_space, MapSearch::deterministic_maps(cap));
    std::vector<RepresentationMap> maps;
    maps.reserve(family.count());
    for (std::size_t i = 0; i < family.count(); ++i) maps.push_back(family.map_at(i));
    return maps;
}

std::vector<RepresentationMap> stochastic_map_grid(const FiniteSpace& x_space,
                                                   const FiniteSpace& z_space, int resolution,
                                                   std::size_t cap) {
    MapFamily family(x_space, z_space, MapSearch::simplex(resolution, cap));
    std::vector<RepresentationMap> maps;
    maps.reserve(family.count());
    for (std::size_t i = 0; i < family.count(); ++i) maps.push_back(family.map_at(i));
    return maps;
}

bool ShapeReport::pass() const {
    if (max_monotonicity_violation > 1e-9) return false;
    if (convexity_checked && max_convexity_violation > convexity_tolerance) return false;
    return true;
}

double worst_mi_gap(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                    double eps, const MapFamily& family, DivergenceKind div) {
    if (eps < 0.0) throw Error("worst_mi_gap: negative budget");
    ScanRequest req;
    req.need_k = true;
    req.div = div;
    const auto stats = scan_family(d_unseen, d_seen, family, req);
    double best = -1.0;
    for (const MapStats& s : stats) {
        const double gap = std::abs(s.mi_u - s.mi_s);
        if (s.k <= eps && gap > best) best = gap;
    }
    if (best < 0.0)
        throw NoFeasibleMap("worst_mi_gap: no searched map meets the discrepancy budget");
    return best;
}

double worst_mi_loss(const FiniteDomainModel& d_unseen, double gamma, const MapFamily& family,
                     const Distortion& loss) {
    if (gamma < 0.0) throw Error("worst_mi_loss: negative budget");
    const double i_yx = repmap::label_input_mi(d_unseen);
    ScanRequest req;
    req.need_r_min = true;
    req.loss = &loss;
    const auto stats = scan_family(d_unseen, d_unseen, family, req);
    bool any = false;
    double best = -kInf;
    for (const MapStats& s : stats) {
        if (s.r_min <= gamma) {
            any = true;
            best = std::max(best, i_yx - s.mi_u);
        }
    }
    if (!any)
        throw NoFeasibleMap("worst_mi_loss: no searched pair meets the reconstruction budget");
    return best;
}

std::vector<FrontierPoint> trade_off_curve(const FiniteDomainModel& d_unseen,
                                           const FiniteDomainModel& d_seen, const Decoder& theta,
                                           const Distortion& loss,
                                           const std::vector<double>& gamma_grid,
                                           const MapFamily& family, DivergenceKind div) {
    for (std::size_t i = 1; i < gamma_grid.size(); ++i)
        if (gamma_grid[i] < gamma_grid[i - 1])
            throw Error("trade_off_curve: gamma grid must be sorted ascending");
    ScanRequest req;
    req.need_k = true;
    req.div = div;
    req.loss = &loss;
    req.theta = &theta;
    const auto stats = scan_family(d_unseen, d_seen, family, req);

    std::vector<FrontierPoint> curve;
    curve.reserve(gamma_grid.size());
    for (double gamma : gamma_grid) {
        FrontierPoint pt;
        pt.gamma = gamma;
        pt.decoder_id = theta.id;
        std::size_t arg = 0;
        double best = kInf;
        bool found = false;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            if (stats[i].r_theta > gamma) continue;
            if (std::isinf(stats[i].k)) continue; // undefined divergence: never an argmin
            if (!found || stats[i].k < best) {    // strict: ties keep the lowest map index
                best = stats[i].k;
                arg = i;
                found = true;
            }
        }
        if (found) {
            pt.feasible = true;
            pt.k_min = best;
            pt.argmin_map_id = family.map_at(arg).id;
        } else {
            pt.feasible = false;
            pt.k_min = std::numeric_limits<double>::quiet_NaN();
        }
        curve.push_back(std::move(pt));
    }
    return curve;
}

Decoder best_response_decoder(const FiniteDomainModel& d, const RepresentationMap& f,
                              const Distortion& loss) {
    const prob::JointPmf xz = repmap::input_feature_joint(d, f);
    const std::size_t nz = f.z_space.size();
    const std::size_t nx = d.x_space.size();

    if (loss.is_embedded()) {
        // Squared-Euclidean: the conditional mean minimizes expected
        // distortion; zero-mass z falls back to the lowest-index point.
        const std::size_t dim = loss.point_of(0).size();
        std::vector<std::vector<double>> out(nz);
        for (std::size_t z = 0; z < nz; ++z) {
            double mass = 0.0;
            std::vector<double> mean(dim, 0.0);
            for (std::size_t x = 0; x < nx; ++x) {
                const double w = xz.probs(x, z);
                if (w == 0.0) continue;
                mass += w;
                const auto& pt = loss.point_of(x);
                for (std::size_t i = 0; i < dim; ++i) mean[i] += w * pt[i];
            }
            if (mass > 0.0) {
                for (double& m : mean) m /= mass;
                out[z] = std::move(mean);
            } else {
                out[z] = loss.point_of(0);
            }
        }
        return Decoder{f.z_space, std::move(out), "br-embedded"};
    }

    const std::size_t cands = loss.candidate_count();
    std::vector<std::size_t> out(nz, 0);
    for (std::size_t z = 0; z < nz; ++z) {
        std::size_t best = 0;
        double best_cost = kInf;
        for (std::size_t c = 0; c < cands; ++c) {
            double cost = 0.0;
            for (std::size_t x = 0; x < nx; ++x) {
                const double w = xz.probs(x, z);
                if (w != 0.0) cost += w * loss.cost_to_candidate(x, c);
            }
            if (cost < best_cost) { // strict: ties keep the lowest candidate index
                best_cost = cost;
                best = c;
            }
        }
        out[z] = best; // zero-mass z: all costs 0, candidate 0 wins
    }
    return Decoder{f.z_space, std::move(out), "br-table"};
}

BoundReport mi_bound_report(const FiniteDomainModel& d_unseen, const FiniteDomainModel& d_seen,
                            const RepresentationMap& f, const Decoder& theta,
                            const Distortion& loss, DivergenceKind div, const MapFamily& family) {
    BoundReport rep;
    rep.map_id = f.id;
    rep.decoder_id = theta.id;
    const prob::JointPmf pu = repmap::pushforward_joint(d_unseen, f);
    const prob::JointPmf ps = repmap::pushforward_joint(d_seen, f);
    rep.i_u_yz = prob::mutual_information(pu);
    rep.i_s_yz = prob::mutual_information(ps);
    rep.i_u_yx = repmap::label_input_mi(d_unseen);
    rep.k_f = prob::divergence(pu, ps, div); // SupportViolation propagates to the caller
    rep.r_f_theta = repmap::reconstruction_loss(d_unseen, f, theta, loss);
    rep.w_of_k = worst_mi_gap(d_unseen, d_seen, rep.k_f, family, div);
    rep.q_of_r = worst_mi_loss(d_unseen, rep.r_f_theta, family, loss);
    rep.slack_1 = rep.i_u_yz - (rep.i_s_yz - rep.w_of_k);
    rep.slack_2 = rep.i_u_yz - (rep.i_u_yx - rep.q_of_r);
    return rep;
}

std::vector<BoundReport> mi_bound_report_all(const FiniteDomainModel& d_unseen,
                                             const FiniteDomainModel& d_seen,
                                             const Distortion& loss, DivergenceKind div,
                                             const MapFamily& family) {
    const double i_yx = repmap::label_input_mi(d_unseen);
    ScanRequest req;
    req.need_k = true;
    req.div = div;
    req.need_r_min = true;
    req.loss = &loss;
    const auto stats = scan_family(d_unseen, d_seen, family, req);

    std::vector<BoundReport> reports(family.count());
    parallel_for_index(family.count(), family.workers(), [&](std::size_t i) {
        BoundReport rep;
        rep.map_id = family.map_at(i).id;
        rep.decoder_id = "br";
        rep.i_u_yz = stats[i].mi_u;
        rep.i_s_yz = stats[i].mi_s;
        rep.i_u_yx = i_yx;
        rep.k_f = stats[i].k;
        rep.r_f_theta = stats[i].r_min; // best-response decoder per map
        double w = -1.0;
        double q = -kInf;
        for (const MapStats& s : stats) {
            const double gap = std::abs(s.mi_u - s.mi_s);
            if (s.k <= rep.k_f && gap > w) w = gap;
            if (s.r_min <= rep.r_f_theta) q = std::max(q, i_yx - s.mi_u);
        }
        rep.w_of_k = w;    // the map itself is feasible, so w, q are set
        rep.q_of_r = q;
        rep.slack_1 = rep.i_u_yz - (rep.i_s_yz - rep.w_of_k);
        rep.slack_2 = rep.i_u_yz - (rep.i_u_yx - rep.q_of_r);
        reports[i] = rep;
    });
    return reports;
}

ShapeReport curve_shape_report(const std::vector<FrontierPoint>& curve, int resolution,
                               bool check_convexity) {
    std::vector<const FrontierPoint*> feasible;
    for (const auto& pt : curve)
        if (pt.feasible) feasible.push_back(&pt);

    ShapeReport rep;
    rep.feasible_points = feasible.size();
    if (feasible.size() < 3)
        throw CurveTooShort("curve_shape_report: fewer than 3 feasible points");

    for (std::size_t i = 1; i < feasible.size(); ++i) {
        const double rise = feasible[i]->k_min - feasible[i - 1]->k_min;
        rep.max_monotonicity_violation = std::max(rep.max_monotonicity_violation, rise);
    }

    rep.convexity_checked = check_convexity;
    if (check_convexity) {
        double k_lo = kInf, k_hi = -kInf;
        for (const auto* pt : feasible) {
            k_lo = std::min(k_lo, pt->k_min);
            k_hi = std::max(k_hi, pt->k_min);
        }
        rep.convexity_tolerance = 1e-6 + (k_hi - k_lo) / std::max(1, resolution);
        for (std::size_t i = 1; i + 1 < feasible.size(); ++i) {
            const double g0 = feasible[i - 1]->gamma;
            const double g2 = feasible[i + 1]->gamma;
            if (g2 <= g0) continue;
            const double t = (feasible[i]->gamma - g0) / (g2 - g0);
            const double chord =
                feasible[i - 1]->k_min + t * (feasible[i + 1]->k_min - feasible[i - 1]->k_min);
            rep.max_convexity_violation =
                std::max(rep.max_convexity_violation, feasible[i]->k_min - chord);
        }
    }
    return rep;
}

void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& curve) {
    out << "gamma,k_min,map_id,decoder_id,feasible\n";
    char buf[64];
    for (const auto& pt : curve) {
        std::snprintf(buf, sizeof buf, "%.17g", pt.gamma);
        out << buf << ',';
        if (pt.feasible) {
            std::snprintf(buf, sizeof buf, "%.17g", pt.k_min);
            out << buf;
        } else {
            out << "nan";
        }
        out << ',' << pt.argmin_map_id << ',' << pt.decoder_id << ',' << (pt.feasible ? 1 : 0)
            << '\n';
    }
}

std::string bound_report_json(const BoundReport& report, DivergenceKind div) {
    char buf[64];
    // Non-finite values (a map with undefined divergence has K = +inf)
    // serialize as null; JSON has no infinity literal.
    auto num = [&buf](double v) {
        if (!std::isfinite(v)) return std::string("null");
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string s = "{";
    s += "\"i_u_yz\":" + num(report.i_u_yz);
    s += ",\"i_s_yz\":" + num(report.i_s_yz);
    s += ",\"i_u_yx\":" + num(report.i_u_yx);
    s += ",\"k_f\":" + num(report.k_f);
    s += ",\"w_of_k\":" + num(report.w_of_k);
    s += ",\"q_of_r\":" + num(report.q_of_r);
    s += ",\"r_f_theta\":" + num(report.r_f_theta);
    s += ",\"slack_1\":" + num(report.slack_1);
    s += ",\"slack_2\":" + num(report.slack_2);
    s += ",\"map_id\":\"" + report.map_id + "\"";
    s += ",\"decoder_id\":\"" + report.decoder_id + "\"";
    s += ",\"divergence\":\"" + std::string(prob::to_string(div)) + "\"";
    s += "}";
    return s;
}

} // namespace recalign::frontier
