#include "pilesim/network.hpp"

#include "pilesim/error.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

namespace pilesim {

namespace {

struct Segment {
    Vec3 p0;
    Vec3 p1;
    int strand = 0;
    int first_point = 0;
    double radius = 0.0;
};

struct CellKey {
    long long x, y, z;
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

SegmentDistance segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
    const Vec3 d1 = p1 - p0;
    const Vec3 d2 = q1 - q0;
    const Vec3 r = p0 - q0;
    const double a = dot(d1, d1);
    const double e = dot(d2, d2);
    const double f = dot(d2, r);
    constexpr double eps = 1e-30;

    double s = 0.0;
    double t = 0.0;
    if (a <= eps && e <= eps) {
        // both degenerate
    } else if (a <= eps) {
        t = clamp01(f / e);
    } else {
        const double c = dot(d1, r);
        if (e <= eps) {
            s = clamp01(-c / a);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            s = denom > eps * a * e ? clamp01((b * f - c * e) / denom) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = clamp01(-c / a);
            } else if (t > 1.0) {
                t = 1.0;
                s = clamp01((b - c) / a);
            }
        }
    }
    const Vec3 cp = p0 + s * d1;
    const Vec3 cq = q0 + t * d2;
    return {distance(cp, cq), s, t};
}

ContactSet detect_contacts(const PileModel& model) {
    std::vector<Segment> segments;
    double max_radius = 0.0;
    double max_extent = 0.0;
    for (int si = 0; si < static_cast<int>(model.strands.size()); ++si) {
        const Strand& s = model.strands[si];
        max_radius = std::max(max_radius, s.radius_cm);
        for (int k = 0; k + 1 < static_cast<int>(s.points.size()); ++k) {
            const Vec3& a = s.points[k];
            const Vec3& b = s.points[k + 1];
            segments.push_back({a, b, si, k, s.radius_cm});
            max_extent = std::max({max_extent, std::abs(a.x - b.x), std::abs(a.y - b.y),
                                   std::abs(a.z - b.z)});
        }
    }
    ContactSet out;
    if (segments.empty()) return out;

    // Strands can only touch when their anchors are close on the base fabric.
    // Measuring that on the undeformed base keeps a sample wrapped more than
    // once around a thin rod from touching its own other layers.
    std::vector<double> reach(model.strands.size(), 0.0);
    for (std::size_t si = 0; si < model.strands.size(); ++si) {
        const Strand& s = model.strands[si];
        for (const Vec3& p : s.points) reach[si] = std::max(reach[si], distance(p, s.points.front()));
    }
    auto anchored_nearby = [&](int a, int b, double threshold) {
        const int pa = model.strands[a].pile_index;
        const int pb = model.strands[b].pile_index;
        const int piles = static_cast<int>(model.piles.size());
        if (pa < 0 || pb < 0 || pa >= piles || pb >= piles) return true;
        const double dx = model.piles[pa].anchor_x - model.piles[pb].anchor_x;
        const double dy = model.piles[pa].anchor_y - model.piles[pb].anchor_y;
        const double limit = 2.0 * (reach[a] + reach[b]) + threshold;
        return dx * dx + dy * dy <= limit * limit;
    };

    // Uniform grid keyed by segment midpoint. With cell >= extent + 2 * max
    // radius, any touching pair has midpoints in neighbouring cells.
    const double cell = std::max(max_extent + 2.0 * max_radius, 1e-9);
    auto key_of = [cell](const Vec3& p) {
        return CellKey{static_cast<long long>(std::floor(p.x / cell)),
                       static_cast<long long>(std::floor(p.y / cell)),
                       static_cast<long long>(std::floor(p.z / cell))};
    };
    std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
    std::vector<CellKey> keys(segments.size());
    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
        keys[i] = key_of(0.5 * (segments[i].p0 + segments[i].p1));
        grid[keys[i]].push_back(i);
    }

    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
        const Segment& si = segments[i];
        const CellKey& k = keys[i];
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
                    if (it == grid.end()) continue;
                    for (int j : it->second) {
                        const Segment& sj = segments[j];
                        if (sj.strand <= si.strand) continue;
                        const double threshold = si.radius + sj.radius;
                        const SegmentDistance d = segment_distance(si.p0, si.p1, sj.p0, sj.p1);
                        if (d.distance > threshold) continue;
                        if (!anchored_nearby(si.strand, sj.strand, threshold)) continue;
                        out.contacts.push_back({si.strand, si.first_point + (d.s > 0.5 ? 1 : 0),
                                                sj.strand, sj.first_point + (d.t > 0.5 ? 1 : 0),
                                                d.distance});
                    }
                }
    }

    // Collapse contacts that land on the same vertex pair, keeping the smallest gap.
    auto key_less = [](const Contact& a, const Contact& b) {
        if (a.strand_i != b.strand_i) return a.strand_i < b.strand_i;
        if (a.strand_j != b.strand_j) return a.strand_j < b.strand_j;
        if (a.point_i != b.point_i) return a.point_i < b.point_i;
        if (a.point_j != b.point_j) return a.point_j < b.point_j;
        return a.gap_cm < b.gap_cm;
    };
    auto same_vertices = [](const Contact& a, const Contact& b) {
        return a.strand_i == b.strand_i && a.strand_j == b.strand_j && a.point_i == b.point_i &&
               a.point_j == b.point_j;
    };
    std::sort(out.contacts.begin(), out.contacts.end(), key_less);
    out.contacts.erase(std::unique(out.contacts.begin(), out.contacts.end(), same_vertices),
                       out.contacts.end());
    return out;
}

void ResistorNetwork::add_conductance(int a, int b, double siemens) {
    if (a == b) throw InvalidArgument("resistor network: self-loop edge on node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= node_count || b >= node_count)
        throw InvalidArgument("resistor network: node id out of range");
    if (!(siemens > 0.0) || !std::isfinite(siemens))
        throw InvalidArgument("resistor network: conductance must be positive and finite");
    edges.push_back({a, b, siemens});
}

void ResistorNetwork::add_resistor(int a, int b, double ohms) {
    if (!(ohms > 0.0)) throw InvalidArgument("resistor network: resistance must be > 0");
    add_conductance(a, b, 1.0 / ohms);
}

ResistorNetwork assemble_network(const PileModel& model, const ContactSet& contacts,
                                 const SensorSpec& spec) {
    std::vector<int> offset(model.strands.size() + 1, 0);
    for (std::size_t s = 0; s < model.strands.size(); ++s)
        offset[s + 1] = offset[s] + static_cast<int>(model.strands[s].points.size());

    ResistorNetwork net;
    net.node_count = offset.back() + 2;
    net.terminal_a = offset.back();
    net.terminal_b = offset.back() + 1;
    auto node = [&](const PointRef& r) { return offset[r.strand] + r.point; };

    const double ohm_per_cm = spec.yarn.linear_resistance_ohm_per_cm;
    for (std::size_t s = 0; s < model.strands.size(); ++s) {
        const Strand& strand = model.strands[s];
        for (std::size_t k = 0; k < strand.segment_yarn_cm.size(); ++k) {
            const int a = offset[s] + static_cast<int>(k);
            net.add_resistor(a, a + 1, ohm_per_cm * strand.segment_yarn_cm[k]);
        }
    }
    for (const RowLink& link : model.row_links) {
        net.add_resistor(node(link.from), node(link.to), ohm_per_cm * link.yarn_cm);
    }
    for (const Contact& c : contacts.contacts) {
        net.add_resistor(node({c.strand_i, c.point_i}), node({c.strand_j, c.point_j}),
                         spec.contact_resistance_ohm);
    }
    for (const PointRef& r : model.terminal_a)
        net.add_resistor(node(r), net.terminal_a, spec.contact_resistance_ohm);
    for (const PointRef& r : model.terminal_b)
        net.add_resistor(node(r), net.terminal_b, spec.contact_resistance_ohm);
    return net;
}

double equivalent_resistance(const ResistorNetwork& net) {
    const int n = net.node_count;
    if (net.terminal_a < 0 || net.terminal_b < 0 || net.terminal_a >= n || net.terminal_b >= n)
        throw InvalidArgument("equivalent_resistance: terminal id out of range");
    if (net.terminal_a == net.terminal_b) return 0.0;

    // Restrict to the component holding terminal B; floating islands would
    // make the grounded Laplacian singular.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (const ResistorEdge& e : net.edges) {
        const int ra = find(e.a);
        const int rb = find(e.b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    const int root = find(net.terminal_b);
    if (find(net.terminal_a) != root) {
        throw OpenCircuit("terminals are not connected");
    }

    // Unknowns: every node of the component except the grounded terminal B.
    std::vector<int> index(n, -1);
    int unknowns = 0;
    for (int v = 0; v < n; ++v)
        if (v != net.terminal_b && find(v) == root) index[v] = unknowns++;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(net.edges.size() * 4);
    for (const ResistorEdge& e : net.edges) {
        const int ia = index[e.a];
        const int ib = index[e.b];
        if (ia < 0 && ib < 0) continue;
        const double g = e.conductance_s;
        if (ia >= 0) triplets.emplace_back(ia, ia, g);
        if (ib >= 0) triplets.emplace_back(ib, ib, g);
        if (ia >= 0 && ib >= 0) {
            triplets.emplace_back(ia, ib, -g);
            triplets.emplace_back(ib, ia, -g);
        }
    }
    Eigen::SparseMatrix<double> laplacian(unknowns, unknowns);
    laplacian.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::VectorXd current = Eigen::VectorXd::Zero(unknowns);
    current[index[net.terminal_a]] = 1.0;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(laplacian);
    if (solver.info() != Eigen::Success) throw NumericalFailure("Laplacian factorization failed");
    const Eigen::VectorXd potential = solver.solve(current);
    if (solver.info() != Eigen::Success) throw NumericalFailure("Laplacian solve failed");

    // Residual relative to the magnitude of the terms being summed per row.
    const double residual = (laplacian * potential - current).lpNorm<Eigen::Infinity>();
    const double scale =
        1.0 + (laplacian.cwiseAbs() * potential.cwiseAbs()).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-10 * scale)) {
        throw NumericalFailure("Laplacian solve residual " + std::to_string(residual) +
                               " exceeds tolerance");
    }
    return potential[index[net.terminal_a]];
}

double plied_linear_resistance(double base_ohm_per_cm, int plies) {
    if (plies < 1) throw InvalidArgument("plied_linear_resistance: plies must be >= 1");
    if (!(base_ohm_per_cm > 0.0))
        throw InvalidArgument("plied_linear_resistance: base resistance must be > 0");
    return base_ohm_per_cm / plies;
}

}  // namespace pilesim
