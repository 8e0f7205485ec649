#include "pilesim/error.hpp"
#include "pilesim/network.hpp"
#include "pilesim/protocol.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace pilesim;

namespace {

/// Brute-force nodal analysis: dense Laplacian, ground terminal B, inject
/// 1 A at terminal A, Gaussian elimination with partial pivoting.
/// Only valid for connected networks.
double dense_oracle(const ResistorNetwork& net) {
    const int n = net.node_count;
    std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
    for (const ResistorEdge& e : net.edges) {
        L[e.a][e.a] += e.conductance_s;
        L[e.b][e.b] += e.conductance_s;
        L[e.a][e.b] -= e.conductance_s;
        L[e.b][e.a] -= e.conductance_s;
    }
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (i != net.terminal_b) keep.push_back(i);
    const int m = static_cast<int>(keep.size());
    std::vector<std::vector<double>> A(m, std::vector<double>(m + 1, 0.0));
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) A[r][c] = L[keep[r]][keep[c]];
        A[r][m] = keep[r] == net.terminal_a ? 1.0 : 0.0;
    }
    for (int col = 0; col < m; ++col) {
        int pivot = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
        std::swap(A[col], A[pivot]);
        for (int r = col + 1; r < m; ++r) {
            const double f = A[r][col] / A[col][col];
            for (int c = col; c <= m; ++c) A[r][c] -= f * A[col][c];
        }
    }
    std::vector<double> x(m, 0.0);
    for (int r = m - 1; r >= 0; --r) {
        double s = A[r][m];
        for (int c = r + 1; c < m; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    for (int r = 0; r < m; ++r)
        if (keep[r] == net.terminal_a) return x[r];
    return 0.0;
}

/// Connected random network: a random spanning tree plus extra edges.
ResistorNetwork random_network(std::mt19937_64& rng, int nodes, int edges) {
    std::uniform_real_distribution<double> ohms(1.0, 1000.0);
    ResistorNetwork net;
    net.node_count = nodes;
    std::vector<int> order(nodes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 1; i < nodes; ++i) {
        std::uniform_int_distribution<int> pick(0, i - 1);
        net.add_resistor(order[i], order[pick(rng)], ohms(rng));
    }
    std::uniform_int_distribution<int> node(0, nodes - 1);
    while (static_cast<int>(net.edges.size()) < edges) {
        const int a = node(rng);
        const int b = node(rng);
        if (a != b) net.add_resistor(a, b, ohms(rng));
    }
    net.terminal_a = 0;
    net.terminal_b = nodes - 1;
    return net;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

ResistorNetwork two_node() {
    ResistorNetwork net;
    net.node_count = 2;
    net.terminal_a = 0;
    net.terminal_b = 1;
    return net;
}

}  // namespace

TEST_CASE("series and parallel closed forms") {
    ResistorNetwork series;
    series.node_count = 3;
    series.terminal_a = 0;
    series.terminal_b = 2;
    series.add_resistor(0, 1, 120.0);
    series.add_resistor(1, 2, 33.0);
    CHECK(rel_err(equivalent_resistance(series), 153.0) < 1e-9);

    ResistorNetwork parallel = two_node();
    parallel.add_resistor(0, 1, 120.0);
    parallel.add_resistor(0, 1, 33.0);
    CHECK(rel_err(equivalent_resistance(parallel), 120.0 * 33.0 / 153.0) < 1e-9);
}

TEST_CASE("balanced and unbalanced Wheatstone bridges") {
    // Nodes: 0 = A, 1 and 2 = bridge midpoints, 3 = B.
    auto bridge = [](double r1, double r2, double r3, double r4, double r5) {
        ResistorNetwork net;
        net.node_count = 4;
        net.terminal_a = 0;
        net.terminal_b = 3;
        net.add_resistor(0, 1, r1);
        net.add_resistor(0, 2, r2);
        net.add_resistor(1, 3, r3);
        net.add_resistor(2, 3, r4);
        net.add_resistor(1, 2, r5);
        return net;
    };
    // Balanced: r1/r3 == r2/r4, so the bridge arm carries no current.
    const double balanced = (100.0 + 200.0) * (50.0 + 100.0) / (300.0 + 150.0);
    CHECK(rel_err(equivalent_resistance(bridge(100, 50, 200, 100, 777)), balanced) < 1e-9);

    // Unbalanced: Y-delta closed form.
    const double r1 = 10, r2 = 20, r3 = 30, r4 = 40, r5 = 50;
    const double num = r1 * r2 * (r3 + r4) + r3 * r4 * (r1 + r2) + r5 * (r1 + r3) * (r2 + r4);
    const double den = r5 * (r1 + r2 + r3 + r4) + (r1 + r2) * (r3 + r4);
    CHECK(rel_err(equivalent_resistance(bridge(r1, r2, r3, r4, r5)), num / den) < 1e-9);
}

TEST_CASE("random 8-node, 14-edge network matches the dense oracle") {
    std::mt19937_64 rng(2024);
    const ResistorNetwork net = random_network(rng, 8, 14);
    CHECK(rel_err(equivalent_resistance(net), dense_oracle(net)) < 1e-9);
}

TEST_CASE("random small networks match the dense oracle") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        std::uniform_int_distribution<int> size(2, 12);
        const int nodes = size(rng);
        std::uniform_int_distribution<int> extra(0, 2 * nodes);
        const ResistorNetwork net = random_network(rng, nodes, nodes - 1 + extra(rng));
        CHECK(rel_err(equivalent_resistance(net), dense_oracle(net)) < 1e-9);
    }
}

TEST_CASE("Rayleigh monotonicity: adding or strengthening an edge never raises R") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        ResistorNetwork net = random_network(rng, 10, 16);
        const double before = equivalent_resistance(net);

        ResistorNetwork added = net;
        std::uniform_int_distribution<int> node(0, 9);
        int a = node(rng), b = node(rng);
        while (a == b) b = node(rng);
        added.add_resistor(a, b, 10.0);
        CHECK(equivalent_resistance(added) <= before * (1.0 + 1e-12));

        ResistorNetwork stronger = net;
        std::uniform_int_distribution<std::size_t> edge(0, net.edges.size() - 1);
        stronger.edges[edge(rng)].conductance_s *= 3.0;
        CHECK(equivalent_resistance(stronger) <= before * (1.0 + 1e-12));
    }
}

TEST_CASE("R_eq is invariant under node relabelling and edge reordering") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const ResistorNetwork net = random_network(rng, 9, 15);
        std::vector<int> perm(net.node_count);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        ResistorNetwork relabelled;
        relabelled.node_count = net.node_count;
        relabelled.terminal_a = perm[net.terminal_a];
        relabelled.terminal_b = perm[net.terminal_b];
        for (const ResistorEdge& e : net.edges)
            relabelled.edges.push_back({perm[e.b], perm[e.a], e.conductance_s});
        std::shuffle(relabelled.edges.begin(), relabelled.edges.end(), rng);

        CHECK(rel_err(equivalent_resistance(relabelled), equivalent_resistance(net)) < 1e-9);
    }
}

TEST_CASE("disconnected terminals raise OpenCircuit") {
    ResistorNetwork net;
    net.node_count = 4;
    net.terminal_a = 0;
    net.terminal_b = 3;
    net.add_resistor(0, 1, 5.0);
    net.add_resistor(2, 3, 5.0);
    CHECK_THROWS_AS(equivalent_resistance(net), OpenCircuit);

    // Dangling components away from the terminals do not matter.
    net.add_resistor(1, 3, 5.0);
    net.node_count = 6;
    net.add_resistor(4, 5, 1.0);
    CHECK(rel_err(equivalent_resistance(net), 10.0) < 1e-12);
}

TEST_CASE("invalid resistor edges are rejected") {
    ResistorNetwork net = two_node();
    CHECK_THROWS_AS(net.add_resistor(0, 0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(net.add_resistor(0, 1, 0.0), InvalidArgument);
    CHECK_THROWS_AS(net.add_resistor(0, 1, -3.0), InvalidArgument);
    CHECK_THROWS_AS(net.add_resistor(0, 2, 1.0), InvalidArgument);
    CHECK_THROWS_AS(net.add_conductance(0, 1, std::nan("")), InvalidArgument);
}

TEST_CASE("plied yarn resistance is a parallel-conductor estimate") {
    CHECK(plied_linear_resistance(10.0, 1) == doctest::Approx(10.0));
    CHECK(plied_linear_resistance(10.0, 2) == doctest::Approx(5.0));
    CHECK(plied_linear_resistance(494.4, 16) == doctest::Approx(30.9).epsilon(1e-3));
    CHECK_THROWS_AS(plied_linear_resistance(10.0, 0), InvalidArgument);
}

TEST_CASE("segment distance: closed-form cases") {
    // Skew perpendicular segments one unit apart.
    auto d = segment_distance({-1, 0, 0}, {1, 0, 0}, {0, -1, 1}, {0, 1, 1});
    CHECK(d.distance == doctest::Approx(1.0));
    CHECK(d.s == doctest::Approx(0.5));
    CHECK(d.t == doctest::Approx(0.5));

    // Parallel overlapping segments.
    d = segment_distance({0, 0, 0}, {2, 0, 0}, {1, 0.5, 0}, {3, 0.5, 0});
    CHECK(d.distance == doctest::Approx(0.5));

    // Collinear, disjoint: endpoint to endpoint.
    d = segment_distance({0, 0, 0}, {1, 0, 0}, {3, 0, 0}, {4, 0, 0});
    CHECK(d.distance == doctest::Approx(2.0));
    CHECK(d.s == doctest::Approx(1.0));
    CHECK(d.t == doctest::Approx(0.0));

    // Degenerate segments are points.
    d = segment_distance({0, 0, 0}, {0, 0, 0}, {3, 4, 0}, {3, 4, 0});
    CHECK(d.distance == doctest::Approx(5.0));
}

TEST_CASE("segment distance agrees with dense sampling") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rv = [&] { return Vec3{u(rng), u(rng), u(rng)}; };
    for (int i = 0; i < 200; ++i) {
        const Vec3 p0 = rv(), p1 = rv(), q0 = rv(), q1 = rv();
        const SegmentDistance d = segment_distance(p0, p1, q0, q1);
        const Vec3 cp = p0 + d.s * (p1 - p0);
        const Vec3 cq = q0 + d.t * (q1 - q0);
        CHECK(distance(cp, cq) == doctest::Approx(d.distance).epsilon(1e-9));

        double sampled = 1e9;
        const int steps = 200;
        for (int a = 0; a <= steps; ++a)
            for (int b = 0; b <= steps; ++b) {
                const double s = static_cast<double>(a) / steps;
                const double t = static_cast<double>(b) / steps;
                sampled = std::min(sampled, distance(p0 + s * (p1 - p0), q0 + t * (q1 - q0)));
            }
        CHECK(d.distance <= sampled + 1e-12);
        CHECK(sampled - d.distance < 2e-2);
        CHECK(segment_distance(q0, q1, p0, p1).distance == doctest::Approx(d.distance));
    }
}

namespace {

/// Reference contact list by brute force over every segment pair.
ContactSet brute_force_contacts(const PileModel& model) {
    ContactSet out;
    for (int i = 0; i < static_cast<int>(model.strands.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(model.strands.size()); ++j) {
            const Strand& a = model.strands[i];
            const Strand& b = model.strands[j];
            for (int k = 0; k + 1 < static_cast<int>(a.points.size()); ++k)
                for (int l = 0; l + 1 < static_cast<int>(b.points.size()); ++l) {
                    const SegmentDistance d = segment_distance(a.points[k], a.points[k + 1],
                                                               b.points[l], b.points[l + 1]);
                    if (d.distance > a.radius_cm + b.radius_cm) continue;
                    out.contacts.push_back(
                        {i, k + (d.s > 0.5 ? 1 : 0), j, l + (d.t > 0.5 ? 1 : 0), d.distance});
                }
        }
    return out;
}

}  // namespace

TEST_CASE("grid-hashed contacts match brute force on a flat sample") {
    SensorSpec spec = preset(SampleId::S5);
    spec.base_width_cm = 1.5;
    spec.base_depth_cm = 1.5;
    const PileModel model = build_pile_model(spec, 3);
    const ContactSet hashed = detect_contacts(model);
    ContactSet brute = brute_force_contacts(model);
    REQUIRE(hashed.size() > 0);

    // Every hashed contact is a brute-force pair, with the minimum gap per vertex pair.
    for (const Contact& c : hashed.contacts) {
        double best = 1e9;
        for (const Contact& b : brute.contacts)
            if (b.strand_i == c.strand_i && b.strand_j == c.strand_j && b.point_i == c.point_i &&
                b.point_j == c.point_j)
                best = std::min(best, b.gap_cm);
        CHECK(c.gap_cm == doctest::Approx(best));
    }
    // And every brute-force vertex pair is present.
    for (const Contact& b : brute.contacts) {
        const bool found = std::any_of(hashed.contacts.begin(), hashed.contacts.end(), [&](const Contact& c) {
            return c.strand_i == b.strand_i && c.strand_j == b.strand_j && c.point_i == b.point_i &&
                   c.point_j == b.point_j;
        });
        CHECK(found);
    }
    CHECK(std::is_sorted(hashed.contacts.begin(), hashed.contacts.end(),
                         [](const Contact& a, const Contact& b) {
                             return std::tie(a.strand_i, a.strand_j, a.point_i, a.point_j) <
                                    std::tie(b.strand_i, b.strand_j, b.point_i, b.point_j);
                         }));
}

TEST_CASE("contact detection is scale consistent") {
    SensorSpec spec = preset(SampleId::S5);
    spec.base_width_cm = 2.0;
    spec.base_depth_cm = 2.0;
    const PileModel model = build_pile_model(spec, 17);
    PileModel scaled = model;
    for (Pile& p : scaled.piles) {
        p.anchor_x *= 2.0;
        p.anchor_y *= 2.0;
    }
    for (Strand& s : scaled.strands) {
        s.radius_cm *= 2.0;
        for (Vec3& p : s.points) p = 2.0 * p;
    }
    const ContactSet a = detect_contacts(model);
    const ContactSet b = detect_contacts(scaled);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() > 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.contacts[i].strand_i == b.contacts[i].strand_i);
        CHECK(a.contacts[i].strand_j == b.contacts[i].strand_j);
        CHECK(a.contacts[i].point_i == b.contacts[i].point_i);
        CHECK(a.contacts[i].point_j == b.contacts[i].point_j);
        CHECK(b.contacts[i].gap_cm == doctest::Approx(2.0 * a.contacts[i].gap_cm));
    }
}

TEST_CASE("contact set is symmetric under strand order reversal") {
    SensorSpec spec = preset(SampleId::S5);
    spec.base_width_cm = 1.5;
    spec.base_depth_cm = 1.5;
    const PileModel model = build_pile_model(spec, 8);
    PileModel reversed = model;
    std::reverse(reversed.strands.begin(), reversed.strands.end());
    const int n = static_cast<int>(model.strands.size());
    const ContactSet a = detect_contacts(model);
    const ContactSet b = detect_contacts(reversed);
    REQUIRE(a.size() == b.size());
    for (const Contact& c : b.contacts) {
        const int i = n - 1 - c.strand_j;
        const int j = n - 1 - c.strand_i;
        const bool found = std::any_of(a.contacts.begin(), a.contacts.end(), [&](const Contact& x) {
            return x.strand_i == i && x.strand_j == j && x.point_i == c.point_j &&
                   x.point_j == c.point_i;
        });
        CHECK(found);
    }
}

TEST_CASE("loop samples conduct at rest; contact-free cut samples are open") {
    const SensorSpec loop = preset(SampleId::S2);
    const PileModel lm = build_pile_model(loop, 1);
    const double r = equivalent_resistance(assemble_network(lm, detect_contacts(lm), loop));
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);

    SensorSpec cut = preset(SampleId::S7);
    cut.stitch_density_per_cm = 0.8;
    const PileModel cm = build_pile_model(cut, 1);
    const ContactSet contacts = detect_contacts(cm);
    // Halves of one pile share a needle hole, so only count contacts between piles.
    bool cross_pile = false;
    for (const Contact& c : contacts.contacts)
        cross_pile |= cm.strands[c.strand_i].pile_index != cm.strands[c.strand_j].pile_index;
    REQUIRE_FALSE(cross_pile);
    CHECK_THROWS_AS(equivalent_resistance(assemble_network(cm, contacts, cut)), OpenCircuit);
}

TEST_CASE("network layout: strand points, then terminal A, then terminal B") {
    const SensorSpec spec = preset(SampleId::S2);
    const PileModel model = build_pile_model(spec, 2);
    const ResistorNetwork net = assemble_network(model, detect_contacts(model), spec);
    const int points = static_cast<int>(model.point_count());
    CHECK(net.node_count == points + 2);
    CHECK(net.terminal_a == points);
    CHECK(net.terminal_b == points + 1);
    for (const ResistorEdge& e : net.edges) {
        CHECK(e.a != e.b);
        CHECK(e.conductance_s > 0.0);
    }
}

TEST_CASE("compression adds contacts for nearly every seed") {
    const SensorSpec spec = preset(SampleId::S2);
    int more = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PileModel rest = build_pile_model(spec, seed);
        const PileModel pressed = deform(rest, spec, Compression{1000.0, 5.0});
        more += detect_contacts(pressed).size() > detect_contacts(rest).size();
    }
    CHECK(more >= 48);
}

TEST_CASE("a lone loop strand conducts through its own yarn") {
    SensorSpec spec = preset(SampleId::S5);  // 10.5 ohm/cm
    PileModel model;
    Strand s;
    // Four straight 0.5 cm segments: 2 cm of yarn.
    for (int k = 0; k <= 4; ++k) s.points.push_back({0.5 * k, 1.0, k == 0 || k == 4 ? 0.0 : 0.3});
    for (int k = 0; k < 4; ++k) s.segment_yarn_cm.push_back(0.5);
    s.radius_cm = spec.yarn.radius_cm();
    model.strands.push_back(s);
    model.piles.push_back(Pile{});
    ResistorNetwork net = assemble_network(model, ContactSet{}, spec);
    net.terminal_a = 0;
    net.terminal_b = 4;
    CHECK(equivalent_resistance(net) == doctest::Approx(21.0).epsilon(1e-12));
}

TEST_CASE("a contact-free loop row still joins the terminals") {
    SensorSpec spec = preset(SampleId::S2);
    spec.base_width_cm = 1.0 / 3.0;
    spec.base_depth_cm = 1.0;
    spec.stitch_density_per_cm = 3.0;
    spec.position_jitter_cm = 0.0;
    const PileModel model = build_pile_model(spec, 1);
    REQUIRE(model.piles.size() == 3);
    const ResistorNetwork net = assemble_network(model, ContactSet{}, spec);

    // Graph-search oracle for path existence.
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(net.node_count));
    for (const ResistorEdge& e : net.edges) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    std::vector<bool> seen(adj.size(), false);
    std::vector<int> stack{net.terminal_a};
    seen[net.terminal_a] = true;
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        for (int m : adj[n])
            if (!seen[m]) {
                seen[m] = true;
                stack.push_back(m);
            }
    }
    REQUIRE(seen[net.terminal_b]);
    CHECK(std::isfinite(equivalent_resistance(net)));

    spec.pile_shape = PileShape::Cut;
    const PileModel cut = build_pile_model(spec, 1);
    CHECK_THROWS_AS(equivalent_resistance(assemble_network(cut, ContactSet{}, spec)), OpenCircuit);
}
