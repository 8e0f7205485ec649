#pragma once

#include "pilesim/geometry.hpp"

#include <vector>

namespace pilesim {

/// Closest approach between one vertex of strand_i and one of strand_j.
/// Contacts are anchored at the segment vertex nearest the closest point.
struct Contact {
    int strand_i = 0;
    int point_i = 0;
    int strand_j = 0;
    int point_j = 0;
    double gap_cm = 0.0;

    friend bool operator==(const Contact&, const Contact&) = default;
};

/// Sorted by (strand_i, strand_j, point_i, point_j), strand_i < strand_j.
struct ContactSet {
    std::vector<Contact> contacts;

    std::size_t size() const { return contacts.size(); }
    friend bool operator==(const ContactSet&, const ContactSet&) = default;
};

struct SegmentDistance {
    double distance = 0.0;
    double s = 0.0;  // parameter on the first segment, [0, 1]
    double t = 0.0;  // parameter on the second segment, [0, 1]
};

/// Exact minimum distance between segments [p0, p1] and [q0, q1].
SegmentDistance segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

/// Two segments of distinct strands touch when their distance is at most
/// the sum of the two yarn radii.
ContactSet detect_contacts(const PileModel& model);

struct ResistorEdge {
    int a = 0;
    int b = 0;
    double conductance_s = 0.0;
};

struct ResistorNetwork {
    int node_count = 0;
    std::vector<ResistorEdge> edges;
    int terminal_a = 0;
    int terminal_b = 0;

    /// Appends an edge. Rejects self-loops and non-positive conductance.
    void add_resistor(int a, int b, double ohms);
    void add_conductance(int a, int b, double siemens);
};

/// Node layout: strand points in strand order, then terminal A, then terminal B.
ResistorNetwork assemble_network(const PileModel& model, const ContactSet& contacts,
                                 const SensorSpec& spec);

/// Two-terminal effective resistance (ohm). Throws OpenCircuit when the
/// terminals are not connected and NumericalFailure if the solve is inaccurate.
double equivalent_resistance(const ResistorNetwork& net);

/// Parallel-conductor estimate for a yarn plied from identical strands.
/// This ignores twist and inter-strand contact and is only an estimate.
double plied_linear_resistance(double base_ohm_per_cm, int plies);

}  // namespace pilesim
