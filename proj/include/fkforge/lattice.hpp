#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fkforge/common.hpp"

// Lattices, domains and markings.
//
// Coordinates are doubled: a primal/dual face (i,j) sits at (2i,2j), a medial
// vertex at odd-odd points, a medial edge midpoint at odd-even / even-odd
// points. Faces with i+j even are black (primal vertices), the others white.
namespace fkforge::lattice {

struct P2 {
    int x = 0, y = 0;
    auto operator<=>(const P2&) const = default;
    P2 operator+(P2 o) const { return {x + o.x, y + o.y}; }
    P2 operator-(P2 o) const { return {x - o.x, y - o.y}; }
};

inline std::int64_t key(P2 p) { return (std::int64_t(p.x) << 32) ^ std::uint32_t(p.y); }

enum Dir : int { N = 0, E = 1, S = 2, W = 3 };
inline constexpr P2 kDirVec[4] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}};
// quadrant q lies between directions q and q+1: NE, SE, SW, NW
inline constexpr P2 kQuadVec[4] = {{1, 1}, {1, -1}, {-1, -1}, {-1, 1}};

using SquareId = int;
using CornerId = int;  // 4 * square + dir
using EdgeId = int;    // 2 * tail corner + k
using FaceKey = std::int64_t;

enum class SquareKind { Interior, Boundary, Bridge, Ghost };
enum class EdgeKind { Medial, SideBlack, SideWhite };

inline bool is_black_face(P2 f) { return ((f.x / 2 + f.y / 2) % 2 + 2) % 2 == 0; }
// Type A medial vertices have black faces at SW/NE and incoming N,S corners.
inline bool is_type_a(P2 c) { return (((c.x + c.y) / 2) % 2 + 2) % 2 == 1; }

struct MeshGeometry {
    double mesh = 1.0;
    double origin[2] = {0.0, 0.0};
};

struct Violation {
    std::string invariant;
    std::string witness;
};

struct Square {
    P2 center;
    SquareKind kind;
    bool type_a;
    int bond = -1;  // index into BondConfig for interior squares
};

class WiredDomain {
public:
    WiredDomain(std::vector<P2> black_faces, MeshGeometry geom = {});

    const std::vector<P2>& black_faces() const { return black_; }
    const MeshGeometry& geometry() const { return geom_; }
    std::uint64_t hash() const { return hash_; }

    int num_squares() const { return int(squares_.size()); }
    const Square& square(SquareId s) const { return squares_[s]; }
    SquareId square_at(P2 center) const;  // -1 if absent
    int num_corners() const { return 4 * num_squares(); }

    // primal edges carrying a random bond, in BondConfig order
    const std::vector<SquareId>& bond_squares() const { return bond_squares_; }
    int num_bonds() const { return int(bond_squares_.size()); }

    bool in_black(P2 f) const;
    bool in_white(P2 f) const;
    bool face_inside(P2 f) const { return is_black_face(f) ? in_black(f) : in_white(f); }
    const std::vector<P2>& inside_white_faces() const { return white_in_; }

    // corner topology
    static SquareId corner_square(CornerId c) { return c >> 2; }
    static Dir corner_dir(CornerId c) { return Dir(c & 3); }
    bool incoming(CornerId c) const;
    bool corner_interior(CornerId c) const { return interior_[c]; }
    CornerId medial_neighbor(CornerId c) const { return medial_[c]; }
    // outgoing corner reached from incoming corner c inside its square
    CornerId next_in_square(CornerId c, bool closed) const;

    // edges
    static CornerId edge_tail(EdgeId e) { return e >> 1; }
    CornerId edge_head(EdgeId e) const;
    EdgeKind edge_kind(EdgeId e) const;
    EdgeId medial_edge(CornerId outgoing) const { return 2 * outgoing; }
    EdgeId side_edge(CornerId from, CornerId to) const;  // -1 if not a side
    bool edge_exists(EdgeId e) const;
    // direction of travel in eighth turns (0 = east, counter-clockwise)
    int edge_angle8(EdgeId e) const;
    P2 edge_midpoint2(EdgeId e) const;  // medial edges only, doubled coordinates

    // boundary and markings
    const std::vector<EdgeId>& boundary() const { return boundary_; }
    bool corner_on_boundary(CornerId c) const { return on_boundary_[c]; }
    // medial edges with both adjacent faces inside (targets of the tree)
    const std::vector<EdgeId>& interior_medial_edges() const { return targets_; }
    bool is_interior_medial(EdgeId e) const;

    // geometry
    std::array<double, 2> corner_xy(CornerId c) const;
    cplx corner_pos(CornerId c) const {
        auto p = corner_xy(c);
        return {p[0], p[1]};
    }
    cplx point_pos(double x2, double y2) const;  // doubled coords -> plane

    // the eight corners around a face (absent ones as -1)
    std::array<CornerId, 8> face_corners(P2 face) const;

    const std::vector<Violation>& structural_violations() const { return violations_; }

    std::string to_text() const;
    std::string to_json() const;

private:
    void build();
    void trace_boundary();

    std::vector<P2> black_;
    MeshGeometry geom_;
    std::uint64_t hash_ = 0;
    std::unordered_map<std::int64_t, int> black_index_;
    std::unordered_map<std::int64_t, int> white_index_;
    std::vector<P2> white_in_;
    std::vector<Square> squares_;
    std::unordered_map<std::int64_t, SquareId> square_index_;
    std::vector<SquareId> bond_squares_;
    std::vector<CornerId> medial_;
    std::vector<char> interior_;
    std::vector<char> on_boundary_;
    std::vector<EdgeId> boundary_;
    std::vector<EdgeId> targets_;
    std::vector<Violation> violations_;
};

using DomainPtr = std::shared_ptr<const WiredDomain>;

DomainPtr build_rect_domain(int n_cols, int n_rows, double mesh);
// text grid: header `mesh=<float>`, then rows of 'B' and '.'; the top row is printed first
DomainPtr parse_domain_text(const std::string& text);
DomainPtr load_domain(const std::string& path);
// grid cell (col, row from bottom) -> doubled face coordinates
inline P2 grid_to_face(int col, int row) { return {2 * (col - row), 2 * (col + row)}; }

std::vector<Violation> validate_admissible(const WiredDomain& d);

struct DobrushinDomain {
    DomainPtr base;
    SquareId root = -1;
    EdgeId e_i = -1;  // root in-edge, a at its head
    EdgeId e_o = -1;  // root out-edge, b at its tail
    EdgeId cut = -1;  // inner root side removed when the root loop is cut open
    EdgeId boundary_side = -1;
    EdgeId f = -1;    // f_o is its first half, f_i its second; w at the midpoint
    cplx w;
    CornerId a() const { return WiredDomain::edge_tail(e_i); }
    CornerId b() const { return base->edge_head(e_o); }
};

DobrushinDomain mark_dobrushin(DomainPtr d, SquareId root_square, EdgeId f);
DobrushinDomain mark_dobrushin(DomainPtr d, SquareId root_square);  // f left unset
// root square and f chosen canonically: the boundary square lowest in the plane
// and the east-pointing interior edge nearest the centroid
SquareId default_root(const WiredDomain& d);
EdgeId default_f(const WiredDomain& d);
EdgeId nearest_east_edge(const WiredDomain& d, cplx z);

}  // namespace fkforge::lattice
