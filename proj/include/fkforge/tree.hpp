#pragma once

#include <functional>
#include <map>
#include <vector>

#include "fkforge/loewner.hpp"
#include "fkforge/rcmodel.hpp"

// Exploration tree of a loop ensemble and its inverse.
namespace fkforge::tree {

using lattice::CornerId;
using lattice::DomainPtr;
using lattice::EdgeId;
using lattice::SquareId;
using lattice::Violation;
using lattice::WiredDomain;
using rcmodel::LoopEnsemble;

struct Branch {
    EdgeId target = -1;
    std::vector<EdgeId> path;     // starts with e_i, ends with target
    std::vector<int> loops;       // loop indices visited, root loop first
    std::vector<SquareId> squares;  // squares where loops were switched, root square first
    std::vector<int> switch_steps;  // path index of each switch (0 for the root entry)
};

struct ExplorationTree {
    DomainPtr domain;
    SquareId root = -1;
    EdgeId e_i = -1, e_o = -1, cut = -1;
    std::map<EdgeId, Branch> branches;
    std::uint64_t ensemble_hash = 0;
    int ambiguities = 0;  // switches whose side choice was not forced by the component test
};

// Parent-pointer form of the tree, used on large domains.
struct TreeSkeleton {
    DomainPtr domain;
    SquareId root = -1;
    EdgeId e_i = -1;
    std::vector<EdgeId> parent;  // per corner, -1 if not in the tree
    std::vector<EdgeId> targets;

    std::vector<EdgeId> branch(EdgeId target) const;
    std::vector<CornerId> branch_corners(EdgeId target) const;
};

// Loop successor and loop index for every corner of an ensemble.
struct LoopIndex {
    std::vector<CornerId> succ;
    std::vector<int> loop_of;
    explicit LoopIndex(const LoopEnsemble& e);
};

Branch build_branch(const LoopEnsemble& e, SquareId root, EdgeId target);
ExplorationTree build_tree(const LoopEnsemble& e, SquareId root);
TreeSkeleton build_skeleton(const LoopEnsemble& e, SquareId root, const std::vector<EdgeId>& targets = {});

LoopEnsemble recover_loops(const ExplorationTree& t);
std::vector<Violation> check_spanning(const ExplorationTree& t);
std::vector<Violation> check_target_independence(const ExplorationTree& t);
// branching square -> index of its loop in recover_loops(t)
std::map<SquareId, int> branching_squares(const ExplorationTree& t);
// tree segments seen at a branching square, not counting the arrival edge
int arm_count(const ExplorationTree& t, SquareId q);

void write_tree(const ExplorationTree& t, const std::string& path);

// The branch to `target` as a plane polyline: its starting corner, the midpoints
// of its medial edges and finally the midpoint of the target.
std::vector<cplx> branch_curve(const TreeSkeleton& t, EdgeId target);

struct SubtreeOptions {
    int raster = 512;        // pixels across the disk for the component search
    int max_refinements = 4096;
};

struct Subtree {
    std::vector<EdgeId> targets;  // grid targets first, then refinements in order
    int grid_points = 0;
    int refinements = 0;
    int unrefinable = 0;   // components wider than eta without a usable target
    double max_component = 0;  // widest complementary component at the end
};

// Finite subtree I_eta: one target per point of (eta Z^2) in the disk (the target
// whose image is nearest, within eta / 2), then while a complementary component
// of the subtree image is wider than eta, a target in its far quarter. Widths are
// measured over the corner images inside a component.
// Throws NoLatticePoint when a grid ball holds no target image.
Subtree finite_subtree(const TreeSkeleton& t, double eta, const loewner::Uniformizer& phi,
                       const SubtreeOptions& opt = {});
// the branches of t kept by s
ExplorationTree restrict_tree(const ExplorationTree& t, const Subtree& s);

}  // namespace fkforge::tree
