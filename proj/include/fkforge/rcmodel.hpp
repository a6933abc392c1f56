#pragma once

#include <functional>
#include <map>
#include <vector>

#include "fkforge/lattice.hpp"

// Critical FK-Ising (q = 2) in its loop representation: every configuration
// is weighted by sqrt(2)^(number of loops).
namespace fkforge::rcmodel {

using lattice::CornerId;
using lattice::DomainPtr;
using lattice::EdgeId;
using lattice::Violation;
using lattice::WiredDomain;

// open flags indexed by WiredDomain::bond_squares()
using BondConfig = std::vector<std::uint8_t>;

struct LoopEnsemble {
    DomainPtr domain;
    std::vector<std::vector<EdgeId>> loops;

    // smallest edge first in every loop, loops sorted
    void canonicalize();
    bool operator==(const LoopEnsemble& o) const { return loops == o.loops; }
    std::uint64_t hash() const;
};

// Mutable loop structure: the pairing at every square plus local tracing.
class LoopState {
public:
    LoopState(const WiredDomain& d, const BondConfig& c);

    CornerId next(CornerId c) const {
        if (!d_->incoming(c)) return d_->medial_neighbor(c);
        return d_->next_in_square(c, closed_[WiredDomain::corner_square(c)]);
    }
    // loop count change if bond b were flipped (always +1 or -1)
    int flip_delta(int b) const;
    void flip(int b);
    bool open(int b) const { return !closed_[d_->bond_squares()[b]]; }
    int count_loops() const;
    const WiredDomain& domain() const { return *d_; }

private:
    const WiredDomain* d_;
    std::vector<std::uint8_t> closed_;  // per square
};

LoopEnsemble loop_representation(DomainPtr d, const BondConfig& c);
int count_loops(const LoopEnsemble& e);
// bond configuration read back from the turns of the loops at each square
BondConfig config_from_loops(const LoopEnsemble& e);

inline constexpr int kEnumerationGuard = 24;

// visits all 2^n configurations in Gray-code order with their loop counts
void for_each_config(const WiredDomain& d, const std::function<void(const BondConfig&, int)>& fn);
std::vector<std::pair<BondConfig, double>> enumerate_measure(const WiredDomain& d);
// exact law of the loop count
std::map<int, double> loop_count_distribution(const WiredDomain& d);

struct ChainStats {
    long proposals = 0;
    long up = 0, up_accepted = 0;      // proposals with dN = +1
    long down = 0, down_accepted = 0;  // proposals with dN = -1
    std::vector<double> acceptance_values;  // distinct min(1, sqrt2^dN) used
};

class MetropolisChain {
public:
    MetropolisChain(const WiredDomain& d, std::uint64_t seed, std::uint64_t stream = 0);
    void sweep();  // one proposal per bond on average
    BondConfig config() const;
    int loops() const { return loops_; }
    const ChainStats& stats() const { return stats_; }

private:
    const WiredDomain* d_;
    LoopState state_;
    Philox rng_;
    int loops_;
    ChainStats stats_;
};

BondConfig sample_mc(const WiredDomain& d, long sweeps, std::uint64_t seed);

// Swendsen-Wang dynamics through the Edwards-Sokal coupling. The cluster of the
// wired boundary keeps spin +1; every other cluster gets a fair coin.
class SwendsenWangChain {
public:
    SwendsenWangChain(const WiredDomain& d, std::uint64_t seed, std::uint64_t stream = 0);
    void sweep();
    const BondConfig& config() const { return bonds_; }

private:
    const WiredDomain* d_;
    Philox rng_;
    std::vector<std::array<int, 2>> ends_;  // black face indices of each bond
    std::vector<char> wired_;               // black faces on the wired boundary
    std::vector<std::int8_t> spin_;
    BondConfig bonds_;
};

BondConfig sample_sw(const WiredDomain& d, long sweeps, std::uint64_t seed, std::uint64_t stream = 0);

std::vector<Violation> validate_dcnil(const LoopEnsemble& e);

void write_loops(const LoopEnsemble& e, std::uint64_t seed, const std::string& path);
LoopEnsemble read_loops(DomainPtr d, const std::string& path);
void write_config(const WiredDomain& d, const BondConfig& c, const std::string& path);
BondConfig read_config(const WiredDomain& d, const std::string& path);

}  // namespace fkforge::rcmodel
