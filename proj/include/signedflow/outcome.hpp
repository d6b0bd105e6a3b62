#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace signedflow {

enum class OutcomeKind {
    Stabilizing,        // all opinions -> 0 for every initial condition
    Consensus,          // common nonzero limit, all signs equal
    Polarization,       // common limit modulus, both signs present
    ModulusConsensus,   // |x_i| agree in the limit, type unresolved
    NoModulusConsensus, // limit moduli differ or oscillate in a fixed band
    Inconclusive,
};

inline const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Stabilizing: return "stabilizing";
        case OutcomeKind::Consensus: return "consensus";
        case OutcomeKind::Polarization: return "polarization";
        case OutcomeKind::ModulusConsensus: return "modulus-consensus";
        case OutcomeKind::NoModulusConsensus: return "no-modulus-consensus";
        case OutcomeKind::Inconclusive: return "inconclusive";
    }
    return "?";
}

/// Stabilizing, Consensus and Polarization are the resolved flavors of
/// modulus consensus.
inline bool is_modulus_consensus(OutcomeKind k) {
    return k == OutcomeKind::Stabilizing || k == OutcomeKind::Consensus ||
           k == OutcomeKind::Polarization || k == OutcomeKind::ModulusConsensus;
}

struct Outcome {
    OutcomeKind kind = OutcomeKind::Inconclusive;
    std::optional<double> x_star;            // limit modulus, when applicable
    std::optional<std::vector<int>> rho;     // +-1 sign vector, when applicable

    struct Diagnostics {
        double tail_drift = 0.0;    // max_i |lsq slope of |x_i|| over the tail
        double tail_spread = 0.0;   // max over the tail of max_i|x_i| - min_i|x_i|
        double band_delta = 0.0;    // spread-band movement between tail halves
    };
    Diagnostics diagnostics;
    std::string note;

    /// Camps induced by rho: (+1 nodes, -1 nodes).
    std::pair<std::vector<int>, std::vector<int>> camps() const {
        std::pair<std::vector<int>, std::vector<int>> c;
        if (rho)
            for (size_t i = 0; i < rho->size(); ++i)
                ((*rho)[i] > 0 ? c.first : c.second).push_back(static_cast<int>(i));
        return c;
    }
};

}  // namespace signedflow
