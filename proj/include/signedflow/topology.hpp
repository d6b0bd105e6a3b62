#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "signedflow/errors.hpp"
#include "signedflow/outcome.hpp"
#include "signedflow/signed_matrix.hpp"

namespace signedflow {

inline constexpr double kHurwitzTol = 1e-9;
inline constexpr int kMaxSccForEnumeration = 20;

/// Influence successors: node k points at every j listening to it (a_jk != 0).
inline std::vector<std::vector<int>> influence_successors(const SignedMatrix& a) {
    std::vector<std::vector<int>> succ(a.n());
    for (int k = 0; k < a.n(); ++k)
        for (int j = 0; j < a.n(); ++j)
            if (a(j, k) != 0.0) succ[k].push_back(j);
    return succ;
}

struct SccDecomposition {
    std::vector<std::vector<int>> components;     // topological order of the condensation
    std::vector<int> component_of;                // node -> component index
    std::vector<std::pair<int, int>> edges;       // condensation arcs (from, to), deduplicated
    bool strongly_connected() const { return components.size() == 1; }
};

/// Tarjan over the influence digraph; components come out in topological order
/// (a component precedes everything it influences).
inline SccDecomposition strongly_connected_components(const SignedMatrix& a) {
    const int n = a.n();
    const auto succ = influence_successors(a);
    std::vector<int> index(n, -1), low(n, 0), stack_pos(n, -1);
    std::vector<int> stack;
    std::vector<std::vector<int>> comps;
    std::vector<int> comp_of(n, -1);
    int counter = 0;

    // explicit DFS stack: (node, next successor position)
    std::vector<std::pair<int, size_t>> call;
    for (int s = 0; s < n; ++s) {
        if (index[s] != -1) continue;
        call.push_back({s, 0});
        index[s] = low[s] = counter++;
        stack_pos[s] = static_cast<int>(stack.size());
        stack.push_back(s);
        while (!call.empty()) {
            auto& [v, pos] = call.back();
            if (pos < succ[v].size()) {
                const int w = succ[v][pos++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack_pos[w] = static_cast<int>(stack.size());
                    stack.push_back(w);
                    call.push_back({w, 0});
                } else if (stack_pos[w] != -1) {
                    low[v] = std::min(low[v], index[w]);
                }
            } else {
                if (low[v] == index[v]) {
                    std::vector<int> comp(stack.begin() + stack_pos[v], stack.end());
                    stack.erase(stack.begin() + stack_pos[v], stack.end());
                    std::sort(comp.begin(), comp.end());
                    for (int u : comp) {
                        stack_pos[u] = -1;
                        comp_of[u] = static_cast<int>(comps.size());
                    }
                    comps.push_back(std::move(comp));
                }
                call.pop_back();
                if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[v]);
            }
        }
    }

    // Tarjan emits components in reverse topological order; re-sort them with
    // a deterministic Kahn pass (smallest contained node breaks ties) so that
    // mutually unordered components come out in node order.
    const int c = static_cast<int>(comps.size());
    std::vector<std::vector<char>> adj(c, std::vector<char>(c, 0));
    std::vector<int> in_deg(c, 0);
    for (int k = 0; k < n; ++k)
        for (int j : succ[k]) {
            const int from = comp_of[k], to = comp_of[j];
            if (from != to && !adj[from][to]) {
                adj[from][to] = 1;
                ++in_deg[to];
            }
        }
    std::vector<int> order;  // in original component ids
    {
        auto smallest_node = [&](int id) { return *std::min_element(comps[id].begin(), comps[id].end()); };
        std::vector<char> done(c, 0);
        while (static_cast<int>(order.size()) < c) {
            int best = -1;
            for (int id = 0; id < c; ++id)
                if (!done[id] && in_deg[id] == 0 &&
                    (best == -1 || smallest_node(id) < smallest_node(best)))
                    best = id;
            done[best] = 1;
            order.push_back(best);
            for (int to = 0; to < c; ++to)
                if (adj[best][to]) --in_deg[to];
        }
    }

    SccDecomposition out;
    out.components.resize(c);
    std::vector<int> new_id(c);
    for (int pos = 0; pos < c; ++pos) {
        new_id[order[pos]] = pos;
        out.components[pos] = comps[order[pos]];
    }
    out.component_of.resize(n);
    for (int v = 0; v < n; ++v) out.component_of[v] = new_id[comp_of[v]];
    for (int from = 0; from < c; ++from)
        for (int to = 0; to < c; ++to)
            if (adj[from][to]) out.edges.push_back({new_id[from], new_id[to]});
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

struct QscResult {
    bool qsc = false;
    std::vector<int> roots;  // nodes reaching every other node
};

/// QSC iff the condensation has exactly one source component; its nodes are
/// exactly the roots.
inline QscResult is_quasi_strongly_connected(const SignedMatrix& a) {
    const SccDecomposition scc = strongly_connected_components(a);
    std::vector<int> in_deg(scc.components.size(), 0);
    for (const auto& [from, to] : scc.edges) in_deg[to]++;
    std::vector<int> sources;
    for (size_t c = 0; c < scc.components.size(); ++c)
        if (in_deg[c] == 0) sources.push_back(static_cast<int>(c));
    QscResult out;
    out.qsc = sources.size() == 1;
    if (out.qsc) out.roots = scc.components[sources[0]];
    return out;
}

struct CampPartition {
    std::vector<int> camp1, camp2;  // sorted node ids; camp1 never empty
};

inline std::vector<int> rho_from_camps(const CampPartition& camps, int n) {
    std::vector<int> rho(n, 1);
    for (int i : camps.camp2) rho[i] = -1;
    return rho;
}

struct BalanceResult {
    bool balanced = false;
    CampPartition camps;               // when balanced
    std::vector<int> violating_cycle;  // closed walk (first == last) when not
};

/// Two-coloring of the undirected support restricted to `nodes`: positive arcs
/// force equal colors, negative arcs opposite ones. Components are colored
/// independently, lowest-indexed node into camp 1.
inline BalanceResult hostile_camps(const SignedMatrix& a, std::vector<int> nodes) {
    const int n = a.n();
    std::sort(nodes.begin(), nodes.end());  // lowest-indexed component node seeds camp 1
    std::vector<int> color(n, 0), parent(n, -1);

    auto edge_sign = [&](int u, int v) -> int {
        // aggregated digon sign; 0 = no edge, +-2 = conflicting digon
        const double x = a(u, v), y = a(v, u);
        if (x == 0.0 && y == 0.0) return 0;
        if (x * y < 0.0) return 2;  // conflicting pair; any coloring fails
        return (x + y) > 0.0 ? 1 : -1;
    };

    auto build_cycle = [&](int u, int v) {
        std::vector<int> cyc;
        std::vector<char> mark(n, 0);
        for (int x = u; x != -1; x = parent[x]) mark[x] = 1;
        int lca = v;
        while (!mark[lca]) lca = parent[lca];
        for (int x = u; x != lca; x = parent[x]) cyc.push_back(x);
        cyc.push_back(lca);
        std::vector<int> down;
        for (int x = v; x != lca; x = parent[x]) down.push_back(x);
        cyc.insert(cyc.end(), down.rbegin(), down.rend());
        cyc.push_back(u);  // close the walk
        return cyc;
    };

    BalanceResult out;
    for (int s : nodes) {
        if (color[s] != 0) continue;
        color[s] = 1;
        std::vector<int> queue{s};
        for (size_t qi = 0; qi < queue.size(); ++qi) {
            const int u = queue[qi];
            for (int v : nodes) {
                if (v == u) continue;
                const int es = edge_sign(u, v);
                if (es == 0) continue;
                if (es == 2) {  // opposite-signed digon: 2-cycle violation
                    out.violating_cycle = {u, v, u};
                    return out;
                }
                const int want = color[u] * es;
                if (color[v] == 0) {
                    color[v] = want;
                    parent[v] = u;
                    queue.push_back(v);
                } else if (color[v] != want) {
                    out.violating_cycle = build_cycle(u, v);
                    return out;
                }
            }
        }
    }
    out.balanced = true;
    for (int v : nodes) (color[v] > 0 ? out.camps.camp1 : out.camps.camp2).push_back(v);
    return out;
}

inline BalanceResult hostile_camps(const SignedMatrix& a) {
    std::vector<int> all(a.n());
    for (int i = 0; i < a.n(); ++i) all[i] = i;
    return hostile_camps(a, all);
}

/// True iff every directed cycle has a positive weight product. Independent
/// route to structural balance on its precondition domain: signs are
/// propagated over a DFS tree of the support and every arc is then verified
/// against the propagated node signs.
inline bool cycle_sign_check(const SignedMatrix& a) {
    if (!is_digon_sign_symmetric(a))
        throw std::invalid_argument("cycle_sign_check: matrix must be digon sign-symmetric");
    if (!strongly_connected_components(a).strongly_connected())
        throw std::invalid_argument("cycle_sign_check: graph must be strongly connected");
    const int n = a.n();
    std::vector<int> sign(n, 0);
    std::vector<int> stack{0};
    sign[0] = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < n; ++v) {
            const double w = a(u, v) != 0.0 ? a(u, v) : a(v, u);
            if (v == u || w == 0.0 || sign[v] != 0) continue;
            sign[v] = w > 0.0 ? sign[u] : -sign[u];
            stack.push_back(v);
        }
    }
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (a(j, k) != 0.0 && sign_of(a(j, k)) != sign[j] * sign[k]) return false;
    return true;
}

/// All non-empty node sets closed under in-neighbors (j in V' and a_jk != 0
/// imply k in V'), i.e. sub-communities listening to nobody outside.
/// Enumerated as ancestor-closed unions of SCCs over the condensation,
/// ordered by size then lexicographically.
inline std::vector<std::vector<int>> in_isolated_sets(const SignedMatrix& a) {
    const SccDecomposition scc = strongly_connected_components(a);
    const int c = static_cast<int>(scc.components.size());
    if (c > kMaxSccForEnumeration)
        throw CapExceeded("in_isolated_sets: " + std::to_string(c) + " SCCs exceed the cap of " +
                          std::to_string(kMaxSccForEnumeration));
    std::vector<uint32_t> in_mask(c, 0);  // components influencing component d
    for (const auto& [from, to] : scc.edges) in_mask[to] |= 1u << from;

    std::vector<std::vector<int>> out;
    for (uint32_t mask = 1; mask < (1u << c); ++mask) {
        bool closed = true;
        for (int d = 0; d < c && closed; ++d)
            if ((mask >> d) & 1u) closed = (in_mask[d] & ~mask) == 0;
        if (!closed) continue;
        std::vector<int> nodes;
        for (int d = 0; d < c; ++d)
            if ((mask >> d) & 1u)
                nodes.insert(nodes.end(), scc.components[d].begin(), scc.components[d].end());
        std::sort(nodes.begin(), nodes.end());
        out.push_back(std::move(nodes));
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.size() != y.size() ? x.size() < y.size() : x < y;
    });
    return out;
}

struct IsbResult {
    bool found = false;
    std::vector<int> witness;
};

/// Search for an in-isolated structurally balanced subgraph, trying larger
/// candidate sets first (a balanced graph witnesses itself with the full set).
inline IsbResult has_isb_subgraph(const SignedMatrix& a) {
    std::vector<std::vector<int>> sets = in_isolated_sets(a);
    std::sort(sets.begin(), sets.end(), [](const auto& x, const auto& y) {
        return x.size() != y.size() ? x.size() > y.size() : x < y;
    });
    for (const auto& s : sets)
        if (hostile_camps(a, s).balanced) return {true, s};
    return {};
}

struct HurwitzResult {
    bool hurwitz = false;
    std::vector<std::complex<double>> spectrum;  // eigenvalues of -L[A]
};

inline HurwitzResult is_hurwitz(const SignedMatrix& a, double tol = kHurwitzTol) {
    if (!(tol > 0.0)) throw std::invalid_argument("is_hurwitz: tol must be > 0");
    const int n = a.n();
    const Laplacian l = laplacian(a);
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m(j, k) = -l(j, k);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw NumericalFailure("is_hurwitz: eigenvalue iteration did not converge");
    HurwitzResult out;
    out.spectrum.reserve(n);
    for (int i = 0; i < n; ++i) out.spectrum.push_back(solver.eigenvalues()[i]);
    std::sort(out.spectrum.begin(), out.spectrum.end(), [](const auto& x, const auto& y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    double max_re = out.spectrum.empty() ? 0.0 : out.spectrum.back().real();
    out.hurwitz = max_re < -tol;
    return out;
}

/// Left null vector v of L[A] normalized so that v^T rho = 1; the limit
/// projector of the bipartite case is then rho v^T.
inline std::vector<double> left_null_vector(const Laplacian& l, const std::vector<int>& rho) {
    const int n = l.n();
    Eigen::MatrixXd lt(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) lt(k, j) = l(j, k);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lt, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smin = sv[n - 1], smax = sv[0];
    if (smin > 1e-9 * std::max(1.0, smax))
        throw NumericalFailure("left_null_vector: Laplacian has no numerical kernel");
    Eigen::VectorXd v = svd.matrixV().col(n - 1);
    double s = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i) {
        s += v[i] * rho[i];
        scale += std::abs(v[i]);
    }
    if (std::abs(s) < 1e-9 * scale)
        throw NumericalFailure("left_null_vector: v^T rho vanishes");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = v[i] / s;
    return out;
}

struct StaticPrediction {
    OutcomeKind kind = OutcomeKind::Inconclusive;
    std::optional<CampPartition> camps;            // structurally balanced cases
    std::optional<std::vector<int>> isb_witness;   // unbalanced, non-stabilizing case
    std::optional<std::vector<int>> rho;           // bipartite cases
    std::optional<std::vector<double>> v;          // left eigenvector at 0, v^T rho = 1
};

/// Static outcome from graph structure alone:
///   SB + QSC      -> Consensus (empty camp 2) or Polarization, with (rho, v)
///   SB, not QSC   -> NoModulusConsensus
///   unbalanced    -> Stabilizing unless some in-isolated balanced subgraph
///                    exists, which makes modulus consensus impossible.
inline StaticPrediction static_predict(const SignedMatrix& a) {
    StaticPrediction out;
    const BalanceResult bal = hostile_camps(a);
    if (bal.balanced) {
        out.camps = bal.camps;
        if (is_quasi_strongly_connected(a).qsc) {
            out.kind = bal.camps.camp2.empty() ? OutcomeKind::Consensus : OutcomeKind::Polarization;
            out.rho = rho_from_camps(bal.camps, a.n());
            out.v = left_null_vector(laplacian(a), *out.rho);
        } else {
            out.kind = OutcomeKind::NoModulusConsensus;
        }
        return out;
    }
    const IsbResult isb = has_isb_subgraph(a);
    if (isb.found) {
        out.kind = OutcomeKind::NoModulusConsensus;
        out.isb_witness = isb.witness;
    } else {
        out.kind = OutcomeKind::Stabilizing;
    }
    return out;
}

}  // namespace signedflow
