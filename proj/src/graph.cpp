#include "sltp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "sltp/parallel.hpp"
#include "sltp/random.hpp"

namespace sltp {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::vector<double> strengths(const SquareMatrix& g) {
    std::vector<double> s(g.n, 0.0);
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            if (i != j) s[i] += g(i, j);
    return s;
}

void check_graph(const SquareMatrix& g) {
    if (g.v.size() != g.n * g.n) throw std::invalid_argument("graph: matrix size mismatch");
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            if (!(g(i, j) >= 0.0) || !std::isfinite(g(i, j)) || g(i, j) != g(j, i))
                throw std::invalid_argument("graph: weights must be finite, nonnegative and symmetric");
}

// Supernode graph for the greedy optimizer; weights already divided by 2W.
struct Level {
    std::size_t n = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;
    std::vector<double> flow;
    std::vector<double> exit;
};

Level make_level(const SquareMatrix& g, double two_w, const std::vector<double>& node_flow,
                 const std::vector<std::size_t>& nodes, const std::vector<int>& group, std::size_t n_groups) {
    Level lv;
    lv.n = n_groups;
    lv.adj.resize(n_groups);
    lv.flow.assign(n_groups, 0.0);
    lv.exit.assign(n_groups, 0.0);
    std::vector<std::map<std::size_t, double>> acc(n_groups);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        const auto ga = static_cast<std::size_t>(group[a]);
        lv.flow[ga] += node_flow[a];
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            const double w = g(nodes[a], nodes[b]);
            if (a == b || w <= 0.0) continue;
            const auto gb = static_cast<std::size_t>(group[b]);
            if (ga != gb) acc[ga][gb] += w / two_w;
        }
    }
    for (std::size_t i = 0; i < n_groups; ++i) {
        for (const auto& [j, w] : acc[i]) {
            lv.adj[i].push_back({j, w});
            lv.exit[i] += w;
        }
    }
    return lv;
}

// Local node moves on one level; returns the module of every supernode.
std::vector<int> local_moves(const Level& lv, std::vector<int> mod, Rng& rng) {
    const std::size_t n = lv.n;
    std::vector<double> F(n, 0.0), E(n, 0.0);
    // Module exit = sum of member exits minus twice the internal weight.
    for (std::size_t a = 0; a < n; ++a) {
        const auto m = static_cast<std::size_t>(mod[a]);
        F[m] += lv.flow[a];
        E[m] += lv.exit[a];
        for (const auto& [b, w] : lv.adj[a])
            if (mod[b] == mod[a]) E[m] -= w;
    }
    double sum_e = std::accumulate(E.begin(), E.end(), 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;
    for (int pass = 0; pass < 200; ++pass) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        bool moved = false;
        for (auto a : order) {
            const auto A = static_cast<std::size_t>(mod[a]);
            touched.clear();
            for (const auto& [b, w] : lv.adj[a]) {
                const auto m = static_cast<std::size_t>(mod[b]);
                if (link[m] == 0.0) touched.push_back(m);
                link[m] += w;
            }
            const double w_a_in_A = link[A];
            const double ea = std::max(0.0, E[A] - lv.exit[a] + 2.0 * w_a_in_A);
            const double fa = F[A] - lv.flow[a];
            const double base_a = -2.0 * plogp(E[A]) + plogp(E[A] + F[A]);
            const double new_a = -2.0 * plogp(ea) + plogp(ea + fa);
            double best = -1e-12;
            std::size_t best_m = A;
            double best_eb = 0.0, best_ea = ea;
            std::sort(touched.begin(), touched.end());
            for (auto B : touched) {
                if (B == A) continue;
                const double eb = std::max(0.0, E[B] + lv.exit[a] - 2.0 * link[B]);
                const double fb = F[B] + lv.flow[a];
                const double se = sum_e - E[A] - E[B] + ea + eb;
                const double delta = plogp(se) - plogp(sum_e) + new_a - base_a - 2.0 * plogp(eb) +
                                     plogp(eb + fb) + 2.0 * plogp(E[B]) - plogp(E[B] + F[B]);
                if (delta < best) {
                    best = delta;
                    best_m = B;
                    best_eb = eb;
                }
            }
            for (auto m : touched) link[m] = 0.0;
            if (best_m == A) continue;
            sum_e = sum_e - E[A] - E[best_m] + best_ea + best_eb;
            E[A] = best_ea;
            F[A] -= lv.flow[a];
            E[best_m] = best_eb;
            F[best_m] += lv.flow[a];
            mod[a] = static_cast<int>(best_m);
            moved = true;
        }
        if (!moved) break;
    }
    return mod;
}

std::vector<int> compact(const std::vector<int>& mod, std::size_t& count) {
    std::map<int, int> ids;
    std::vector<int> out(mod.size());
    for (std::size_t i = 0; i < mod.size(); ++i) {
        auto it = ids.find(mod[i]);
        if (it == ids.end()) it = ids.emplace(mod[i], static_cast<int>(ids.size())).first;
        out[i] = it->second;
    }
    count = ids.size();
    return out;
}

// One greedy run over the connected nodes; returns module per connected node.
std::vector<int> greedy_run(const SquareMatrix& g, double two_w, const std::vector<std::size_t>& nodes,
                            const std::vector<double>& node_flow, Rng& rng) {
    const std::size_t n = nodes.size();
    std::vector<int> assign(n);
    std::iota(assign.begin(), assign.end(), 0);
    auto codelength = [&](const std::vector<int>& a) {
        SquareMatrix sub(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sub(i, j) = g(nodes[i], nodes[j]);
        return map_equation(sub, a);
    };
    double best = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 20; ++round) {
        // Fine moves of single nodes starting from the current modules.
        std::vector<int> identity(n);
        std::iota(identity.begin(), identity.end(), 0);
        auto base = make_level(g, two_w, node_flow, nodes, identity, n);
        assign = local_moves(base, assign, rng);
        std::size_t count = 0;
        assign = compact(assign, count);
        // Coarse moves of whole modules.
        while (true) {
            auto lv = make_level(g, two_w, node_flow, nodes, assign, count);
            std::vector<int> start(count);
            std::iota(start.begin(), start.end(), 0);
            std::size_t merged_count = 0;
            const auto merged = compact(local_moves(lv, start, rng), merged_count);
            if (merged_count == count) break;
            for (auto& a : assign) a = merged[static_cast<std::size_t>(a)];
            count = merged_count;
        }
        const double L = codelength(assign);
        if (!(L < best - 1e-12)) break;
        best = L;
    }
    return assign;
}

std::vector<int> exhaustive(const SquareMatrix& g, const std::vector<std::size_t>& nodes) {
    const std::size_t n = nodes.size();
    SquareMatrix sub(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sub(i, j) = g(nodes[i], nodes[j]);
    std::vector<int> a(n, 0), hi(n, 0), best = a;
    double best_l = map_equation(sub, a);
    if (n <= 1) return best;
    // Restricted growth strings: a[i] <= max(a[0..i-1]) + 1.
    while (true) {
        std::size_t i = n - 1;
        while (i > 0 && a[i] > hi[i - 1]) --i;
        if (i == 0) break;
        ++a[i];
        hi[i] = std::max(hi[i - 1], a[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            a[j] = 0;
            hi[j] = hi[j - 1];
        }
        const double L = map_equation(sub, a);
        if (L < best_l - 1e-12) {
            best_l = L;
            best = a;
        }
    }
    return best;
}

}  // namespace

SquareMatrix replacement_counts(const PatternModel& model, std::span<const RoiRecord> rois, int threads) {
    const std::size_t n = model.patterns.size();
    SquareMatrix counts(n);
    parallel_for(n, threads, [&](std::size_t i) {
        for (auto x : model.patterns[i].members) {
            int best = -1;
            double best_cost = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                const auto& p = model.patterns[k];
                const double chi = chi2_distance(rois[x].texture, p.texture);
                if (model.penalty && chi > p.d_max) continue;
                double c = chi;
                if (model.lambda != 0.0 && model.W != 0.0)
                    c += model.lambda * model.W * spatial_distance(rois[x].subregion, p.spatial);
                if (c < best_cost) {
                    best_cost = c;
                    best = static_cast<int>(k);
                }
            }
            if (best >= 0) counts(i, static_cast<std::size_t>(best)) += 1.0;
        }
    });
    return counts;
}

SimilarityGraph build_similarity_graph(const SquareMatrix& counts, std::span<const std::size_t> members,
                                       double eta) {
    const std::size_t n = counts.n;
    if (members.size() != n) throw std::invalid_argument("build_similarity_graph: member count mismatch");
    SimilarityGraph g;
    g.n = n;
    g.counts = counts;
    g.members.assign(members.begin(), members.end());
    g.eta = eta;
    g.ratio.assign(n, 0.0);
    g.active.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (counts(i, j) < 0.0) throw std::invalid_argument("build_similarity_graph: negative count");
            row += counts(i, j);
        }
        if (row > static_cast<double>(members[i]))
            throw std::invalid_argument("build_similarity_graph: replacements exceed members");
        g.ratio[i] = members[i] ? row / static_cast<double>(members[i]) : 0.0;
        g.active[i] = g.ratio[i] > eta;
    }
    g.weights = SquareMatrix(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !g.active[i] || !g.active[j]) continue;
            const double den = static_cast<double>(members[i] + members[j]);
            g.weights(i, j) = den > 0.0 ? (counts(i, j) + counts(j, i)) / den : 0.0;
        }
    }
    return g;
}

std::vector<double> node_frequencies(const SquareMatrix& g) {
    check_graph(g);
    auto s = strengths(g);
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("node_frequencies: graph has no edges");
    for (double& v : s) v /= total;
    return s;
}

double map_equation(const SquareMatrix& g, std::span<const int> modules) {
    if (modules.size() != g.n) throw std::invalid_argument("map_equation: partition size mismatch");
    int n_mod = 0;
    for (int m : modules) {
        if (m < 0) throw std::invalid_argument("map_equation: negative module id");
        n_mod = std::max(n_mod, m + 1);
    }
    const auto s = strengths(g);
    const double two_w = std::accumulate(s.begin(), s.end(), 0.0);
    if (two_w <= 0.0) return 0.0;
    std::vector<double> F(static_cast<std::size_t>(n_mod), 0.0), E(static_cast<std::size_t>(n_mod), 0.0);
    double node_term = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double p = s[i] / two_w;
        node_term += plogp(p);
        F[static_cast<std::size_t>(modules[i])] += p;
        for (std::size_t j = 0; j < g.n; ++j)
            if (j != i && modules[j] != modules[i]) E[static_cast<std::size_t>(modules[i])] += g(i, j) / two_w;
    }
    double sum_e = 0.0, exit_term = 0.0, total_term = 0.0;
    for (std::size_t m = 0; m < E.size(); ++m) {
        sum_e += E[m];
        exit_term += plogp(E[m]);
        total_term += plogp(E[m] + F[m]);
    }
    return plogp(sum_e) - 2.0 * exit_term - node_term + total_term;
}

Partition canonical_partition(std::span<const int> modules, const SquareMatrix& g) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < modules.size(); ++i) groups[modules[i]].push_back(i);
    std::vector<std::vector<std::size_t>> list;
    for (auto& [id, members] : groups) list.push_back(std::move(members));
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    Partition p;
    p.modules.assign(modules.size(), 0);
    for (std::size_t m = 0; m < list.size(); ++m)
        for (auto i : list[m]) p.modules[i] = static_cast<int>(m);
    p.module_count = list.size();
    p.codelength = map_equation(g, p.modules);
    return p;
}

Partition infomap_partition(const SquareMatrix& g, InfomapMode mode, std::uint64_t seed, int restarts) {
    check_graph(g);
    if (g.n == 0) throw std::invalid_argument("infomap_partition: empty graph");
    if (mode == InfomapMode::Exhaustive && g.n > kExhaustiveLimit)
        throw std::invalid_argument("infomap_partition: exhaustive mode supports at most 12 nodes");
    const auto s = strengths(g);
    const double two_w = std::accumulate(s.begin(), s.end(), 0.0);
    std::vector<std::size_t> nodes;
    std::vector<double> flow;
    for (std::size_t i = 0; i < g.n; ++i) {
        if (s[i] > 0.0) {
            nodes.push_back(i);
            flow.push_back(s[i] / two_w);
        }
    }
    std::vector<int> sub;
    if (mode == InfomapMode::Exhaustive) {
        sub = exhaustive(g, nodes);
    } else if (!nodes.empty()) {
        SquareMatrix sg(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (std::size_t j = 0; j < nodes.size(); ++j) sg(i, j) = g(nodes[i], nodes[j]);
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < std::max(1, restarts); ++r) {
            Rng rng(stream_seed(seed, "infomap", static_cast<std::uint64_t>(r)));
            auto a = greedy_run(g, two_w, nodes, flow, rng);
            const double L = map_equation(sg, a);
            if (L < best - 1e-12) {
                best = L;
                sub = std::move(a);
            }
        }
    }
    std::vector<int> modules(g.n, -1);
    int next = 0;
    for (int m : sub) next = std::max(next, m + 1);
    for (std::size_t k = 0; k < nodes.size(); ++k) modules[nodes[k]] = sub[k];
    for (auto& m : modules)
        if (m < 0) m = next++;
    return canonical_partition(modules, g);
}

PatternModel finalize_sltps(const Partition& partition, const PatternModel& model, std::span<const RoiRecord> rois) {
    if (partition.modules.size() != model.patterns.size())
        throw std::invalid_argument("finalize_sltps: partition does not cover the model");
    std::vector<int> labels(model.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = partition.modules[static_cast<std::size_t>(model.labels[i])];
    auto out = build_patterns(rois, labels);
    out.lambda = model.lambda;
    out.W = model.W;
    out.penalty = model.penalty;
    out.sweeps = model.sweeps;
    out.converged = model.converged;
    return out;
}

}  // namespace sltp
