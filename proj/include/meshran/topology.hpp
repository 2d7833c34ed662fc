#pragma once

#include <algorithm>
#include <functional>
#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshran {

using NodeId = std::uint32_t;
using MicroSec = std::int64_t;

enum class NodeKind : std::uint8_t {
    UE,
    AccessNode,      // gNB-DU or IAB-node
    DonorNode,       // gNB-CU or IAB-donor
    AggregationSite,
    CoreSite,
};

enum class LinkKind : std::uint8_t { Uu, Xn, F1, NCore };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::UE: return "UE";
        case NodeKind::AccessNode: return "AccessNode";
        case NodeKind::DonorNode: return "DonorNode";
        case NodeKind::AggregationSite: return "AggregationSite";
        case NodeKind::CoreSite: return "CoreSite";
    }
    return "?";
}

inline const char* to_string(LinkKind k) {
    switch (k) {
        case LinkKind::Uu: return "Uu";
        case LinkKind::Xn: return "Xn";
        case LinkKind::F1: return "F1";
        case LinkKind::NCore: return "N_core";
    }
    return "?";
}

struct Link {
    NodeId a = 0;
    NodeId b = 0;
    MicroSec latency_us = 0;   // one-way; links are bidirectional and symmetric
    double loss_prob = 0.0;
    std::uint32_t capacity_sessions = 0;
    LinkKind kind = LinkKind::Xn;

    bool connects(NodeId x, NodeId y) const {
        return (a == x && b == y) || (a == y && b == x);
    }
    NodeId other(NodeId n) const { return n == a ? b : a; }
};

enum class Variant : std::uint8_t {
    EmbbCentral,    // UPF and CP core in the core site, split 7
    CloudConverged, // cloud-native micro-services; routed like EmbbCentral
    AggUpf,         // UPF at the aggregation site, CP core stays central
    MeshUrllc,      // UPF in access nodes, CP core at the aggregation site
    IabCentral,     // IAB flavor of the centralized design
    IabCoreInCu,    // core functions inside the donor CU
    IabCoreInDu,    // core functions inside the IAB-node DUs
    IabP2p,         // P2P connections among RAN nodes, donor keeps plain RAN-CU
};

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::EmbbCentral: return "EMBB_CENTRAL";
        case Variant::CloudConverged: return "CLOUD_CONVERGED";
        case Variant::AggUpf: return "AGG_UPF";
        case Variant::MeshUrllc: return "MESH_URLLC";
        case Variant::IabCentral: return "IAB_CENTRAL";
        case Variant::IabCoreInCu: return "IAB_CORE_IN_CU";
        case Variant::IabCoreInDu: return "IAB_CORE_IN_DU";
        case Variant::IabP2p: return "IAB_P2P";
    }
    return "?";
}

inline std::optional<Variant> variant_from_string(const std::string& s) {
    for (auto v : {Variant::EmbbCentral, Variant::CloudConverged, Variant::AggUpf,
                   Variant::MeshUrllc, Variant::IabCentral, Variant::IabCoreInCu,
                   Variant::IabCoreInDu, Variant::IabP2p})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

struct Placement {
    Variant variant = Variant::EmbbCentral;
    NodeKind upf_at = NodeKind::CoreSite;     // data-plane anchor
    NodeKind cp_core_at = NodeKind::CoreSite; // signalling anchor
    int split_option = 7;

    // True when no signalling transits the core site.
    bool coreless() const {
        return variant == Variant::IabCoreInCu || variant == Variant::IabCoreInDu ||
               variant == Variant::IabP2p;
    }

    static Placement for_variant(Variant v) {
        switch (v) {
            case Variant::EmbbCentral:
            case Variant::CloudConverged:
            case Variant::IabCentral:
                return {v, NodeKind::CoreSite, NodeKind::CoreSite, 7};
            case Variant::AggUpf:
                return {v, NodeKind::AggregationSite, NodeKind::CoreSite, 2};
            case Variant::MeshUrllc:
                return {v, NodeKind::AccessNode, NodeKind::AggregationSite, 2};
            case Variant::IabCoreInCu:
                return {v, NodeKind::AccessNode, NodeKind::DonorNode, 2};
            case Variant::IabCoreInDu:
            case Variant::IabP2p:
                return {v, NodeKind::AccessNode, NodeKind::AccessNode, 2};
        }
        return {};
    }
};

enum class Plane : std::uint8_t { Data, Signalling };

struct Path {
    std::vector<NodeId> hops;
    MicroSec total_latency_us = 0;
    Plane plane = Plane::Data;

    bool empty() const { return hops.empty(); }
    std::size_t hop_count() const { return hops.empty() ? 0 : hops.size() - 1; }
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TopologySpec {
    std::vector<std::pair<NodeId, NodeKind>> nodes;
    std::vector<Link> links;
    Variant variant = Variant::EmbbCentral;
};

// Failure state owned by the simulator; topology itself is immutable.
struct Liveness {
    std::set<std::size_t> dead_links; // indices into Topology::links()
    std::set<NodeId> dead_nodes;

    bool node_ok(NodeId n) const { return !dead_nodes.count(n); }
    bool link_ok(std::size_t idx, const Link& l) const {
        return !dead_links.count(idx) && node_ok(l.a) && node_ok(l.b);
    }
};

class Topology {
public:
    Topology() = default;

    const std::vector<std::pair<NodeId, NodeKind>>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const Placement& placement() const { return placement_; }

    bool has_node(NodeId n) const {
        return std::any_of(nodes_.begin(), nodes_.end(),
                           [n](auto& p) { return p.first == n; });
    }

    NodeKind kind(NodeId n) const {
        for (auto& [id, k] : nodes_)
            if (id == n) return k;
        throw ValidationError("unknown node id " + std::to_string(n));
    }

    std::vector<NodeId> nodes_of_kind(NodeKind k) const {
        std::vector<NodeId> out;
        for (auto& [id, kd] : nodes_)
            if (kd == k) out.push_back(id);
        return out;
    }

    // Index into links(), or nullopt.
    std::optional<std::size_t> link_between(NodeId x, NodeId y) const {
        for (std::size_t i = 0; i < links_.size(); ++i)
            if (links_[i].connects(x, y)) return i;
        return std::nullopt;
    }

    std::vector<NodeId> neighbors(NodeId n, const Liveness* live = nullptr) const {
        std::vector<NodeId> out;
        for (std::size_t i = 0; i < links_.size(); ++i) {
            const Link& l = links_[i];
            if (live && !live->link_ok(i, l)) continue;
            if (l.a == n) out.push_back(l.b);
            else if (l.b == n) out.push_back(l.a);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // Serving gNB of a UE (its unique Uu neighbor).
    NodeId serving_gnb(NodeId ue) const {
        for (const Link& l : links_)
            if (l.kind == LinkKind::Uu && (l.a == ue || l.b == ue)) {
                NodeId peer = l.other(ue);
                if (kind(peer) != NodeKind::UE) return peer;
            }
        throw ValidationError("UE " + std::to_string(ue) + " has no serving gNB");
    }

    bool is_gnb_level(NodeId n) const {
        NodeKind k = kind(n);
        return k == NodeKind::AccessNode || k == NodeKind::DonorNode;
    }

    friend Topology build_topology(const TopologySpec& spec);

private:
    std::vector<std::pair<NodeId, NodeKind>> nodes_;
    std::vector<Link> links_;
    Placement placement_;
};

namespace detail {

inline bool connected(const std::vector<std::pair<NodeId, NodeKind>>& nodes,
                      const std::vector<Link>& links) {
    if (nodes.empty()) return true;
    std::set<NodeId> seen{nodes.front().first};
    std::queue<NodeId> q;
    q.push(nodes.front().first);
    while (!q.empty()) {
        NodeId n = q.front();
        q.pop();
        for (const Link& l : links) {
            if (l.a != n && l.b != n) continue;
            NodeId m = l.other(n);
            if (seen.insert(m).second) q.push(m);
        }
    }
    return seen.size() == nodes.size();
}

} // namespace detail

inline Topology build_topology(const TopologySpec& spec) {
    Topology t;
    t.placement_ = Placement::for_variant(spec.variant);

    std::set<NodeId> ids;
    for (auto& [id, k] : spec.nodes)
        if (!ids.insert(id).second)
            throw ValidationError("duplicate node id " + std::to_string(id));
    t.nodes_ = spec.nodes;
    std::sort(t.nodes_.begin(), t.nodes_.end());

    auto kind_of = [&](NodeId n) -> NodeKind {
        for (auto& [id, k] : t.nodes_)
            if (id == n) return k;
        throw ValidationError("link endpoint " + std::to_string(n) + " is not a node");
    };

    for (const Link& l : spec.links) {
        NodeKind ka = kind_of(l.a), kb = kind_of(l.b);
        if (l.a == l.b) throw ValidationError("self-link at node " + std::to_string(l.a));
        if (l.latency_us <= 0) throw ValidationError("link latency must be positive");
        if (l.loss_prob < 0.0 || l.loss_prob >= 1.0)
            throw ValidationError("link loss_prob must be in [0,1)");
        if (l.kind == LinkKind::Uu) {
            bool ue_access = (ka == NodeKind::UE && kb == NodeKind::AccessNode) ||
                             (kb == NodeKind::UE && ka == NodeKind::AccessNode);
            bool access_access = ka == NodeKind::AccessNode && kb == NodeKind::AccessNode;
            if (!ue_access && !access_access)
                throw ValidationError("Uu link allowed only between UE/AccessNode or AccessNode/AccessNode");
        }
        if (l.kind == LinkKind::Xn) {
            auto gnb_level = [](NodeKind k) {
                return k == NodeKind::AccessNode || k == NodeKind::DonorNode;
            };
            if (!gnb_level(ka) || !gnb_level(kb))
                throw ValidationError("Xn link allowed only between gNB-level nodes");
        }
        if (ka == NodeKind::UE || kb == NodeKind::UE) {
            if (l.kind != LinkKind::Uu)
                throw ValidationError("UE links must be Uu");
        }
    }
    t.links_ = spec.links;

    // Every UE attaches to exactly one AccessNode.
    for (auto& [id, k] : t.nodes_) {
        if (k != NodeKind::UE) continue;
        int attach = 0;
        for (const Link& l : t.links_)
            if (l.a == id || l.b == id) ++attach;
        if (attach != 1)
            throw ValidationError("UE " + std::to_string(id) +
                                  " must attach to exactly one AccessNode");
    }

    const Placement& p = t.placement_;
    auto count_kind = [&](NodeKind k) {
        std::size_t n = 0;
        for (auto& [id, kd] : t.nodes_)
            if (kd == k) ++n;
        return n;
    };

    if (p.upf_at == NodeKind::CoreSite && count_kind(NodeKind::CoreSite) == 0)
        throw ValidationError(std::string(to_string(p.variant)) + " requires a CoreSite node");
    if (spec.variant == Variant::AggUpf && count_kind(NodeKind::AggregationSite) == 0)
        throw ValidationError("AGG_UPF requires an AggregationSite node");
    if (spec.variant == Variant::MeshUrllc) {
        if (count_kind(NodeKind::AggregationSite) == 0)
            throw ValidationError("MESH_URLLC requires an AggregationSite node");
        bool has_xn = std::any_of(t.links_.begin(), t.links_.end(),
                                  [](const Link& l) { return l.kind == LinkKind::Xn; });
        if (!has_xn)
            throw ValidationError("MESH_URLLC requires an Xn link between AccessNodes");
    }
    if (spec.variant == Variant::IabCoreInCu && count_kind(NodeKind::DonorNode) == 0)
        throw ValidationError("IAB_CORE_IN_CU requires a DonorNode");

    // A donor must reach the core/aggregation side unless the variant is coreless.
    if (!p.coreless()) {
        for (auto& [id, k] : t.nodes_) {
            if (k != NodeKind::DonorNode) continue;
            bool ok = false;
            for (const Link& l : t.links_) {
                if (l.a != id && l.b != id) continue;
                NodeKind other = kind_of(l.other(id));
                if (other == NodeKind::CoreSite || other == NodeKind::AggregationSite)
                    ok = true;
            }
            if (!ok)
                throw ValidationError("DonorNode " + std::to_string(id) +
                                      " needs a link toward CoreSite or AggregationSite");
        }
    }

    if (!detail::connected(t.nodes_, t.links_))
        throw ValidationError("topology graph is not connected");

    return t;
}

// ---------------------------------------------------------------------------
// Routing

struct RouteConstraint {
    std::optional<NodeKind> require; // path must contain a node of this kind
    std::vector<NodeKind> forbid;    // path may not touch these kinds
    std::function<bool(const Link&)> link_filter; // optional per-link veto

    bool allows(NodeKind k) const {
        return std::find(forbid.begin(), forbid.end(), k) == forbid.end();
    }
    bool allows_link(const Link& l) const { return !link_filter || link_filter(l); }
};

// Per-plane routing rule implied by the functional placement.
inline RouteConstraint constraint_for(const Placement& p, Plane plane) {
    RouteConstraint c;
    NodeKind anchor = plane == Plane::Data ? p.upf_at : p.cp_core_at;
    if (anchor == NodeKind::CoreSite) {
        c.require = NodeKind::CoreSite;
    } else if (anchor == NodeKind::AggregationSite) {
        c.require = NodeKind::AggregationSite;
        c.forbid = {NodeKind::CoreSite};
    } else if (anchor == NodeKind::DonorNode) {
        c.require = NodeKind::DonorNode;
        c.forbid = {NodeKind::CoreSite, NodeKind::AggregationSite};
    } else {
        // Anchored in the access nodes themselves: stay inside the RAN.
        c.forbid = {NodeKind::CoreSite, NodeKind::AggregationSite};
    }
    // Data anchored above the RAN rides the F1/NCore hierarchy, not the
    // direct inter-gNB links.
    if (plane == Plane::Data &&
        (anchor == NodeKind::CoreSite || anchor == NodeKind::AggregationSite))
        c.link_filter = [](const Link& l) { return l.kind != LinkKind::Xn; };
    return c;
}

namespace detail {

struct Label {
    MicroSec lat = 0;
    std::vector<NodeId> hops;

    // Order: latency, then hop count, then lexicographic hop sequence.
    bool better_than(const Label& o) const {
        if (lat != o.lat) return lat < o.lat;
        if (hops.size() != o.hops.size()) return hops.size() < o.hops.size();
        return hops < o.hops;
    }
};

// Dijkstra under the composite (latency, hops, lex) order; simple paths only.
inline std::optional<Label> best_simple_path(
        const Topology& t, NodeId src, NodeId dst, const RouteConstraint& c,
        const Liveness* live, const std::set<std::size_t>* excluded_links) {
    if (src == dst) return Label{0, {src}};
    if (live && (!live->node_ok(src) || !live->node_ok(dst))) return std::nullopt;

    auto cmp = [](const Label& x, const Label& y) { return y.better_than(x); };
    std::priority_queue<Label, std::vector<Label>, decltype(cmp)> pq(cmp);
    std::set<NodeId> done;
    pq.push(Label{0, {src}});
    while (!pq.empty()) {
        Label cur = pq.top();
        pq.pop();
        NodeId n = cur.hops.back();
        if (done.count(n)) continue;
        done.insert(n);
        if (n == dst) return cur;
        for (std::size_t i = 0; i < t.links().size(); ++i) {
            const Link& l = t.links()[i];
            if (l.a != n && l.b != n) continue;
            if (live && !live->link_ok(i, l)) continue;
            if (excluded_links && excluded_links->count(i)) continue;
            if (!c.allows_link(l)) continue;
            NodeId m = l.other(n);
            if (done.count(m)) continue;
            if (m != dst && !c.allows(t.kind(m))) continue;
            Label nxt = cur;
            nxt.lat += l.latency_us;
            nxt.hops.push_back(m);
            pq.push(std::move(nxt));
        }
    }
    return std::nullopt;
}

} // namespace detail

// Minimum-latency path from src to dst honoring the constraint. When the
// constraint requires an anchor kind, the path is the best concatenation of
// two simple legs through an anchor node; the legs may revisit a node (the
// core-anchored UE-to-UE path goes up and back through the same aggregation
// site).
inline std::optional<Path> constrained_path(const Topology& t, NodeId src, NodeId dst,
                                            const RouteConstraint& c, Plane plane,
                                            const Liveness* live = nullptr) {
    using detail::Label;
    if (src == dst) return Path{{src}, 0, plane};
    std::optional<Label> best;

    auto consider = [&](std::optional<Label> cand) {
        if (!cand) return;
        if (!best || cand->better_than(*best)) best = std::move(cand);
    };

    bool anchored = c.require.has_value();
    if (anchored) {
        // Endpoints of the required kind anchor trivially.
        for (NodeId a : t.nodes_of_kind(*c.require)) {
            if (live && !live->node_ok(a)) continue;
            RouteConstraint leg = c;
            leg.require.reset();
            auto l1 = detail::best_simple_path(t, src, a, leg, live, nullptr);
            if (!l1) continue;
            auto l2 = detail::best_simple_path(t, a, dst, leg, live, nullptr);
            if (!l2) continue;
            Label joined;
            joined.lat = l1->lat + l2->lat;
            joined.hops = l1->hops;
            joined.hops.insert(joined.hops.end(), l2->hops.begin() + 1, l2->hops.end());
            consider(std::move(joined));
        }
    } else {
        consider(detail::best_simple_path(t, src, dst, c, live, nullptr));
    }

    if (!best) return std::nullopt;
    return Path{std::move(best->hops), best->lat, plane};
}

// Minimum-latency placement-respecting path between two endpoints.
inline std::optional<Path> compute_path(const Topology& t, NodeId src, NodeId dst,
                                        Plane plane, const Liveness* live = nullptr) {
    return constrained_path(t, src, dst, constraint_for(t.placement(), plane), plane, live);
}

// Up to k pairwise link-disjoint data-plane paths, greedy shortest-first,
// sorted by ascending latency.
inline std::vector<Path> k_disjoint_paths(const Topology& t, NodeId src, NodeId dst,
                                          unsigned k, const Liveness* live = nullptr) {
    RouteConstraint c = constraint_for(t.placement(), Plane::Data);
    c.require.reset(); // redundancy analysis looks only at graph structure
    std::vector<Path> out;
    std::set<std::size_t> used;
    for (unsigned i = 0; i < k; ++i) {
        auto lab = detail::best_simple_path(t, src, dst, c, live, &used);
        if (!lab) break;
        for (std::size_t h = 0; h + 1 < lab->hops.size(); ++h)
            used.insert(*t.link_between(lab->hops[h], lab->hops[h + 1]));
        out.push_back(Path{std::move(lab->hops), lab->lat, Plane::Data});
    }
    std::sort(out.begin(), out.end(), [](const Path& x, const Path& y) {
        return x.total_latency_us < y.total_latency_us;
    });
    return out;
}

} // namespace meshran
