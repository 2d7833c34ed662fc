#pragma once

#include <algorithm>
#include <vector>

#include "meshran/rng.hpp"
#include "meshran/simulator.hpp"
#include "meshran/wire.hpp"

namespace meshran::testing {

inline QosProfile random_qos(CounterRng& rng) {
    QosProfile q;
    q.max_latency_us = 1 + static_cast<MicroSec>(rng.below(1'000'000));
    q.reliability_exp = static_cast<std::uint8_t>(3 + rng.below(7));
    q.service_type = static_cast<ServiceType>(rng.below(3));
    return q;
}

inline SessionRequest random_request(CounterRng& rng) {
    SessionRequest r;
    r.user_id = static_cast<NodeId>(1 + rng.below(1000));
    do {
        r.destination_id = static_cast<NodeId>(1 + rng.below(1000));
    } while (r.destination_id == r.user_id);
    r.qos = random_qos(rng);
    r.channel_quality = static_cast<std::uint8_t>(rng.below(16));
    return r;
}

inline std::vector<PduSessionDesc> random_descs(CounterRng& rng, std::uint64_t max_n) {
    std::vector<PduSessionDesc> v;
    std::uint64_t n = rng.below(max_n + 1);
    for (std::uint64_t i = 0; i < n; ++i)
        v.push_back({static_cast<std::uint32_t>(100 + i), random_qos(rng)});
    return v;
}

inline std::vector<NodeId> random_path(CounterRng& rng) {
    std::vector<NodeId> p;
    std::uint64_t n = rng.below(7);
    for (std::uint64_t i = 0; i < n; ++i)
        p.push_back(static_cast<NodeId>(1 + rng.below(100)));
    return p;
}

// Valid message of a random (or forced) tag. All invariants hold.
inline ProtocolMessage random_message(CounterRng& rng, int force_tag = 0) {
    ProtocolMessage msg;
    msg.hdr.src = static_cast<NodeId>(1 + rng.below(500));
    msg.hdr.dst = static_cast<NodeId>(1 + rng.below(500));
    msg.hdr.sent_at_us = rng.below(1'000'000'000);
    int tag = force_tag ? force_tag : static_cast<int>(1 + rng.below(18));
    auto sid = static_cast<SessionId>(1 + rng.below(100000));
    auto reason = static_cast<Reason>(rng.below(8));
    auto flag = static_cast<std::uint8_t>(rng.below(2));
    switch (tag) {
        case 0x01: msg.body = RrcSessionRequest{random_request(rng)}; break;
        case 0x02: msg.body = RrcSessionResponse{sid, flag, reason}; break;
        case 0x03: msg.body = GnbNotification{sid, random_request(rng)}; break;
        case 0x04: msg.body = GnbNotificationResponse{sid, flag, reason}; break;
        case 0x05:
            msg.body = PathConfiguration{
                sid, static_cast<NodeId>(1 + rng.below(500)),
                {static_cast<std::uint16_t>(rng.below(65536)),
                 static_cast<std::uint16_t>(rng.below(65536))},
                random_path(rng), static_cast<std::uint16_t>(rng.below(65536))};
            break;
        case 0x06: msg.body = PathComplete{sid}; break;
        case 0x07: msg.body = XnSetupRequest{}; break;
        case 0x08: msg.body = XnSetupResponse{flag}; break;
        case 0x09:
            msg.body = XnConnectionRequest{static_cast<NodeId>(1 + rng.below(500)),
                                           static_cast<NodeId>(1 + rng.below(500)),
                                           random_descs(rng, 5)};
            break;
        case 0x0A: {
            XnConnectionAck m;
            m.user_id = static_cast<NodeId>(1 + rng.below(500));
            m.requested = random_descs(rng, 5);
            for (auto& d : m.requested) {
                if (rng.below(2))
                    m.admitted.push_back(d.id);
                else
                    m.not_admitted.push_back(d.id);
            }
            msg.body = std::move(m);
            break;
        }
        case 0x0B:
            msg.body = RrcSessionConfig{
                sid, static_cast<NodeId>(1 + rng.below(500)),
                {static_cast<std::uint16_t>(rng.below(65536)),
                 static_cast<std::uint16_t>(rng.below(65536))},
                random_path(rng), static_cast<std::uint16_t>(rng.below(65536))};
            break;
        case 0x0C: msg.body = RrcComplete{sid}; break;
        case 0x0D: msg.body = MeshAuthRequest{random_request(rng)}; break;
        case 0x0E: msg.body = SessionRelease{sid}; break;
        case 0x0F:
            msg.body = MeshTopologyUpdate{static_cast<NodeId>(1 + rng.below(100)),
                                          static_cast<NodeId>(1 + rng.below(100)), flag,
                                          static_cast<std::uint32_t>(rng.below(1000))};
            break;
        case 0x10: msg.body = MeshAuthResponse{flag, reason}; break;
        case 0x11: msg.body = MeshScheduleRequest{sid, random_request(rng)}; break;
        case 0x12: msg.body = MeshScheduleResponse{sid, flag, reason}; break;
    }
    return msg;
}

// Random connected gNB mesh: 2 UEs on distinct gNBs, n_gnb access nodes,
// spanning tree plus extra random edges, all gNB links of `mesh_kind`.
struct MeshSpec {
    TopologySpec spec;
    NodeId ue1 = 1, ue2 = 2;
    NodeId gnb1 = 0, gnb2 = 0;
};

inline MeshSpec random_mesh(CounterRng& rng, Variant variant, std::size_t n_gnb,
                            LinkKind mesh_kind = LinkKind::Xn, double loss = 0.0,
                            bool with_agg_core = false) {
    MeshSpec m;
    m.spec.variant = variant;
    m.spec.nodes.push_back({1, NodeKind::UE});
    m.spec.nodes.push_back({2, NodeKind::UE});
    std::vector<NodeId> gnbs;
    for (std::size_t i = 0; i < n_gnb; ++i) {
        NodeId id = static_cast<NodeId>(10 + i);
        gnbs.push_back(id);
        m.spec.nodes.push_back({id, NodeKind::AccessNode});
    }
    auto lat = [&] { return static_cast<MicroSec>(100 + rng.below(900)); };
    // spanning tree
    for (std::size_t i = 1; i < n_gnb; ++i) {
        NodeId parent = gnbs[rng.below(i)];
        m.spec.links.push_back({gnbs[i], parent, lat(), loss, 8, mesh_kind});
    }
    // extra edges
    std::uint64_t extra = rng.below(n_gnb);
    for (std::uint64_t e = 0; e < extra; ++e) {
        NodeId a = gnbs[rng.below(n_gnb)], b = gnbs[rng.below(n_gnb)];
        if (a == b) continue;
        bool dup = false;
        for (auto& l : m.spec.links)
            if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) dup = true;
        if (!dup) m.spec.links.push_back({a, b, lat(), loss, 8, mesh_kind});
    }
    m.gnb1 = gnbs[rng.below(n_gnb)];
    do {
        m.gnb2 = gnbs[rng.below(n_gnb)];
    } while (n_gnb > 1 && m.gnb2 == m.gnb1);
    m.spec.links.push_back({1, m.gnb1, lat(), 0.0, 8, LinkKind::Uu});
    m.spec.links.push_back({2, m.gnb2, lat(), 0.0, 8, LinkKind::Uu});
    if (with_agg_core) {
        m.spec.nodes.push_back({200, NodeKind::AggregationSite});
        m.spec.nodes.push_back({201, NodeKind::CoreSite});
        m.spec.links.push_back({gnbs[0], 200, 1500, 0.0, 8, LinkKind::F1});
        m.spec.links.push_back({200, 201, 8000, 0.0, 8, LinkKind::NCore});
    }
    return m;
}

inline SessionRequest make_request(NodeId src, NodeId dst, MicroSec max_lat = 1'000'000) {
    SessionRequest req;
    req.user_id = src;
    req.destination_id = dst;
    req.qos.max_latency_us = max_lat;
    req.qos.reliability_exp = 5;
    req.qos.service_type = ServiceType::Xurllc;
    req.channel_quality = 10;
    return req;
}

} // namespace meshran::testing
