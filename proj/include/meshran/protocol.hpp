#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "meshran/topology.hpp"
#include "meshran/wire.hpp"

namespace meshran {

enum class Approach : std::uint8_t { A, B, C };

inline const char* to_string(Approach a) {
    switch (a) {
        case Approach::A: return "A";
        case Approach::B: return "B";
        case Approach::C: return "C";
    }
    return "?";
}

inline std::optional<Approach> approach_from_string(const std::string& s) {
    if (s == "A") return Approach::A;
    if (s == "B") return Approach::B;
    if (s == "C") return Approach::C;
    return std::nullopt;
}

enum class Role : std::uint8_t { SourceGnb, TargetGnb, Ue };

enum class FsmState : std::uint8_t {
    // source gNB, approach B
    Idle, ResourceChecked, AwaitTargetResponse, PathSetup, AwaitComplete,
    // target gNB, approach B
    Evaluating, Configured,
    // approach C
    XnIdle, XnSetup, AwaitAck,
    // approach A
    Authenticated, Scheduled,
    // UE
    Detached, Requested,
    // shared terminals
    Active, Failed,
};

inline const char* to_string(FsmState s) {
    switch (s) {
        case FsmState::Idle: return "Idle";
        case FsmState::ResourceChecked: return "ResourceChecked";
        case FsmState::AwaitTargetResponse: return "AwaitTargetResponse";
        case FsmState::PathSetup: return "PathSetup";
        case FsmState::AwaitComplete: return "AwaitComplete";
        case FsmState::Evaluating: return "Evaluating";
        case FsmState::Configured: return "Configured";
        case FsmState::XnIdle: return "XnIdle";
        case FsmState::XnSetup: return "XnSetup";
        case FsmState::AwaitAck: return "AwaitAck";
        case FsmState::Authenticated: return "Authenticated";
        case FsmState::Scheduled: return "Scheduled";
        case FsmState::Detached: return "Detached";
        case FsmState::Requested: return "Requested";
        case FsmState::Active: return "Active";
        case FsmState::Failed: return "Failed";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Mapping table

struct MappingTableEntry {
    SessionId session_id = 0;
    NodeId local_ue = 0;
    NodeId peer_gnb = 0;
    NodeId peer_ue = 0;
    std::uint16_t bearer_id = 0;
    NodeId next_hop = 0;
    QosProfile qos;

    bool operator==(const MappingTableEntry&) const = default;
};

enum class MapUpdateResult { Inserted, Unchanged, InconsistentEntry };

class MappingTable {
public:
    using Key = std::pair<SessionId, NodeId>; // (session_id, local_ue)

    // Upsert keyed by (session_id, local_ue); identical entries are a no-op,
    // a key that maps to different peers is rejected.
    MapUpdateResult upsert(const MappingTableEntry& e) {
        Key k{e.session_id, e.local_ue};
        auto it = entries_.find(k);
        if (it == entries_.end()) {
            entries_.emplace(k, e);
            return MapUpdateResult::Inserted;
        }
        if (it->second == e) return MapUpdateResult::Unchanged;
        return MapUpdateResult::InconsistentEntry;
    }

    const MappingTableEntry* find(SessionId sid, NodeId local_ue) const {
        auto it = entries_.find(Key{sid, local_ue});
        return it == entries_.end() ? nullptr : &it->second;
    }

    // Entry oriented toward dst_ue for the given flow.
    const MappingTableEntry* route(SessionId sid, NodeId src_ue, NodeId dst_ue) const {
        for (auto& [k, e] : entries_) {
            if (e.session_id != sid) continue;
            if ((e.local_ue == src_ue && e.peer_ue == dst_ue) ||
                (e.local_ue == dst_ue && e.peer_ue == src_ue))
                return &e;
        }
        return nullptr;
    }

    void erase_session(SessionId sid, NodeId peer_gnb) {
        for (auto it = entries_.begin(); it != entries_.end();)
            if (it->second.session_id == sid &&
                (peer_gnb == 0 || it->second.peer_gnb == peer_gnb))
                it = entries_.erase(it);
            else
                ++it;
    }

    std::size_t size() const { return entries_.size(); }
    const std::map<Key, MappingTableEntry>& entries() const { return entries_; }

private:
    std::map<Key, MappingTableEntry> entries_;
};

// ---------------------------------------------------------------------------
// Resource ledger and admission control

struct ResourceLedger {
    std::uint32_t capacity_sessions = 0;
    std::uint32_t allocated = 0;

    bool try_alloc(std::uint32_t n = 1) {
        if (allocated + n > capacity_sessions) return false;
        allocated += n;
        return true;
    }
    void release(std::uint32_t n = 1) { allocated = n > allocated ? 0 : allocated - n; }
    std::uint32_t available() const { return capacity_sessions - allocated; }
};

struct AdmissionResult {
    std::vector<PduSessionDesc> admitted;
    std::vector<PduSessionDesc> not_admitted;
};

// Greedy in list order while capacity remains; ledger is charged by |admitted|.
inline AdmissionResult admission_control(ResourceLedger& ledger,
                                         const std::vector<PduSessionDesc>& requested) {
    AdmissionResult r;
    for (const auto& d : requested) {
        if (ledger.try_alloc(1))
            r.admitted.push_back(d);
        else
            r.not_admitted.push_back(d);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Data Transfer Function

struct Packet {
    SessionId session_id = 0;
    std::uint32_t seq_no = 0;
    std::uint32_t size_bytes = 1;
    MicroSec created_at_us = 0;
    NodeId src_ue = 0;
    NodeId dst_ue = 0;
};

struct DtfCounters {
    std::uint64_t packets_forwarded = 0;
    std::uint64_t bytes_forwarded = 0;
    std::uint64_t qos_violations = 0;
};

using DtfAccounting = std::map<SessionId, DtfCounters>;

enum class DropReason : std::uint8_t {
    NoMapping, SessionNotActive, NoRoute, LinkLoss, LinkDown, QueueHorizon,
};

inline const char* to_string(DropReason r) {
    switch (r) {
        case DropReason::NoMapping: return "NoMapping";
        case DropReason::SessionNotActive: return "SessionNotActive";
        case DropReason::NoRoute: return "NoRoute";
        case DropReason::LinkLoss: return "LinkLoss";
        case DropReason::LinkDown: return "LinkDown";
        case DropReason::QueueHorizon: return "QueueHorizon";
    }
    return "?";
}

struct DtfForwardOk {
    NodeId next_hop;
};

using DtfResult = std::variant<DtfForwardOk, DropReason>;

// Looks up the next hop, updates counters, flags packets older than the
// session's latency budget. session_active reflects FSM state at this node
// (relay nodes pass true).
inline DtfResult dtf_forward(const MappingTable& table, DtfAccounting& acct,
                             const Packet& pkt, MicroSec now_us, bool session_active) {
    const MappingTableEntry* e = table.route(pkt.session_id, pkt.src_ue, pkt.dst_ue);
    if (!e) return DropReason::NoMapping;
    if (!session_active) return DropReason::SessionNotActive;
    DtfCounters& c = acct[pkt.session_id];
    c.packets_forwarded += 1;
    c.bytes_forwarded += pkt.size_bytes;
    if (now_us - pkt.created_at_us > e->qos.max_latency_us) c.qos_violations += 1;
    return DtfForwardOk{e->next_hop};
}

// ---------------------------------------------------------------------------
// Per-node protocol runtime

struct SessKey {
    NodeId src_gnb = 0; // gNB that allocated the session id
    SessionId sid = 0;

    auto operator<=>(const SessKey&) const = default;
};

struct SessionCtx {
    SessKey key;
    Role role = Role::SourceGnb;
    FsmState state = FsmState::Idle;
    Reason fail_reason = Reason::None;
    SessionRequest request;
    NodeId local_ue = 0;
    NodeId peer_ue = 0;
    NodeId peer_gnb = 0;
    std::vector<NodeId> data_path; // UE-to-UE, oriented src_ue -> dst_ue
    int retries_left = 1;
    std::uint32_t held_resources = 0;
};

struct NodeRuntime {
    NodeId id = 0;
    ResourceLedger ledger;
    MappingTable table;
    DtfAccounting dtf;
    std::map<SessKey, SessionCtx> sessions;
    std::set<NodeId> xn_peers; // cached XnSetup handshakes
    SessionId next_sid = 1;    // per-source-gNB allocator
    std::uint32_t next_update_seq = 1;

    SessionCtx* find(const SessKey& k) {
        auto it = sessions.find(k);
        return it == sessions.end() ? nullptr : &it->second;
    }
};

struct ProtocolConfig {
    bool allow_all = true;
    std::set<NodeId> allow_list; // consulted when !allow_all
    int max_retries = 1;
    MicroSec fsm_timeout_us = 10'000;
};

// Approach A access/handover component: constant-time allow-list check.
inline bool mesh_auth_check(const ProtocolConfig& cfg, NodeId ue) {
    return cfg.allow_all || cfg.allow_list.count(ue) > 0;
}

struct TimerOp {
    enum { Arm, Cancel } op;
    SessKey key;
    MicroSec deadline_us = 0;
};

struct Transition {
    NodeId node;
    FsmState before;
    FsmState after;
};

struct SessionNote {
    enum Kind { Allocated, UeActive, GnbActive, SessionFailed, SessionReleased } kind;
    SessKey key;
    NodeId node;
    NodeId local_ue = 0;
    Reason reason = Reason::None;
};

struct RelayInstall {
    NodeId node;
    MappingTableEntry entry;
};

struct StepResult {
    std::vector<ProtocolMessage> outgoing;
    std::vector<TimerOp> timers;
    std::vector<Transition> transitions;
    std::vector<SessionNote> notes;
    std::vector<RelayInstall> relay_installs;
    std::vector<std::pair<NodeId, SessKey>> relay_removals;
    bool violation = false;
    std::string violation_detail;
};

// Plane routing rule for a placement plus the approach's interface choice:
// approach B runs its P2P gNB-to-gNB hops over Uu, approaches A and C over Xn
// (F1 and core-side links are unaffected).
inline RouteConstraint route_constraint(const Topology& t, Approach a, Plane plane) {
    RouteConstraint c = constraint_for(t.placement(), plane);
    const Topology* tp = &t;
    // With the user plane anchored above the RAN, data rides the F1/NCore
    // hierarchy; direct gNB-gNB hops carry traffic only in the P2P placements.
    bool anchored_up = plane == Plane::Data &&
                       (t.placement().upf_at == NodeKind::CoreSite ||
                        t.placement().upf_at == NodeKind::AggregationSite);
    c.link_filter = [tp, a, anchored_up](const Link& l) {
        if (!tp->is_gnb_level(l.a) || !tp->is_gnb_level(l.b)) return true;
        if (l.kind == LinkKind::F1) return true;
        if (anchored_up) return false;
        return a == Approach::B ? l.kind == LinkKind::Uu : l.kind == LinkKind::Xn;
    };
    return c;
}

namespace detail {

// Canonical UE-to-UE data path: computed from the smaller UE id so both
// endpoints derive the same path, then oriented src -> dst.
inline std::optional<std::vector<NodeId>> session_data_path(
        const Topology& t, const RouteConstraint& c, NodeId src_ue, NodeId dst_ue,
        const Liveness* live) {
    NodeId lo = std::min(src_ue, dst_ue), hi = std::max(src_ue, dst_ue);
    auto p = constrained_path(t, lo, hi, c, Plane::Data, live);
    if (!p) return std::nullopt;
    std::vector<NodeId> hops = p->hops;
    if (src_ue != lo) std::reverse(hops.begin(), hops.end());
    return hops;
}

inline void transition(StepResult& r, NodeId node, FsmState& state, FsmState next) {
    r.transitions.push_back({node, state, next});
    state = next;
}

// Mapping entries for every RAN-level node along the path; index i of the
// on-path gNBs. path is UE-to-UE.
inline std::vector<RelayInstall> path_entries(const std::vector<NodeId>& path,
                                              SessionId sid, const QosProfile& qos,
                                              NodeId src_ue, NodeId dst_ue,
                                              NodeId src_gnb, NodeId dst_gnb) {
    std::vector<RelayInstall> out;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        MappingTableEntry e;
        e.session_id = sid;
        e.bearer_id = static_cast<std::uint16_t>(sid & 0xffff);
        e.qos = qos;
        e.next_hop = path[i + 1];
        if (path[i] == src_gnb) {
            e.local_ue = src_ue;
            e.peer_gnb = dst_gnb;
            e.peer_ue = dst_ue;
        } else if (path[i] == dst_gnb) {
            e.local_ue = dst_ue;
            e.peer_gnb = src_gnb;
            e.peer_ue = src_ue;
            e.next_hop = dst_ue;
        } else {
            e.local_ue = src_ue; // relay rows are oriented by the flow source
            e.peer_gnb = dst_gnb;
            e.peer_ue = dst_ue;
        }
        out.push_back({path[i], e});
    }
    // A node listed twice (anchored two-leg path) keeps its final next hop,
    // short-circuiting the loop so forwarding terminates.
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = out.size(); j-- > i + 1;)
            if (out[j].node == out[i].node) {
                out[i].entry.next_hop = out[j].entry.next_hop;
                out.erase(out.begin() + static_cast<std::ptrdiff_t>(j));
            }
    return out;
}

inline ProtocolMessage make_msg(NodeId src, NodeId dst, MicroSec now, MessageBody body) {
    return ProtocolMessage{{src, dst, static_cast<std::uint64_t>(now)}, std::move(body)};
}

} // namespace detail

class ProtocolEngine {
public:
    ProtocolEngine(const Topology& topo, Approach approach, ProtocolConfig cfg = {})
        : topo_(topo), approach_(approach), cfg_(cfg),
          data_c_(route_constraint(topo, approach, Plane::Data)) {}

    const ProtocolConfig& config() const { return cfg_; }
    Approach approach() const { return approach_; }

    // UE-side session initiation (workload injection).
    StepResult start_session(NodeRuntime& ue, const SessionRequest& req, MicroSec now,
                             const Liveness* live = nullptr) {
        StepResult r;
        NodeId gnb = topo_.serving_gnb(ue.id);
        SessionCtx ctx;
        ctx.key = SessKey{gnb, 0}; // sid not allocated yet
        ctx.role = Role::Ue;
        ctx.state = FsmState::Detached;
        ctx.request = req;
        ctx.local_ue = ue.id;
        ctx.peer_ue = req.destination_id;
        ctx.peer_gnb = gnb;
        detail::transition(r, ue.id, ctx.state, FsmState::Requested);
        ue.sessions[ctx.key] = ctx;
        if (approach_ == Approach::A)
            r.outgoing.push_back(detail::make_msg(ue.id, gnb, now, MeshAuthRequest{req}));
        else
            r.outgoing.push_back(detail::make_msg(ue.id, gnb, now, RrcSessionRequest{req}));
        return r;
    }

    StepResult handle_message(NodeRuntime& node, const ProtocolMessage& msg, MicroSec now,
                              const Liveness* live = nullptr) {
        StepResult r;
        std::visit([&](const auto& body) { dispatch(node, msg, body, now, live, r); },
                   msg.body);
        return r;
    }

    // Timer expiry for (node, key). Retry once from the current phase, then fail.
    StepResult handle_timer(NodeRuntime& node, const SessKey& key, MicroSec now,
                            const Liveness* live = nullptr) {
        StepResult r;
        SessionCtx* ctx = node.find(key);
        if (!ctx || ctx->state == FsmState::Active || ctx->state == FsmState::Failed)
            return r; // stale timer
        if (ctx->role == Role::SourceGnb && ctx->retries_left > 0) {
            ctx->retries_left -= 1;
            reissue(node, *ctx, now, r);
            r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
            return r;
        }
        fail_session(node, *ctx, Reason::Timeout, r);
        return r;
    }

    // Engine notification: an active/establishing session lost its path
    // (approach B/C semantics: fail, resources released).
    StepResult fail_on_path_loss(NodeRuntime& node, const SessKey& key, StepResult* out = nullptr) {
        StepResult local;
        StepResult& r = out ? *out : local;
        if (SessionCtx* ctx = node.find(key))
            if (ctx->state != FsmState::Failed)
                fail_session(node, *ctx, Reason::PathFailed, r);
        return local;
    }

    // Approach A dynamic network management: recompute the data path after a
    // topology change; reinstall mapping rows or fail when disconnected.
    StepResult reroute_session(NodeRuntime& node, const SessKey& key, MicroSec now,
                               const Liveness* live) {
        StepResult r;
        SessionCtx* ctx = node.find(key);
        if (!ctx || ctx->role != Role::SourceGnb || ctx->state != FsmState::Active)
            return r;
        auto path = detail::session_data_path(topo_, data_c_, ctx->local_ue, ctx->peer_ue, live);
        if (!path) {
            fail_session(node, *ctx, Reason::NoRoute, r);
            return r;
        }
        if (*path == ctx->data_path) return r;
        node.table.erase_session(key.sid, 0);
        // flush stale relay rows on the old path before installing the new one
        for (std::size_t i = 1; i + 1 < ctx->data_path.size(); ++i)
            if (ctx->data_path[i] != node.id)
                r.relay_removals.emplace_back(ctx->data_path[i], key);
        for (auto& inst : detail::path_entries(*path, key.sid, ctx->request.qos,
                                               ctx->local_ue, ctx->peer_ue,
                                               (*path)[1], (*path)[path->size() - 2])) {
            if (inst.node == node.id)
                node.table.upsert(inst.entry);
            else
                r.relay_installs.push_back(inst);
        }
        ctx->data_path = *path;
        return r;
    }

    // Mesh-layer dynamic management: broadcast a topology update to the
    // gNB-level neighbors that can still hear us.
    StepResult on_link_event(NodeRuntime& node, NodeId a, NodeId b, bool up, MicroSec now,
                             const Liveness* live) {
        StepResult r;
        for (NodeId n : topo_.neighbors(node.id, live)) {
            if (!topo_.is_gnb_level(n)) continue;
            MeshTopologyUpdate upd;
            upd.node_a = a;
            upd.node_b = b;
            upd.link_up = up ? 1 : 0;
            upd.origin_seq = node.next_update_seq++;
            r.outgoing.push_back(detail::make_msg(node.id, n, now, upd));
        }
        return r;
    }

    // Locally tear a session down and tell the peer gNB (tag 0x0E).
    StepResult release_session(NodeRuntime& node, const SessKey& key, MicroSec now) {
        StepResult r;
        SessionCtx* ctx = node.find(key);
        if (!ctx || ctx->role == Role::Ue) return r;
        r.outgoing.push_back(detail::make_msg(node.id, ctx->peer_gnb, now,
                                              SessionRelease{key.sid}));
        if (ctx->held_resources) node.ledger.release(ctx->held_resources);
        node.table.erase_session(key.sid, 0);
        for (std::size_t i = 1; i + 1 < ctx->data_path.size(); ++i)
            r.relay_removals.push_back({ctx->data_path[i], key});
        r.notes.push_back({SessionNote::SessionReleased, key, node.id, ctx->local_ue,
                           Reason::None});
        detail::transition(r, node.id, ctx->state,
                           approach_ == Approach::C ? FsmState::XnIdle : FsmState::Idle);
        node.sessions.erase(key);
        return r;
    }

private:
    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const RrcSessionRequest& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        // serving gNB, approach B or C
        begin_establishment(node, msg.hdr.src, m.req, now, live, r);
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const MeshAuthRequest& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        if (approach_ != Approach::A) {
            protocol_violation(node, msg, r);
            return;
        }
        if (!mesh_auth_check(cfg_, msg.hdr.src)) {
            r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now,
                                                  MeshAuthResponse{0, Reason::NotAllowed}));
            return;
        }
        r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now,
                                              MeshAuthResponse{1, Reason::None}));
        begin_establishment(node, msg.hdr.src, m.req, now, live, r);
    }

    // Common source-gNB entry point: resource check, session id allocation,
    // then the approach-specific first hop toward the target gNB.
    void begin_establishment(NodeRuntime& node, NodeId ue, const SessionRequest& req,
                             MicroSec now, const Liveness* live, StepResult& r) {
        SessionCtx ctx;
        ctx.role = Role::SourceGnb;
        ctx.state = approach_ == Approach::C ? FsmState::XnIdle : FsmState::Idle;
        ctx.request = req;
        ctx.local_ue = ue;
        ctx.peer_ue = req.destination_id;
        ctx.retries_left = cfg_.max_retries;

        if (!node.ledger.try_alloc(1)) {
            if (approach_ != Approach::A)
                r.outgoing.push_back(detail::make_msg(node.id, ue, now,
                                                      RrcSessionResponse{0, 0, Reason::NoResources}));
            SessKey key{node.id, node.next_sid++};
            ctx.key = key;
            detail::transition(r, node.id, ctx.state, FsmState::Failed);
            ctx.fail_reason = Reason::NoResources;
            node.sessions[key] = ctx;
            r.notes.push_back({SessionNote::SessionFailed, key, node.id, ue, Reason::NoResources});
            return;
        }
        ctx.held_resources = 1;

        SessKey key{node.id, node.next_sid++};
        ctx.key = key;
        r.notes.push_back({SessionNote::Allocated, key, node.id, ue, Reason::None});
        NodeId target = topo_.serving_gnb(req.destination_id);
        ctx.peer_gnb = target;
        if (target == node.id) {
            // both UEs on this gNB; P2P establishment toward a peer does not apply
            node.ledger.release(1);
            ctx.held_resources = 0;
            ctx.fail_reason = Reason::NoRoute;
            detail::transition(r, node.id, ctx.state, FsmState::Failed);
            node.sessions[key] = ctx;
            r.notes.push_back({SessionNote::SessionFailed, key, node.id, ue, Reason::NoRoute});
            return;
        }

        switch (approach_) {
            case Approach::B: {
                detail::transition(r, node.id, ctx.state, FsmState::ResourceChecked);
                r.outgoing.push_back(detail::make_msg(node.id, ue, now,
                                                      RrcSessionResponse{key.sid, 1, Reason::None}));
                r.outgoing.push_back(detail::make_msg(node.id, target, now,
                                                      GnbNotification{key.sid, req}));
                detail::transition(r, node.id, ctx.state, FsmState::AwaitTargetResponse);
                break;
            }
            case Approach::C: {
                if (node.xn_peers.count(target)) {
                    r.outgoing.push_back(detail::make_msg(
                        node.id, target, now,
                        XnConnectionRequest{ue, req.destination_id,
                                            {PduSessionDesc{key.sid, req.qos}}}));
                    detail::transition(r, node.id, ctx.state, FsmState::AwaitAck);
                } else {
                    r.outgoing.push_back(detail::make_msg(node.id, target, now, XnSetupRequest{}));
                    detail::transition(r, node.id, ctx.state, FsmState::XnSetup);
                }
                break;
            }
            case Approach::A: {
                detail::transition(r, node.id, ctx.state, FsmState::Authenticated);
                r.outgoing.push_back(detail::make_msg(node.id, target, now,
                                                      MeshScheduleRequest{key.sid, req}));
                break;
            }
        }
        node.sessions[key] = ctx;
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const RrcSessionResponse& m,
                  MicroSec now, const Liveness*, StepResult& r) {
        // UE side: learn the session id
        SessKey pending{msg.hdr.src, 0};
        auto it = node.sessions.find(pending);
        if (it == node.sessions.end()) {
            protocol_violation(node, msg, r);
            return;
        }
        SessionCtx ctx = it->second;
        node.sessions.erase(it);
        if (!m.accepted) {
            detail::transition(r, node.id, ctx.state, FsmState::Detached);
            return; // gNB rejected before allocating
        }
        ctx.key = SessKey{msg.hdr.src, m.sid};
        node.sessions[ctx.key] = ctx;
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const GnbNotification& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        if (approach_ != Approach::B) {
            protocol_violation(node, msg, r);
            return;
        }
        SessKey key{msg.hdr.src, m.sid};
        if (SessionCtx* dup = node.find(key)) {
            // retransmission: re-acknowledge, do not re-admit
            if (dup->state == FsmState::Configured || dup->state == FsmState::Active)
                r.outgoing.push_back(detail::make_msg(
                    node.id, msg.hdr.src, now,
                    GnbNotificationResponse{m.sid, 1, Reason::None}));
            else
                protocol_violation(node, msg, r);
            return;
        }
        SessionCtx ctx;
        ctx.key = key;
        ctx.role = Role::TargetGnb;
        ctx.state = FsmState::Idle;
        ctx.request = m.req;
        ctx.local_ue = m.req.destination_id;
        ctx.peer_ue = m.req.user_id;
        ctx.peer_gnb = msg.hdr.src;
        detail::transition(r, node.id, ctx.state, FsmState::Evaluating);

        if (!node.ledger.try_alloc(1)) {
            r.outgoing.push_back(detail::make_msg(
                node.id, msg.hdr.src, now,
                GnbNotificationResponse{m.sid, 0, Reason::NoResources}));
            detail::transition(r, node.id, ctx.state, FsmState::Idle);
            return; // no ctx kept for rejected requests
        }
        ctx.held_resources = 1;

        auto path = detail::session_data_path(topo_, data_c_, m.req.user_id, m.req.destination_id, live);
        if (!path) {
            node.ledger.release(1);
            r.outgoing.push_back(detail::make_msg(
                node.id, msg.hdr.src, now, GnbNotificationResponse{m.sid, 0, Reason::NoRoute}));
            detail::transition(r, node.id, ctx.state, FsmState::Idle);
            return;
        }
        ctx.data_path = *path;
        r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now,
                                              GnbNotificationResponse{m.sid, 1, Reason::None}));
        install_and_configure(node, ctx, now, r,
                              /*config_tag_is_rrc=*/false);
        detail::transition(r, node.id, ctx.state, FsmState::Configured);
        node.sessions[key] = ctx;
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg,
                  const GnbNotificationResponse& m, MicroSec now, const Liveness* live,
                  StepResult& r) {
        SessKey key{node.id, m.sid};
        SessionCtx* ctx = node.find(key);
        if (!ctx || ctx->state != FsmState::AwaitTargetResponse) {
            protocol_violation(node, msg, r);
            return;
        }
        r.timers.push_back({TimerOp::Cancel, key});
        if (!m.accept) {
            fail_session(node, *ctx, Reason::TargetRejected, r);
            return;
        }
        auto path = detail::session_data_path(topo_, data_c_, ctx->local_ue, ctx->peer_ue, live);
        if (!path) {
            fail_session(node, *ctx, Reason::NoRoute, r);
            return;
        }
        ctx->data_path = *path;
        detail::transition(r, node.id, ctx->state, FsmState::PathSetup);
        install_and_configure(node, *ctx, now, r, /*config_tag_is_rrc=*/false);
        detail::transition(r, node.id, ctx->state, FsmState::AwaitComplete);
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const XnSetupRequest&,
                  MicroSec now, const Liveness*, StepResult& r) {
        if (approach_ != Approach::C) {
            protocol_violation(node, msg, r);
            return;
        }
        // Setup after activation with this peer is out of order.
        for (auto& [k, s] : node.sessions)
            if (s.peer_gnb == msg.hdr.src && s.state == FsmState::Active &&
                s.role != Role::Ue) {
                protocol_violation(node, msg, r, &s);
                return;
            }
        node.xn_peers.insert(msg.hdr.src);
        r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now, XnSetupResponse{1}));
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const XnSetupResponse& m,
                  MicroSec now, const Liveness*, StepResult& r) {
        // find the session waiting on this handshake
        for (auto& [key, ctx] : node.sessions) {
            if (ctx.state != FsmState::XnSetup || ctx.peer_gnb != msg.hdr.src) continue;
            node.xn_peers.insert(msg.hdr.src);
            r.outgoing.push_back(detail::make_msg(
                node.id, msg.hdr.src, now,
                XnConnectionRequest{ctx.local_ue, ctx.peer_ue,
                                    {PduSessionDesc{key.sid, ctx.request.qos}}}));
            detail::transition(r, node.id, ctx.state, FsmState::AwaitAck);
            return;
        }
        protocol_violation(node, msg, r);
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const XnConnectionRequest& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        if (approach_ != Approach::C || m.requested.empty()) {
            protocol_violation(node, msg, r);
            return;
        }
        AdmissionResult adm = admission_control(node.ledger, m.requested);
        XnConnectionAck ack;
        ack.user_id = m.user_id;
        ack.requested = m.requested;
        for (auto& d : adm.admitted) ack.admitted.push_back(d.id);
        for (auto& d : adm.not_admitted) ack.not_admitted.push_back(d.id);
        r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now, std::move(ack)));
        if (adm.admitted.empty()) return;

        SessKey key{msg.hdr.src, adm.admitted.front().id};
        SessionCtx ctx;
        ctx.key = key;
        ctx.role = Role::TargetGnb;
        ctx.state = FsmState::XnIdle;
        ctx.request = SessionRequest{m.user_id, m.destination_id, adm.admitted.front().qos, 0};
        ctx.local_ue = m.destination_id;
        ctx.peer_ue = m.user_id;
        ctx.peer_gnb = msg.hdr.src;
        ctx.held_resources = static_cast<std::uint32_t>(adm.admitted.size());

        auto path = detail::session_data_path(topo_, data_c_, m.user_id, m.destination_id, live);
        if (!path) {
            node.ledger.release(ctx.held_resources);
            return;
        }
        ctx.data_path = *path;
        install_and_configure(node, ctx, now, r, /*config_tag_is_rrc=*/true);
        detail::transition(r, node.id, ctx.state, FsmState::Configured);
        node.sessions[key] = ctx;
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const XnConnectionAck& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        SessionCtx* ctx = nullptr;
        for (auto& [key, s] : node.sessions)
            if (s.state == FsmState::AwaitAck && s.peer_gnb == msg.hdr.src &&
                std::any_of(m.requested.begin(), m.requested.end(),
                            [&](const PduSessionDesc& d) { return d.id == key.sid; }))
                ctx = &s;
        if (!ctx) {
            protocol_violation(node, msg, r);
            return;
        }
        r.timers.push_back({TimerOp::Cancel, ctx->key});
        bool admitted = std::find(m.admitted.begin(), m.admitted.end(), ctx->key.sid) !=
                        m.admitted.end();
        if (!admitted) {
            fail_session(node, *ctx, Reason::TargetRejected, r);
            return;
        }
        auto path = detail::session_data_path(topo_, data_c_, ctx->local_ue, ctx->peer_ue, live);
        if (!path) {
            fail_session(node, *ctx, Reason::NoRoute, r);
            return;
        }
        ctx->data_path = *path;
        install_and_configure(node, *ctx, now, r, /*config_tag_is_rrc=*/true);
        detail::transition(r, node.id, ctx->state, FsmState::Configured);
        r.timers.push_back({TimerOp::Arm, ctx->key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const MeshScheduleRequest& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        if (approach_ != Approach::A) {
            protocol_violation(node, msg, r);
            return;
        }
        SessKey key{msg.hdr.src, m.sid};
        if (SessionCtx* dup = node.find(key)) {
            if (dup->state == FsmState::Scheduled || dup->state == FsmState::Active)
                r.outgoing.push_back(detail::make_msg(
                    node.id, msg.hdr.src, now,
                    MeshScheduleResponse{m.sid, 1, Reason::None}));
            else
                protocol_violation(node, msg, r);
            return;
        }
        SessionCtx ctx;
        ctx.key = key;
        ctx.role = Role::TargetGnb;
        ctx.state = FsmState::Idle;
        ctx.request = m.req;
        ctx.local_ue = m.req.destination_id;
        ctx.peer_ue = m.req.user_id;
        ctx.peer_gnb = msg.hdr.src;
        if (!node.ledger.try_alloc(1)) {
            r.outgoing.push_back(detail::make_msg(
                node.id, msg.hdr.src, now,
                MeshScheduleResponse{m.sid, 0, Reason::NoResources}));
            return;
        }
        ctx.held_resources = 1;
        auto path = detail::session_data_path(topo_, data_c_, m.req.user_id, m.req.destination_id, live);
        if (!path) {
            node.ledger.release(1);
            r.outgoing.push_back(detail::make_msg(
                node.id, msg.hdr.src, now, MeshScheduleResponse{m.sid, 0, Reason::NoRoute}));
            return;
        }
        ctx.data_path = *path;
        r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now,
                                              MeshScheduleResponse{m.sid, 1, Reason::None}));
        install_and_configure(node, ctx, now, r, /*config_tag_is_rrc=*/false);
        detail::transition(r, node.id, ctx.state, FsmState::Scheduled);
        node.sessions[key] = ctx;
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const MeshScheduleResponse& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        SessKey key{node.id, m.sid};
        SessionCtx* ctx = node.find(key);
        if (!ctx || ctx->state != FsmState::Authenticated) {
            protocol_violation(node, msg, r);
            return;
        }
        r.timers.push_back({TimerOp::Cancel, key});
        if (!m.accept) {
            fail_session(node, *ctx, Reason::TargetRejected, r);
            return;
        }
        auto path = detail::session_data_path(topo_, data_c_, ctx->local_ue, ctx->peer_ue, live);
        if (!path) {
            fail_session(node, *ctx, Reason::NoRoute, r);
            return;
        }
        ctx->data_path = *path;
        install_and_configure(node, *ctx, now, r, /*config_tag_is_rrc=*/false);
        detail::transition(r, node.id, ctx->state, FsmState::Scheduled);
        r.timers.push_back({TimerOp::Arm, key, now + cfg_.fsm_timeout_us});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const MeshAuthResponse& m,
                  MicroSec, const Liveness*, StepResult& r) {
        // UE side; nothing to do beyond noting a rejection
        if (!m.accept) {
            SessKey pending{msg.hdr.src, 0};
            auto it = node.sessions.find(pending);
            if (it != node.sessions.end()) {
                detail::transition(r, node.id, it->second.state, FsmState::Detached);
                node.sessions.erase(it);
            }
        }
    }

    template <typename ConfigMsg>
    void handle_ue_config(NodeRuntime& node, const ProtocolMessage& msg, const ConfigMsg& m,
                          MicroSec now, StepResult& r, bool rrc) {
        // UE receiving its path/session configuration; sessions are keyed by
        // the gNB whose counter allocated the sid, not the configuring gNB
        SessKey key{m.origin_gnb, m.sid};
        SessionCtx* ctx = node.find(key);
        if (!ctx) {
            // might be keyed as pending (source UE that saw no RrcSessionResponse
            // under approach A) or a fresh destination UE
            auto it = node.sessions.find(SessKey{msg.hdr.src, 0});
            if (it != node.sessions.end()) {
                SessionCtx moved = it->second;
                node.sessions.erase(it);
                moved.key = key;
                node.sessions[key] = moved;
                ctx = node.find(key);
            }
        }
        if (!ctx) {
            SessionCtx fresh;
            fresh.key = key;
            fresh.role = Role::Ue;
            fresh.state = FsmState::Detached;
            fresh.local_ue = node.id;
            fresh.peer_gnb = msg.hdr.src;
            node.sessions[key] = fresh;
            ctx = node.find(key);
        }
        if (ctx->state == FsmState::Active) {
            // retransmitted config: the completion was lost, send it again
            if (m.forwarding_path == ctx->data_path) {
                if (rrc)
                    r.outgoing.push_back(
                        detail::make_msg(node.id, msg.hdr.src, now, RrcComplete{m.sid}));
                else
                    r.outgoing.push_back(
                        detail::make_msg(node.id, msg.hdr.src, now, PathComplete{m.sid}));
            } else {
                protocol_violation(node, msg, r);
            }
            return;
        }
        ctx->data_path = m.forwarding_path;
        detail::transition(r, node.id, ctx->state, FsmState::Configured);
        if (rrc)
            r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now, RrcComplete{m.sid}));
        else
            r.outgoing.push_back(detail::make_msg(node.id, msg.hdr.src, now, PathComplete{m.sid}));
        detail::transition(r, node.id, ctx->state, FsmState::Active);
        r.notes.push_back({SessionNote::UeActive, key, node.id, node.id, Reason::None});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const PathConfiguration& m,
                  MicroSec now, const Liveness*, StepResult& r) {
        handle_ue_config(node, msg, m, now, r, false);
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const RrcSessionConfig& m,
                  MicroSec now, const Liveness*, StepResult& r) {
        handle_ue_config(node, msg, m, now, r, true);
    }

    void handle_complete(NodeRuntime& node, const ProtocolMessage& msg, SessionId sid,
                         StepResult& r) {
        // gNB receiving completion from its UE
        // sid alone can collide across allocating gNBs, so match only a ctx
        // that is actually awaiting this completion
        SessionCtx* ctx = nullptr;
        for (auto& [key, s] : node.sessions)
            if (key.sid == sid && s.role != Role::Ue && s.local_ue == msg.hdr.src &&
                (s.state == FsmState::AwaitComplete || s.state == FsmState::Configured ||
                 s.state == FsmState::Scheduled))
                ctx = &s;
        if (!ctx) {
            // duplicate completion after activation is benign
            for (auto& [key, s] : node.sessions)
                if (key.sid == sid && s.role != Role::Ue && s.local_ue == msg.hdr.src &&
                    s.state == FsmState::Active)
                    return;
            protocol_violation(node, msg, r);
            return;
        }
        r.timers.push_back({TimerOp::Cancel, ctx->key});
        detail::transition(r, node.id, ctx->state, FsmState::Active);
        r.notes.push_back({SessionNote::GnbActive, ctx->key, node.id, ctx->local_ue, Reason::None});
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const PathComplete& m,
                  MicroSec, const Liveness*, StepResult& r) {
        handle_complete(node, msg, m.sid, r);
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const RrcComplete& m,
                  MicroSec, const Liveness*, StepResult& r) {
        handle_complete(node, msg, m.sid, r);
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const SessionRelease& m,
                  MicroSec now, const Liveness*, StepResult& r) {
        for (auto it = node.sessions.begin(); it != node.sessions.end(); ++it) {
            if (it->first.sid != m.sid || it->second.role == Role::Ue) continue;
            SessionCtx& ctx = it->second;
            if (ctx.held_resources) node.ledger.release(ctx.held_resources);
            node.table.erase_session(m.sid, 0);
            for (std::size_t i = 1; i + 1 < ctx.data_path.size(); ++i)
                r.relay_removals.push_back({ctx.data_path[i], it->first});
            r.notes.push_back({SessionNote::SessionReleased, it->first, node.id,
                               ctx.local_ue, Reason::None});
            detail::transition(r, node.id, ctx.state,
                               approach_ == Approach::C ? FsmState::XnIdle : FsmState::Idle);
            node.sessions.erase(it);
            return;
        }
    }

    void dispatch(NodeRuntime& node, const ProtocolMessage& msg, const MeshTopologyUpdate& m,
                  MicroSec now, const Liveness* live, StepResult& r) {
        if (approach_ != Approach::A) return; // informational elsewhere
        // Dynamic network management: re-route local sessions.
        std::vector<SessKey> keys;
        for (auto& [key, s] : node.sessions)
            if (s.role == Role::SourceGnb && s.state == FsmState::Active)
                keys.push_back(key);
        for (auto& key : keys) {
            StepResult sub = reroute_session(node, key, now, live);
            r.outgoing.insert(r.outgoing.end(), sub.outgoing.begin(), sub.outgoing.end());
            r.transitions.insert(r.transitions.end(), sub.transitions.begin(),
                                 sub.transitions.end());
            r.notes.insert(r.notes.end(), sub.notes.begin(), sub.notes.end());
            r.relay_installs.insert(r.relay_installs.end(), sub.relay_installs.begin(),
                                    sub.relay_installs.end());
            r.relay_removals.insert(r.relay_removals.end(), sub.relay_removals.begin(),
                                    sub.relay_removals.end());
            r.timers.insert(r.timers.end(), sub.timers.begin(), sub.timers.end());
        }
    }

    // Install this gNB's mapping rows plus relay rows, and send the UE config.
    void install_and_configure(NodeRuntime& node, SessionCtx& ctx, MicroSec now,
                               StepResult& r, bool config_tag_is_rrc) {
        const std::vector<NodeId>& p = ctx.data_path;
        NodeId src_gnb = p[1];
        NodeId dst_gnb = p[p.size() - 2];
        NodeId flow_src = p.front(), flow_dst = p.back();
        for (auto& inst : detail::path_entries(p, ctx.key.sid, ctx.request.qos, flow_src,
                                               flow_dst, src_gnb, dst_gnb)) {
            if (inst.node == node.id)
                node.table.upsert(inst.entry);
            else
                r.relay_installs.push_back(inst);
        }
        BearerConfig bearer{static_cast<std::uint16_t>(ctx.key.sid & 0xffff), 1};
        std::uint16_t alloc = ctx.request.channel_quality; // index -> resource units
        if (config_tag_is_rrc)
            r.outgoing.push_back(detail::make_msg(
                node.id, ctx.local_ue, now,
                RrcSessionConfig{ctx.key.sid, ctx.key.src_gnb, bearer, p, alloc}));
        else
            r.outgoing.push_back(detail::make_msg(
                node.id, ctx.local_ue, now,
                PathConfiguration{ctx.key.sid, ctx.key.src_gnb, bearer, p, alloc}));
    }

    void fail_session(NodeRuntime& node, SessionCtx& ctx, Reason why, StepResult& r) {
        if (ctx.held_resources) {
            node.ledger.release(ctx.held_resources);
            ctx.held_resources = 0;
        }
        node.table.erase_session(ctx.key.sid, 0);
        for (std::size_t i = 1; i + 1 < ctx.data_path.size(); ++i)
            r.relay_removals.push_back({ctx.data_path[i], ctx.key});
        ctx.fail_reason = why;
        detail::transition(r, node.id, ctx.state, FsmState::Failed);
        r.timers.push_back({TimerOp::Cancel, ctx.key});
        r.notes.push_back({SessionNote::SessionFailed, ctx.key, node.id, ctx.local_ue, why});
    }

    // Re-send the message that advances the current waiting phase.
    void reissue(NodeRuntime& node, SessionCtx& ctx, MicroSec now, StepResult& r) {
        switch (ctx.state) {
            case FsmState::AwaitTargetResponse:
                r.outgoing.push_back(detail::make_msg(node.id, ctx.peer_gnb, now,
                                                      GnbNotification{ctx.key.sid, ctx.request}));
                break;
            case FsmState::XnSetup:
                r.outgoing.push_back(detail::make_msg(node.id, ctx.peer_gnb, now, XnSetupRequest{}));
                break;
            case FsmState::AwaitAck:
                r.outgoing.push_back(detail::make_msg(
                    node.id, ctx.peer_gnb, now,
                    XnConnectionRequest{ctx.local_ue, ctx.peer_ue,
                                        {PduSessionDesc{ctx.key.sid, ctx.request.qos}}}));
                break;
            case FsmState::Authenticated:
                r.outgoing.push_back(detail::make_msg(node.id, ctx.peer_gnb, now,
                                                      MeshScheduleRequest{ctx.key.sid, ctx.request}));
                break;
            case FsmState::AwaitComplete:
            case FsmState::Configured:
            case FsmState::Scheduled: {
                BearerConfig bearer{static_cast<std::uint16_t>(ctx.key.sid & 0xffff), 1};
                if (approach_ == Approach::C)
                    r.outgoing.push_back(detail::make_msg(
                        node.id, ctx.local_ue, now,
                        RrcSessionConfig{ctx.key.sid, ctx.key.src_gnb, bearer, ctx.data_path,
                                         ctx.request.channel_quality}));
                else
                    r.outgoing.push_back(detail::make_msg(
                        node.id, ctx.local_ue, now,
                        PathConfiguration{ctx.key.sid, ctx.key.src_gnb, bearer, ctx.data_path,
                                          ctx.request.channel_quality}));
                break;
            }
            default:
                break;
        }
    }

    void protocol_violation(NodeRuntime& node, const ProtocolMessage& msg, StepResult& r,
                            SessionCtx* ctx = nullptr) {
        r.violation = true;
        r.violation_detail = std::string("out-of-order ") + tag_name(tag_of(msg.body)) +
                             " at node " + std::to_string(node.id);
        if (ctx) fail_session(node, *ctx, Reason::ProtocolViolation, r);
    }

    const Topology& topo_;
    Approach approach_;
    ProtocolConfig cfg_;
    RouteConstraint data_c_;
};

} // namespace meshran
