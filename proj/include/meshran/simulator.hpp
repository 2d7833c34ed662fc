#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "meshran/protocol.hpp"
#include "meshran/rng.hpp"
#include "meshran/topology.hpp"
#include "meshran/wire.hpp"

namespace meshran {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    MicroSec proc_delay_ran_us = 50;
    MicroSec proc_delay_core_us = 200;
    std::uint64_t seed = 1;
    MicroSec horizon_us = 1'000'000;
    ProtocolConfig protocol;
};

// ---------------------------------------------------------------------------
// Workload

struct InjectSession {
    SessionRequest req;
};
struct InjectTraffic {
    std::size_t session_index = 0; // injection order of the InjectSession
    std::uint32_t count = 1;
    MicroSec interval_us = 1000;
    std::uint32_t size_bytes = 256;
};
struct FailLink {
    NodeId a = 0, b = 0;
};
struct FailNode {
    NodeId node = 0;
};
struct RecoverLink {
    NodeId a = 0, b = 0;
};
struct ReleaseSession {
    std::size_t session_index = 0;
};

using WorkloadAction =
    std::variant<InjectSession, InjectTraffic, FailLink, FailNode, RecoverLink,
                 ReleaseSession>;

struct WorkloadEvent {
    MicroSec at_us = 0;
    WorkloadAction action;
};

// ---------------------------------------------------------------------------
// Metrics

struct SessionStats {
    std::size_t index = 0;
    SessionId sid = 0;
    NodeId src_ue = 0, dst_ue = 0;
    MicroSec injected_at_us = 0;
    MicroSec established_at_us = -1; // both UEs Active
    bool failed = false;
    Reason fail_reason = Reason::None;
    std::uint64_t pkts_injected = 0;
    std::uint64_t pkts_delivered = 0;
    std::uint64_t pkts_dropped = 0;
    std::vector<MicroSec> latencies_us;

    bool established() const { return established_at_us >= 0; }
    MicroSec establishment_us() const {
        return established() ? established_at_us - injected_at_us : -1;
    }
};

struct Metrics {
    std::vector<SessionStats> sessions;
    std::uint64_t sig_msgs_ran = 0;  // signalling confined to RAN-level nodes
    std::uint64_t sig_msgs_agg = 0;  // traversed an aggregation site
    std::uint64_t sig_msgs_core = 0; // traversed the core site
    std::uint64_t sig_msgs_dropped = 0;
    std::uint64_t violations = 0;
    // per-message routed paths, for locality assertions
    std::vector<std::pair<MsgTag, std::vector<NodeId>>> signalling_paths;
    std::vector<std::pair<SessionId, std::vector<NodeId>>> data_paths_taken;
};

struct RunResult {
    Metrics metrics;
    std::string trace;
};

// ---------------------------------------------------------------------------
// Engine

class Engine {
public:
    Engine(const Topology& topo, Approach approach, SimConfig cfg)
        : topo_(topo),
          cfg_(cfg),
          approach_(approach),
          proto_(topo, approach, cfg.protocol),
          sig_c_(route_constraint(topo, approach, Plane::Signalling)) {
        for (auto& [id, kind] : topo_.nodes()) {
            NodeRuntime n;
            n.id = id;
            n.ledger.capacity_sessions = node_capacity(id);
            nodes_.emplace(id, std::move(n));
        }
    }

    void add_workload(const WorkloadEvent& ev) {
        validate_workload(ev);
        std::visit([&](const auto& a) { push(ev.at_us, EventBody{a}); }, ev.action);
    }

    void add_workload(const std::vector<WorkloadEvent>& evs) {
        for (auto& e : evs) add_workload(e);
    }

    // Optional inspection hook, invoked after every processed event.
    std::function<void(const Engine&)> post_event_hook;

    RunResult run() {
        while (!queue_.empty()) {
            QEvent ev = queue_.top();
            queue_.pop();
            if (ev.t > cfg_.horizon_us) break;
            now_ = ev.t;
            std::visit([&](auto& a) { process(ev.t, a); }, ev.what);
            if (post_event_hook) post_event_hook(*this);
        }
        finalize();
        RunResult r;
        r.metrics = metrics_;
        std::ostringstream os;
        for (auto& line : trace_) os << line << '\n';
        r.trace = os.str();
        return r;
    }

    // --- inspection (tests, acceptance) ---
    const std::map<NodeId, NodeRuntime>& nodes() const { return nodes_; }
    const Liveness& liveness() const { return live_; }
    const Metrics& metrics() const { return metrics_; }
    MicroSec now() const { return now_; }

    // Sum of per-session held resources must equal every ledger's allocation.
    bool ledger_consistent() const {
        for (auto& [id, n] : nodes_) {
            if (n.ledger.allocated > n.ledger.capacity_sessions) return false;
            std::uint32_t held = 0;
            for (auto& [k, s] : n.sessions)
                if (s.role != Role::Ue) held += s.held_resources;
            if (held != n.ledger.allocated) return false;
        }
        return true;
    }

private:
    // --- event queue ---
    struct MsgHop {
        ProtocolMessage msg;
        std::vector<NodeId> path;
        std::size_t idx; // arriving at path[idx]
    };
    struct PktSend {
        std::size_t session_index;
        std::uint32_t seq_no;
        std::uint32_t size_bytes;
    };
    struct PktHop {
        Packet pkt;
        std::vector<NodeId> trail; // nodes visited, for the trace
        NodeId at;
    };
    struct TimerFire {
        NodeId node;
        SessKey key;
        MicroSec deadline;
    };
    using EventBody = std::variant<InjectSession, InjectTraffic, FailLink, FailNode,
                                   RecoverLink, ReleaseSession, MsgHop, PktSend, PktHop,
                                   TimerFire>;

    struct QEvent {
        MicroSec t;
        std::uint64_t seq;
        EventBody what;
    };
    struct Later {
        bool operator()(const QEvent& x, const QEvent& y) const {
            return std::tie(x.t, x.seq) > std::tie(y.t, y.seq);
        }
    };

    void push(MicroSec t, EventBody body) {
        queue_.push(QEvent{t, seq_++, std::move(body)});
    }

    std::uint32_t node_capacity(NodeId id) const {
        // node capacity = sum of adjacent link session capacities
        std::uint32_t c = 0;
        for (const Link& l : topo_.links())
            if (l.a == id || l.b == id) c += l.capacity_sessions;
        return c;
    }

    void validate_workload(const WorkloadEvent& ev) {
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, InjectSession>) {
                    if (!topo_.has_node(a.req.user_id) || !topo_.has_node(a.req.destination_id))
                        throw ConfigError("session references unknown node");
                } else if constexpr (std::is_same_v<T, FailLink> ||
                                     std::is_same_v<T, RecoverLink>) {
                    if (!topo_.link_between(a.a, a.b))
                        throw ConfigError("failure references unknown link");
                } else if constexpr (std::is_same_v<T, FailNode>) {
                    if (!topo_.has_node(a.node))
                        throw ConfigError("failure references unknown node");
                }
            },
            ev.action);
    }

    MicroSec proc_delay(NodeId n) const {
        return topo_.kind(n) == NodeKind::CoreSite ? cfg_.proc_delay_core_us
                                                   : cfg_.proc_delay_ran_us;
    }

    static std::string path_str(const std::vector<NodeId>& p) {
        std::string s;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (i) s += '>';
            s += std::to_string(p[i]);
        }
        return s.empty() ? "-" : s;
    }

    void trace_line(MicroSec t, NodeId node, const std::string& before_after,
                    const std::string& tag, const std::string& path) {
        trace_.push_back(std::to_string(t) + " | " + std::to_string(node) + " | " +
                         before_after + " | " + tag + " | " + path);
    }

    // --- records ---
    struct Record {
        SessionStats stats;
        SessionRequest req;
        std::optional<SessKey> key;
        bool src_active = false, dst_active = false;
        bool released = false;
    };

    Record* record_for_key(const SessKey& k) {
        for (auto& r : records_)
            if (r.key && *r.key == k) return &r;
        return nullptr;
    }

    void bind_key(const SessionNote& n) {
        if (record_for_key(n.key)) return;
        for (auto& r : records_) {
            if (r.key) continue;
            if (r.req.user_id == n.local_ue || r.req.destination_id == n.local_ue) {
                r.key = n.key;
                r.stats.sid = n.key.sid;
                return;
            }
        }
    }

    // --- applying protocol step results ---
    void apply(NodeId at, const StepResult& res, const ProtocolMessage* cause) {
        std::string tag = cause ? tag_name(tag_of(cause->body)) : "-";
        for (auto& tr : res.transitions)
            trace_line(now_, tr.node,
                       std::string(to_string(tr.before)) + " -> " + to_string(tr.after),
                       tag, cause ? path_str(last_msg_path_) : "-");
        if (res.violation) {
            metrics_.violations += 1;
            trace_line(now_, at, "ProtocolViolation", tag, res.violation_detail);
        }
        for (auto& [node, key] : res.relay_removals)
            nodes_.at(node).table.erase_session(key.sid, 0);
        for (auto& inst : res.relay_installs)
            nodes_.at(inst.node).table.upsert(inst.entry);
        for (auto& op : res.timers) {
            auto tkey = std::make_pair(at, op.key);
            if (op.op == TimerOp::Arm) {
                armed_[tkey] = op.deadline_us;
                push(op.deadline_us, TimerFire{at, op.key, op.deadline_us});
            } else {
                armed_.erase(tkey);
            }
        }
        for (auto& note : res.notes) handle_note(note);
        for (auto& msg : res.outgoing) send_message(msg, at);
    }

    void handle_note(const SessionNote& n) {
        bind_key(n);
        Record* r = record_for_key(n.key);
        if (!r) {
            // UE-side keys carry the configuring gNB, which on the target
            // side differs from the allocating gNB; fall back to sid + node.
            for (auto& rec : records_)
                if (rec.key && rec.key->sid == n.key.sid &&
                    (rec.req.user_id == n.node || rec.req.destination_id == n.node)) {
                    r = &rec;
                    break;
                }
        }
        if (!r) return;
        switch (n.kind) {
            case SessionNote::Allocated:
                break;
            case SessionNote::UeActive:
                if (n.node == r->req.user_id) r->src_active = true;
                if (n.node == r->req.destination_id) r->dst_active = true;
                if (r->src_active && r->dst_active && !r->stats.established())
                    r->stats.established_at_us = now_;
                break;
            case SessionNote::GnbActive:
                break;
            case SessionNote::SessionFailed:
                r->stats.failed = true;
                r->stats.fail_reason = n.reason;
                r->src_active = r->dst_active = false;
                break;
            case SessionNote::SessionReleased:
                r->released = true;
                break;
        }
    }

    // --- signalling transport ---
    std::optional<std::vector<NodeId>> message_route(NodeId src, NodeId dst) {
        if (src == dst) return std::vector<NodeId>{src};
        bool ue_leg = topo_.kind(src) == NodeKind::UE || topo_.kind(dst) == NodeKind::UE;
        if (ue_leg) {
            if (!topo_.link_between(src, dst)) return std::nullopt;
            return std::vector<NodeId>{src, dst};
        }
        auto p = constrained_path(topo_, src, dst, sig_c_, Plane::Signalling, &live_);
        if (!p) return std::nullopt;
        return p->hops;
    }

    void send_message(ProtocolMessage msg, NodeId from) {
        msg.hdr.sent_at_us = static_cast<std::uint64_t>(now_);
        auto route = message_route(msg.hdr.src, msg.hdr.dst);
        if (!route || route->size() < 2) {
            metrics_.sig_msgs_dropped += 1;
            trace_line(now_, from, "-", tag_name(tag_of(msg.body)), "NoRoute");
            return;
        }
        classify_signalling(tag_of(msg.body), *route);
        // outgoing processing delay at the sender (RAN/core node work)
        MicroSec depart = now_ + (topo_.kind(from) == NodeKind::UE ? 0 : proc_delay(from));
        schedule_msg_hop(std::move(msg), *route, 0, depart);
    }

    void classify_signalling(MsgTag tag, const std::vector<NodeId>& route) {
        bool core = false, agg = false;
        for (NodeId n : route) {
            NodeKind k = topo_.kind(n);
            if (k == NodeKind::CoreSite) core = true;
            if (k == NodeKind::AggregationSite) agg = true;
        }
        if (core)
            metrics_.sig_msgs_core += 1;
        else if (agg)
            metrics_.sig_msgs_agg += 1;
        else
            metrics_.sig_msgs_ran += 1;
        metrics_.signalling_paths.emplace_back(tag, route);
    }

    // hop from route[idx] to route[idx+1], departing at `depart`
    void schedule_msg_hop(ProtocolMessage msg, std::vector<NodeId> route, std::size_t idx,
                          MicroSec depart) {
        auto li = topo_.link_between(route[idx], route[idx + 1]);
        const Link& l = topo_.links()[*li];
        if (!live_.link_ok(*li, l)) {
            trace_line(depart, route[idx], "-", tag_name(tag_of(msg.body)), "LinkDown");
            return;
        }
        if (l.loss_prob > 0.0 && link_rng(*li).bernoulli(l.loss_prob)) {
            trace_line(depart, route[idx], "-", tag_name(tag_of(msg.body)), "LinkLoss");
            return;
        }
        MicroSec arrive = depart + l.latency_us;
        push(arrive, MsgHop{std::move(msg), std::move(route), idx + 1});
    }

    CounterRng& link_rng(std::size_t link_idx) {
        auto it = link_rngs_.find(link_idx);
        if (it == link_rngs_.end())
            it = link_rngs_.emplace(link_idx, CounterRng(cfg_.seed, link_idx)).first;
        return it->second;
    }

    // --- event processing ---
    void process(MicroSec t, MsgHop& h) {
        NodeId here = h.path[h.idx];
        if (!live_.node_ok(here)) return; // node died while in flight
        if (h.idx + 1 < h.path.size()) {
            // relay: processing delay, then next hop
            schedule_msg_hop(std::move(h.msg), std::move(h.path), h.idx,
                             t + proc_delay(here));
            return;
        }
        last_msg_path_ = h.path;
        NodeRuntime& node = nodes_.at(here);
        bool is_update = std::holds_alternative<MeshTopologyUpdate>(h.msg.body);
        if (is_update && approach_ == Approach::A) {
            const auto& u = std::get<MeshTopologyUpdate>(h.msg.body);
            auto state = std::make_tuple(u.node_a, u.node_b, u.link_up != 0);
            auto& seen = seen_updates_[here];
            if (seen.insert(state).second) {
                seen.erase(std::make_tuple(u.node_a, u.node_b, u.link_up == 0));
                // re-flood so updates cross multi-hop meshes
                StepResult flood = proto_.on_link_event(node, u.node_a, u.node_b,
                                                        u.link_up != 0, t, &live_);
                apply(here, flood, nullptr);
            }
        }
        StepResult res = proto_.handle_message(node, h.msg, t, &live_);
        apply(here, res, &h.msg);
    }

    void process(MicroSec t, InjectSession& a) {
        Record rec;
        rec.req = a.req;
        rec.stats.index = records_.size();
        rec.stats.src_ue = a.req.user_id;
        rec.stats.dst_ue = a.req.destination_id;
        rec.stats.injected_at_us = t;
        records_.push_back(rec);
        NodeRuntime& ue = nodes_.at(a.req.user_id);
        StepResult res = proto_.start_session(ue, a.req, t, &live_);
        apply(a.req.user_id, res, nullptr);
    }

    void process(MicroSec t, InjectTraffic& a) {
        if (a.session_index >= records_.size())
            throw ConfigError("traffic references unknown session");
        for (std::uint32_t i = 0; i < a.count; ++i)
            push(t + static_cast<MicroSec>(i) * a.interval_us,
                 PktSend{a.session_index, i, a.size_bytes});
    }

    void process(MicroSec t, PktSend& a) {
        Record& rec = records_[a.session_index];
        rec.stats.pkts_injected += 1;
        if (!rec.key || rec.stats.failed || rec.released || !rec.src_active ||
            !rec.dst_active) {
            rec.stats.pkts_dropped += 1;
            trace_line(t, rec.req.user_id, "-", "pkt", to_string(DropReason::SessionNotActive));
            return;
        }
        Packet pkt;
        pkt.session_id = rec.key->sid;
        pkt.seq_no = a.seq_no;
        pkt.size_bytes = a.size_bytes;
        pkt.created_at_us = t;
        pkt.src_ue = rec.req.user_id;
        pkt.dst_ue = rec.req.destination_id;
        // UE uplink to its serving gNB
        NodeId gnb = topo_.serving_gnb(pkt.src_ue);
        forward_over_link(t, pkt, {pkt.src_ue}, pkt.src_ue, gnb, a.session_index);
    }

    void forward_over_link(MicroSec depart, const Packet& pkt, std::vector<NodeId> trail,
                           NodeId from, NodeId to, std::size_t rec_idx) {
        auto li = topo_.link_between(from, to);
        Record& rec = records_[rec_idx];
        if (!li || !live_.link_ok(*li, topo_.links()[*li])) {
            rec.stats.pkts_dropped += 1;
            trace_line(depart, from, "-", "pkt", to_string(DropReason::LinkDown));
            return;
        }
        const Link& l = topo_.links()[*li];
        if (l.loss_prob > 0.0 && link_rng(*li).bernoulli(l.loss_prob)) {
            rec.stats.pkts_dropped += 1;
            trace_line(depart, from, "-", "pkt", to_string(DropReason::LinkLoss));
            return;
        }
        trail.push_back(to);
        push(depart + l.latency_us, PktHop{pkt, std::move(trail), to});
    }

    std::size_t record_index_for_packet(const Packet& pkt) {
        for (std::size_t i = 0; i < records_.size(); ++i)
            if (records_[i].key && records_[i].key->sid == pkt.session_id &&
                records_[i].req.user_id == pkt.src_ue &&
                records_[i].req.destination_id == pkt.dst_ue)
                return i;
        throw ConfigError("packet without a session record");
    }

    void process(MicroSec t, PktHop& h) {
        std::size_t rec_idx = record_index_for_packet(h.pkt);
        Record& rec = records_[rec_idx];
        if (!live_.node_ok(h.at)) {
            rec.stats.pkts_dropped += 1;
            return;
        }
        if (h.at == h.pkt.dst_ue) {
            rec.stats.pkts_delivered += 1;
            rec.stats.latencies_us.push_back(t - h.pkt.created_at_us);
            metrics_.data_paths_taken.emplace_back(h.pkt.session_id, h.trail);
            trace_line(t, h.at, "delivered", "pkt", path_str(h.trail));
            return;
        }
        NodeRuntime& node = nodes_.at(h.at);
        bool active = true;
        for (auto& [k, s] : node.sessions)
            if (k.sid == h.pkt.session_id && s.role != Role::Ue &&
                ((s.local_ue == h.pkt.src_ue && s.peer_ue == h.pkt.dst_ue) ||
                 (s.local_ue == h.pkt.dst_ue && s.peer_ue == h.pkt.src_ue)))
                active = s.state == FsmState::Active;
        MicroSec ready = t + proc_delay(h.at);
        DtfResult r = dtf_forward(node.table, node.dtf, h.pkt, ready, active);
        if (std::holds_alternative<DropReason>(r)) {
            rec.stats.pkts_dropped += 1;
            trace_line(t, h.at, "-", "pkt", to_string(std::get<DropReason>(r)));
            return;
        }
        NodeId next = std::get<DtfForwardOk>(r).next_hop;
        forward_over_link(ready, h.pkt, std::move(h.trail), h.at, next, rec_idx);
    }

    void process(MicroSec t, TimerFire& a) {
        auto tkey = std::make_pair(a.node, a.key);
        auto it = armed_.find(tkey);
        if (it == armed_.end() || it->second != a.deadline) return; // canceled/re-armed
        armed_.erase(it);
        StepResult res = proto_.handle_timer(nodes_.at(a.node), a.key, t, &live_);
        apply(a.node, res, nullptr);
    }

    void fail_sessions_using(MicroSec t, std::optional<std::size_t> link_idx,
                             std::optional<NodeId> dead_node) {
        for (auto& [id, node] : nodes_) {
            std::vector<SessKey> hit;
            for (auto& [key, s] : node.sessions) {
                if (s.role == Role::Ue || s.state == FsmState::Failed) continue;
                const auto& p = s.data_path;
                bool uses = false;
                if (dead_node)
                    uses = std::find(p.begin(), p.end(), *dead_node) != p.end() ||
                           id == *dead_node;
                if (link_idx && !uses)
                    for (std::size_t i = 0; i + 1 < p.size(); ++i)
                        if (topo_.link_between(p[i], p[i + 1]) == link_idx) uses = true;
                if (uses) hit.push_back(key);
            }
            for (auto& key : hit) {
                StepResult res;
                proto_.fail_on_path_loss(node, key, &res);
                apply(id, res, nullptr);
            }
        }
    }

    void mesh_link_event(MicroSec t, const Link& l, bool up) {
        // adjacent gNB-level nodes detect immediately, flood and re-route
        for (NodeId n : {l.a, l.b}) {
            if (!live_.node_ok(n) || !topo_.is_gnb_level(n)) continue;
            NodeRuntime& node = nodes_.at(n);
            seen_updates_[n].insert(std::make_tuple(l.a, l.b, up));
            seen_updates_[n].erase(std::make_tuple(l.a, l.b, !up));
            StepResult flood = proto_.on_link_event(node, l.a, l.b, up, t, &live_);
            apply(n, flood, nullptr);
            std::vector<SessKey> keys;
            for (auto& [key, s] : node.sessions)
                if (s.role == Role::SourceGnb && s.state == FsmState::Active)
                    keys.push_back(key);
            for (auto& key : keys) {
                StepResult res = proto_.reroute_session(node, key, t, &live_);
                apply(n, res, nullptr);
            }
        }
    }

    void process(MicroSec t, FailLink& a) {
        auto li = topo_.link_between(a.a, a.b);
        live_.dead_links.insert(*li);
        trace_line(t, a.a, "FailLink", "-", path_str({a.a, a.b}));
        if (approach_ == Approach::A)
            mesh_link_event(t, topo_.links()[*li], false);
        else
            fail_sessions_using(t, li, std::nullopt);
    }

    void process(MicroSec t, RecoverLink& a) {
        auto li = topo_.link_between(a.a, a.b);
        live_.dead_links.erase(*li);
        trace_line(t, a.a, "RecoverLink", "-", path_str({a.a, a.b}));
        if (approach_ == Approach::A) mesh_link_event(t, topo_.links()[*li], true);
    }

    void process(MicroSec t, FailNode& a) {
        live_.dead_nodes.insert(a.node);
        trace_line(t, a.node, "FailNode", "-", "-");
        if (approach_ == Approach::A) {
            for (std::size_t i = 0; i < topo_.links().size(); ++i) {
                const Link& l = topo_.links()[i];
                if (l.a == a.node || l.b == a.node) mesh_link_event(t, l, false);
            }
        } else {
            fail_sessions_using(t, std::nullopt, a.node);
        }
    }

    void process(MicroSec t, ReleaseSession& a) {
        if (a.session_index >= records_.size())
            throw ConfigError("release references unknown session");
        Record& rec = records_[a.session_index];
        if (!rec.key) return;
        NodeId src_gnb = rec.key->src_gnb;
        StepResult res = proto_.release_session(nodes_.at(src_gnb), *rec.key, t);
        apply(src_gnb, res, nullptr);
        rec.released = true;
    }

    void finalize() {
        for (auto& r : records_) metrics_.sessions.push_back(r.stats);
    }

    const Topology& topo_;
    SimConfig cfg_;
    Approach approach_;
    ProtocolEngine proto_;
    RouteConstraint sig_c_;
    Liveness live_;
    std::map<NodeId, NodeRuntime> nodes_;
    std::priority_queue<QEvent, std::vector<QEvent>, Later> queue_;
    std::uint64_t seq_ = 0;
    MicroSec now_ = 0;
    Metrics metrics_;
    std::vector<std::string> trace_;
    std::vector<Record> records_;
    std::map<std::pair<NodeId, SessKey>, MicroSec> armed_;
    std::map<std::size_t, CounterRng> link_rngs_;
    std::map<NodeId, std::set<std::tuple<NodeId, NodeId, bool>>> seen_updates_;
    std::vector<NodeId> last_msg_path_;
};

// ---------------------------------------------------------------------------
// Redundant-path reliability

struct ReliabilityEstimate {
    double analytic = 0.0;
    double monte_carlo = 0.0;
    double mc_sigma = 0.0;
    std::size_t paths_used = 0;
};

// End-to-end success over up to k link-disjoint paths:
//   success = 1 - prod_i (1 - prod_{links in path_i} (1 - loss)).
// Cross-validated by a seeded Monte Carlo drawing every link independently.
inline ReliabilityEstimate reliability_estimate(const Topology& t, NodeId src, NodeId dst,
                                                unsigned k, std::uint64_t seed = 1,
                                                std::size_t trials = 100'000) {
    ReliabilityEstimate out;
    std::vector<Path> paths = k_disjoint_paths(t, src, dst, k);
    out.paths_used = paths.size();
    if (paths.empty()) return out;

    double all_fail = 1.0;
    for (const Path& p : paths) {
        double ok = 1.0;
        for (std::size_t i = 0; i + 1 < p.hops.size(); ++i) {
            auto li = t.link_between(p.hops[i], p.hops[i + 1]);
            ok *= 1.0 - t.links()[*li].loss_prob;
        }
        all_fail *= 1.0 - ok;
    }
    out.analytic = 1.0 - all_fail;

    CounterRng rng(seed, 0xC0FFEE);
    std::size_t good = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        // sample each link once per trial
        std::map<std::size_t, bool> alive;
        auto link_alive = [&](std::size_t idx) {
            auto it = alive.find(idx);
            if (it == alive.end())
                it = alive.emplace(idx, !rng.bernoulli(t.links()[idx].loss_prob)).first;
            return it->second;
        };
        for (const Path& p : paths) {
            bool ok = true;
            for (std::size_t i = 0; ok && i + 1 < p.hops.size(); ++i)
                ok = link_alive(*t.link_between(p.hops[i], p.hops[i + 1]));
            if (ok) {
                ++good;
                break;
            }
        }
    }
    out.monte_carlo = static_cast<double>(good) / static_cast<double>(trials);
    double p = out.analytic;
    out.mc_sigma = std::sqrt(std::max(p * (1.0 - p), 1e-12) /
                             static_cast<double>(trials));
    return out;
}

} // namespace meshran
