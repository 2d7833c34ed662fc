// Acceptance gate: one line per criterion, nonzero exit if any fails.
// Usage: acceptance <scenarios-dir>

#include <chrono>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "meshran/experiment.hpp"
#include "meshran/scenario.hpp"
#include "meshran/simulator.hpp"

using namespace meshran;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_dir;
int g_failures = 0;

void report(int n, bool ok, const std::string& detail) {
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL");
    if (!ok) {
        std::cout << " (" << detail << ")";
        ++g_failures;
    }
    std::cout << std::endl;
}

#define EXPECT(cond, msg)                        \
    do {                                         \
        if (!(cond)) {                           \
            if (ok) detail = msg;                \
            ok = false;                          \
        }                                        \
    } while (0)

LinkKind mesh_kind_for(Approach a) {
    return a == Approach::B ? LinkKind::Uu : LinkKind::Xn;
}

MicroSec cell_p50(const CellResult& c) {
    std::vector<MicroSec> lat;
    for (const SessionStats& s : c.metrics.sessions)
        lat.insert(lat.end(), s.latencies_us.begin(), s.latencies_us.end());
    return percentile_us(lat, 0.50);
}

const CellResult* find_cell(const ComparisonReport& rep, Variant v) {
    for (const CellResult& c : rep.cells)
        if (c.cell.variant == v) return &c;
    return nullptr;
}

// Reference reachability: plain BFS over the approach's gNB-level mesh links,
// honoring dead links and nodes. Used to judge self-healing decisions.
bool gnb_reachable(const Topology& t, const Liveness& live, Approach a, NodeId from,
                   NodeId to) {
    if (!live.node_ok(from) || !live.node_ok(to)) return false;
    std::set<NodeId> seen{from};
    std::vector<NodeId> frontier{from};
    while (!frontier.empty()) {
        NodeId n = frontier.back();
        frontier.pop_back();
        if (n == to) return true;
        for (std::size_t i = 0; i < t.links().size(); ++i) {
            const Link& l = t.links()[i];
            if (l.kind != mesh_kind_for(a)) continue;
            if (!t.is_gnb_level(l.a) || !t.is_gnb_level(l.b)) continue;
            if (!live.link_ok(i, l)) continue;
            NodeId other = l.a == n ? l.b : (l.b == n ? l.a : 0);
            if (other && seen.insert(other).second) frontier.push_back(other);
        }
    }
    return false;
}

// --- criterion 1: the three-band comparison reproduces and runs quickly ----
void criterion_1() {
    bool ok = true;
    std::string detail;
    auto t0 = Clock::now();
    Scenario sc = load_scenario(g_dir + "/fig1_compare.scn");
    ComparisonReport rep = run_cells(sc, sc.seed);
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();

    const CellResult* central = find_cell(rep, Variant::EmbbCentral);
    const CellResult* agg = find_cell(rep, Variant::AggUpf);
    const CellResult* mesh = find_cell(rep, Variant::MeshUrllc);
    EXPECT(central && agg && mesh, "missing cells");
    if (ok) {
        EXPECT(cell_p50(*central) == 20000, "central band != 20000us");
        EXPECT(cell_p50(*agg) == 5800, "aggregation band != 5800us");
        EXPECT(cell_p50(*mesh) == 900, "direct band != 900us");
        EXPECT(cell_p50(*central) > cell_p50(*agg) && cell_p50(*agg) > cell_p50(*mesh),
               "band ordering broken");
        for (const CellResult* c : {central, agg, mesh}) {
            for (const SessionStats& s : c->metrics.sessions) {
                EXPECT(s.established(), "session not established");
                EXPECT(s.pkts_dropped == 0 && s.pkts_delivered == s.pkts_injected,
                       "lossy delivery on a loss-free scenario");
            }
        }
        EXPECT(mesh->metrics.sig_msgs_core == 0, "mesh cell touched the core");
        EXPECT(central->metrics.sig_msgs_core > 0, "central cell avoided the core");
    }
    EXPECT(secs < 5.0, "comparison took " + std::to_string(secs) + "s");
    report(1, ok, detail);
}

// --- criterion 2: signalling locality per placement ------------------------
void criterion_2() {
    bool ok = true;
    std::string detail;
    CounterRng rng(1001, 0);

    // coreless placements on random meshes never touch aggregation or core
    for (int trial = 0; trial < 100 && ok; ++trial) {
        Variant v = trial % 2 ? Variant::IabCoreInDu : Variant::IabP2p;
        Approach a = static_cast<Approach>(trial % 3);
        auto mesh = testing::random_mesh(rng, v, 2 + rng.below(5), mesh_kind_for(a),
                                         0.0, true);
        Topology t = build_topology(mesh.spec);
        SimConfig cfg;
        cfg.seed = 1 + trial;
        cfg.protocol.fsm_timeout_us = 100'000;
        Engine e(t, a, cfg);
        e.add_workload({0, InjectSession{testing::make_request(1, 2)}});
        e.add_workload({500'000, InjectTraffic{0, 3, 1000, 64}});
        RunResult r = e.run();
        EXPECT(r.metrics.sessions[0].established(), "coreless session failed");
        EXPECT(r.metrics.sig_msgs_core == 0 && r.metrics.sig_msgs_agg == 0,
               "coreless signalling left the RAN");
        for (auto& [tag, route] : r.metrics.signalling_paths)
            for (NodeId n : route)
                EXPECT(t.kind(n) != NodeKind::CoreSite &&
                           t.kind(n) != NodeKind::AggregationSite,
                       "coreless signalling routed through an upper site");
        for (auto& [sid, trail] : r.metrics.data_paths_taken)
            for (NodeId n : trail)
                EXPECT(t.kind(n) != NodeKind::CoreSite &&
                           t.kind(n) != NodeKind::AggregationSite,
                       "coreless data path climbed the hierarchy");
    }

    // MESH_URLLC: control plane anchors at aggregation, data stays in the RAN
    for (int trial = 0; trial < 40 && ok; ++trial) {
        auto mesh = testing::random_mesh(rng, Variant::MeshUrllc, 2 + rng.below(4),
                                         LinkKind::Xn, 0.0, true);
        Topology t = build_topology(mesh.spec);
        SimConfig cfg;
        cfg.seed = 2000 + trial;
        cfg.protocol.fsm_timeout_us = 100'000;
        Engine e(t, Approach::A, cfg);
        e.add_workload({0, InjectSession{testing::make_request(1, 2)}});
        e.add_workload({500'000, InjectTraffic{0, 3, 1000, 64}});
        RunResult r = e.run();
        EXPECT(r.metrics.sessions[0].established(), "urllc session failed");
        for (auto& [tag, route] : r.metrics.signalling_paths) {
            bool agg = false;
            for (NodeId n : route) {
                EXPECT(t.kind(n) != NodeKind::CoreSite, "urllc signalling hit the core");
                if (t.kind(n) == NodeKind::AggregationSite) agg = true;
            }
            bool gnb_to_gnb = t.is_gnb_level(route.front()) && t.is_gnb_level(route.back());
            if (gnb_to_gnb)
                EXPECT(agg, "gNB-to-gNB control message skipped the aggregation anchor");
        }
        for (auto& [sid, trail] : r.metrics.data_paths_taken)
            for (NodeId n : trail)
                EXPECT(t.kind(n) != NodeKind::CoreSite &&
                           t.kind(n) != NodeKind::AggregationSite,
                       "urllc data path climbed the hierarchy");
    }

    // IAB scenario: only the centralized variant generates core signalling
    Scenario sc = load_scenario(g_dir + "/iab_variants.scn");
    ComparisonReport rep = run_cells(sc, sc.seed);
    for (const CellResult& c : rep.cells) {
        if (c.cell.variant == Variant::IabCentral)
            EXPECT(c.metrics.sig_msgs_core > 0, "centralized IAB avoided the core");
        else
            EXPECT(c.metrics.sig_msgs_core == 0, "coreless IAB variant touched the core");
    }
    report(2, ok, detail);
}

// --- criterion 3: randomized interleavings keep the protocols sound --------
void criterion_3() {
    bool ok = true;
    std::string detail;
    CounterRng rng(3003, 0);
    for (int run = 0; run < 1200 && ok; ++run) {
        Approach a = static_cast<Approach>(run % 3);
        auto mesh = testing::random_mesh(rng, Variant::IabP2p, 2 + rng.below(5),
                                         mesh_kind_for(a));
        Topology t = build_topology(mesh.spec);
        SimConfig cfg;
        cfg.seed = 1 + run;
        cfg.proc_delay_ran_us = 10 + static_cast<MicroSec>(rng.below(90));
        cfg.protocol.fsm_timeout_us = 200'000;
        Engine e(t, a, cfg);
        e.add_workload({0, InjectSession{testing::make_request(1, 2)}});
        bool ledgers_ok = true;
        e.post_event_hook = [&](const Engine& eng) {
            ledgers_ok = ledgers_ok && eng.ledger_consistent();
        };
        RunResult r = e.run();
        const SessionStats& s = r.metrics.sessions[0];
        EXPECT(s.established() && !s.failed, "loss-free session did not establish");
        EXPECT(r.metrics.violations == 0, "protocol violation recorded");
        EXPECT(ledgers_ok, "ledger inconsistent mid-run");
        // the serving gNB must hold a mapping entry oriented to the peer UE
        const MappingTable& table = e.nodes().at(mesh.gnb1).table;
        EXPECT(table.route(s.sid, 1, 2) != nullptr, "mapping entry missing at source gNB");
    }
    report(3, ok, detail);
}

// --- criterion 4: admission never oversubscribes; acks partition -----------
void criterion_4() {
    bool ok = true;
    std::string detail;
    CounterRng rng(4004, 0);

    for (int trial = 0; trial < 2000 && ok; ++trial) {
        ResourceLedger l{static_cast<std::uint32_t>(rng.below(6)),
                         static_cast<std::uint32_t>(0)};
        l.allocated = static_cast<std::uint32_t>(rng.below(l.capacity_sessions + 1));
        std::uint32_t before = l.allocated;
        auto req = testing::random_descs(rng, 8);
        AdmissionResult r = admission_control(l, req);
        EXPECT(l.allocated <= l.capacity_sessions, "ledger oversubscribed");
        EXPECT(r.admitted.size() + r.not_admitted.size() == req.size(),
               "admission lost a request");
        EXPECT(l.allocated == before + r.admitted.size(), "ledger out of step");
    }

    // drive a gNB with XnConnectionRequests and check every emitted ack
    TopologySpec sp;
    sp.variant = Variant::IabP2p;
    sp.nodes = {{1, NodeKind::UE},
                {2, NodeKind::UE},
                {10, NodeKind::AccessNode},
                {11, NodeKind::AccessNode}};
    sp.links = {{1, 10, 300, 0, 8, LinkKind::Uu},
                {2, 11, 300, 0, 8, LinkKind::Uu},
                {10, 11, 200, 0, 8, LinkKind::Xn}};
    Topology t = build_topology(sp);
    ProtocolEngine proto(t, Approach::C, {});
    NodeRuntime gnb;
    gnb.id = 11;
    gnb.ledger.capacity_sessions = 3;
    gnb.xn_peers.insert(10);
    for (int trial = 0; trial < 200 && ok; ++trial) {
        ProtocolMessage m;
        m.hdr.src = 10;
        m.hdr.dst = 11;
        m.hdr.sent_at_us = trial;
        XnConnectionRequest xr;
        xr.user_id = 1;
        xr.destination_id = 2;
        xr.requested = testing::random_descs(rng, 6);
        m.body = xr;
        StepResult res = proto.handle_message(gnb, m, trial, nullptr);
        EXPECT(gnb.ledger.allocated <= gnb.ledger.capacity_sessions,
               "gNB ledger oversubscribed");
        for (const ProtocolMessage& out : res.outgoing) {
            const auto* ack = std::get_if<XnConnectionAck>(&out.body);
            if (!ack) continue;
            std::set<std::uint32_t> want, got;
            for (auto& d : ack->requested) want.insert(d.id);
            for (auto id : ack->admitted) EXPECT(got.insert(id).second, "duplicate id");
            for (auto id : ack->not_admitted)
                EXPECT(got.insert(id).second, "id in both partitions");
            EXPECT(want == got, "ack does not partition the request");
        }
        // free what this round admitted so later rounds vary
        for (auto it = gnb.sessions.begin(); it != gnb.sessions.end();) {
            gnb.ledger.release(it->second.held_resources);
            it = gnb.sessions.erase(it);
        }
        gnb.table = MappingTable{};
    }
    report(4, ok, detail);
}

// --- criterion 5: self-healing matches a reachability oracle ---------------
void criterion_5() {
    bool ok = true;
    std::string detail;
    CounterRng rng(5005, 0);
    int rerouted = 0, severed = 0;
    for (int trial = 0; trial < 150 && ok; ++trial) {
        Approach a = static_cast<Approach>(trial % 3);
        auto mesh = testing::random_mesh(rng, Variant::IabP2p, 3 + rng.below(4),
                                         mesh_kind_for(a));
        Topology t = build_topology(mesh.spec);

        // pick the failure: a random mesh link, or a random bystander gNB
        std::vector<std::size_t> mesh_links;
        for (std::size_t i = 0; i < t.links().size(); ++i) {
            const Link& l = t.links()[i];
            if (l.kind == mesh_kind_for(a) && t.is_gnb_level(l.a) && t.is_gnb_level(l.b))
                mesh_links.push_back(i);
        }
        std::vector<NodeId> bystanders;
        for (auto& [id, kind] : t.nodes())
            if (t.is_gnb_level(id) && id != mesh.gnb1 && id != mesh.gnb2)
                bystanders.push_back(id);
        bool fail_node = trial % 2 == 1 && !bystanders.empty();

        Liveness after;
        WorkloadEvent failure{100'000, FailLink{}};
        if (fail_node) {
            NodeId victim = bystanders[rng.below(bystanders.size())];
            failure.action = FailNode{victim};
            after.dead_nodes.insert(victim);
        } else {
            const Link& l = t.links()[mesh_links[rng.below(mesh_links.size())]];
            failure.action = FailLink{l.a, l.b};
            after.dead_links.insert(*t.link_between(l.a, l.b));
        }
        bool connected = gnb_reachable(t, after, a, mesh.gnb1, mesh.gnb2);

        SimConfig cfg;
        cfg.seed = 10 + trial;
        cfg.protocol.fsm_timeout_us = 100'000;
        Engine e(t, a, cfg);
        e.add_workload({0, InjectSession{testing::make_request(1, 2)}});
        e.add_workload(failure);
        if (a == Approach::A) {
            // the mesh layer must keep the established session alive iff a
            // route still exists
            e.add_workload({400'000, InjectTraffic{0, 5, 1000, 64}});
            RunResult r = e.run();
            const SessionStats& s = r.metrics.sessions[0];
            EXPECT(s.established(), "session never established before the failure");
            if (connected) {
                EXPECT(s.pkts_delivered == 5,
                       "reachable pair lost packets after self-healing");
                ++rerouted;
            } else {
                EXPECT(s.pkts_delivered == 0, "unreachable pair still delivered");
                ++severed;
            }
        } else {
            // P2P approaches re-establish: a fresh session succeeds iff the
            // oracle says the gNBs can still reach each other
            e.add_workload({400'000, InjectSession{testing::make_request(1, 2)}});
            RunResult r = e.run();
            EXPECT(r.metrics.sessions[0].established(),
                   "session never established before the failure");
            EXPECT(r.metrics.sessions[1].established() == connected,
                   connected ? "re-establishment failed despite a live route"
                             : "re-establishment succeeded without a route");
            (connected ? rerouted : severed) += 1;
        }
    }
    EXPECT(rerouted > 10 && severed > 10, "failure mix did not cover both outcomes: " + std::to_string(rerouted) + "/" + std::to_string(severed));
    report(5, ok, detail);
}

// --- criterion 6: analytic reliability matches Monte Carlo -----------------
void criterion_6() {
    bool ok = true;
    std::string detail;
    auto t0 = Clock::now();
    CounterRng rng(6006, 0);
    for (int trial = 0; trial < 25 && ok; ++trial) {
        double loss = 0.01 + 0.01 * static_cast<double>(rng.below(10));
        auto mesh = testing::random_mesh(rng, Variant::IabP2p, 3 + rng.below(4),
                                         LinkKind::Xn, loss);
        Topology t = build_topology(mesh.spec);
        auto est = reliability_estimate(t, mesh.gnb1, mesh.gnb2, 3, 1 + trial);
        EXPECT(est.paths_used >= 1, "no path found");
        EXPECT(est.analytic > 0.0 && est.analytic <= 1.0, "analytic out of range");
        double delta = est.monte_carlo - est.analytic;
        EXPECT(delta < 3 * est.mc_sigma + 1e-9 && -delta < 3 * est.mc_sigma + 1e-9,
               "Monte Carlo disagrees beyond 3 sigma");
        // more redundancy never hurts
        auto single = reliability_estimate(t, mesh.gnb1, mesh.gnb2, 1, 1 + trial, 1000);
        EXPECT(est.analytic >= single.analytic - 1e-12, "extra path reduced reliability");
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    EXPECT(secs < 60.0, "reliability check took " + std::to_string(secs) + "s");
    report(6, ok, detail);
}

// --- criterion 7: codec round-trips and survives fuzzing -------------------
void criterion_7() {
    bool ok = true;
    std::string detail;
    CounterRng rng(7007, 0);
    for (int i = 0; i < 100'000 && ok; ++i) {
        ProtocolMessage m = testing::random_message(rng);
        auto bytes = encode(m);
        DecodeResult d = decode(bytes);
        EXPECT(std::holds_alternative<ProtocolMessage>(d), "valid message rejected");
        if (ok) EXPECT(encode(std::get<ProtocolMessage>(d)) == bytes, "re-encode differs");
    }
    std::uint64_t accepted = 0;
    for (int i = 0; i < 1'000'000 && ok; ++i) {
        std::vector<std::uint8_t> buf(rng.below(48));
        for (auto& b : buf) b = static_cast<std::uint8_t>(rng.below(256));
        if (i % 2 == 0 && buf.size() >= 3) {
            buf[0] = 0x4D; // bias half toward a valid preamble
            buf[1] = 0x45;
            buf[2] = 0x01;
        }
        DecodeResult d = decode(buf);
        if (auto* m = std::get_if<ProtocolMessage>(&d)) {
            ++accepted;
            EXPECT(encode(*m) == buf, "fuzz decode not canonical");
        }
    }
    (void)accepted; // almost always zero; crashing or misdecoding is the failure
    report(7, ok, detail);
}

// --- criterion 8: byte-identical reruns ------------------------------------
void criterion_8() {
    bool ok = true;
    std::string detail;
    for (const char* f : {"fig1_compare", "iab_variants", "failure_selfheal",
                          "reliability_kpaths"}) {
        Scenario sc = load_scenario(g_dir + "/" + f + ".scn");
        ComparisonReport a = run_cells(sc, sc.seed);
        ComparisonReport b = run_cells(sc, sc.seed);
        EXPECT(metrics_csv(a) == metrics_csv(b),
               std::string(f) + ": metrics differ across reruns");
        EXPECT(report_table(a) == report_table(b),
               std::string(f) + ": report differs across reruns");
        for (std::size_t i = 0; i < a.cells.size(); ++i)
            EXPECT(a.cells[i].trace == b.cells[i].trace,
                   std::string(f) + ": trace differs across reruns");
    }
    report(8, ok, detail);
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <scenarios-dir>\n";
        return 2;
    }
    g_dir = argv[1];
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    return g_failures == 0 ? 0 : 1;
}
