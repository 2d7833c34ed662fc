#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "meshran/simulator.hpp"

namespace meshran {

// Scenario files are plain text with [section] headers. Grammar in
// docs/scenario-format.md.

struct Cell {
    Variant variant = Variant::EmbbCentral;
    Approach approach = Approach::C;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    MicroSec horizon_us = 1'000'000;
    MicroSec proc_delay_ran_us = 50;
    MicroSec proc_delay_core_us = 200;
    MicroSec fsm_timeout_us = 10'000;
    std::vector<Cell> cells;
    std::vector<std::pair<NodeId, NodeKind>> nodes;
    std::vector<Link> links;
    std::vector<WorkloadEvent> workload;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline NodeKind node_kind_from(const std::string& s, int lineno) {
    if (s == "UE") return NodeKind::UE;
    if (s == "AccessNode") return NodeKind::AccessNode;
    if (s == "DonorNode") return NodeKind::DonorNode;
    if (s == "AggregationSite") return NodeKind::AggregationSite;
    if (s == "CoreSite") return NodeKind::CoreSite;
    throw ConfigError("line " + std::to_string(lineno) + ": unknown node kind '" + s + "'");
}

inline LinkKind link_kind_from(const std::string& s, int lineno) {
    if (s == "Uu") return LinkKind::Uu;
    if (s == "Xn") return LinkKind::Xn;
    if (s == "F1") return LinkKind::F1;
    if (s == "NCore") return LinkKind::NCore;
    throw ConfigError("line " + std::to_string(lineno) + ": unknown link kind '" + s + "'");
}

inline ServiceType service_from(const std::string& s, int lineno) {
    if (s == "xurllc") return ServiceType::Xurllc;
    if (s == "embb") return ServiceType::Embb;
    if (s == "mmtc") return ServiceType::Mmtc;
    throw ConfigError("line " + std::to_string(lineno) + ": unknown service type '" + s + "'");
}

} // namespace detail

inline Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    std::string section;
    std::string line;
    int lineno = 0;
    auto bad = [&](const std::string& what) {
        throw ConfigError("line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = s.substr(1, s.size() - 2);
            if (section != "scenario" && section != "cells" && section != "nodes" &&
                section != "links" && section != "workload")
                bad("unknown section [" + section + "]");
            continue;
        }
        std::istringstream ls(s);
        if (section == "scenario") {
            std::string key, eq, val;
            ls >> key >> eq;
            std::getline(ls, val);
            val = detail::trim(val);
            if (eq != "=" || val.empty()) bad("expected 'key = value'");
            if (key == "name")
                sc.name = val;
            else if (key == "seed")
                sc.seed = std::stoull(val);
            else if (key == "horizon_us")
                sc.horizon_us = std::stoll(val);
            else if (key == "proc_delay_ran_us")
                sc.proc_delay_ran_us = std::stoll(val);
            else if (key == "proc_delay_core_us")
                sc.proc_delay_core_us = std::stoll(val);
            else if (key == "fsm_timeout_us")
                sc.fsm_timeout_us = std::stoll(val);
            else
                bad("unknown scenario key '" + key + "'");
        } else if (section == "cells") {
            std::string v, a;
            ls >> v >> a;
            if (a.empty()) bad("expected '<variant> <approach>'");
            auto var = variant_from_string(v);
            if (!var) bad("unknown variant '" + v + "'");
            auto ap = approach_from_string(a);
            if (!ap) bad("unknown approach '" + a + "'");
            sc.cells.push_back({*var, *ap});
        } else if (section == "nodes") {
            NodeId id;
            std::string kind;
            if (!(ls >> id >> kind)) bad("expected '<id> <kind>'");
            sc.nodes.emplace_back(id, detail::node_kind_from(kind, lineno));
        } else if (section == "links") {
            Link l;
            std::string kind;
            double cap;
            if (!(ls >> l.a >> l.b >> kind >> l.latency_us >> l.loss_prob >> cap))
                bad("expected '<a> <b> <kind> <latency_us> <loss_prob> <capacity>'");
            l.kind = detail::link_kind_from(kind, lineno);
            l.capacity_sessions = static_cast<std::uint32_t>(cap);
            sc.links.push_back(l);
        } else if (section == "workload") {
            MicroSec at;
            std::string verb;
            if (!(ls >> at >> verb)) bad("expected '<at_us> <verb> ...'");
            WorkloadEvent ev;
            ev.at_us = at;
            if (verb == "session") {
                SessionRequest req;
                std::string svc;
                unsigned rel, cq;
                if (!(ls >> req.user_id >> req.destination_id >> svc >>
                      req.qos.max_latency_us >> rel >> cq))
                    bad("session: expected '<src_ue> <dst_ue> <service> <max_latency_us> "
                        "<reliability_exp> <channel_quality>'");
                req.qos.service_type = detail::service_from(svc, lineno);
                req.qos.reliability_exp = static_cast<std::uint8_t>(rel);
                req.channel_quality = static_cast<std::uint8_t>(cq);
                ev.action = InjectSession{req};
            } else if (verb == "traffic") {
                InjectTraffic t;
                if (!(ls >> t.session_index >> t.count >> t.interval_us >> t.size_bytes))
                    bad("traffic: expected '<session_index> <count> <interval_us> <size_bytes>'");
                ev.action = t;
            } else if (verb == "fail_link") {
                FailLink f;
                if (!(ls >> f.a >> f.b)) bad("fail_link: expected '<a> <b>'");
                ev.action = f;
            } else if (verb == "recover_link") {
                RecoverLink f;
                if (!(ls >> f.a >> f.b)) bad("recover_link: expected '<a> <b>'");
                ev.action = f;
            } else if (verb == "fail_node") {
                FailNode f;
                if (!(ls >> f.node)) bad("fail_node: expected '<node>'");
                ev.action = f;
            } else if (verb == "release") {
                ReleaseSession r;
                if (!(ls >> r.session_index)) bad("release: expected '<session_index>'");
                ev.action = r;
            } else {
                bad("unknown workload verb '" + verb + "'");
            }
            sc.workload.push_back(ev);
        } else {
            bad("content before any [section]");
        }
    }
    if (sc.name.empty()) throw ConfigError("scenario: missing 'name'");
    if (sc.cells.empty()) throw ConfigError("scenario: [cells] must list at least one cell");
    if (sc.nodes.empty()) throw ConfigError("scenario: [nodes] is empty");
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open scenario file: " + path);
    return parse_scenario(f);
}

// Interface-requirement check (see the report table's infeasibility notes):
// approach B needs a direct Uu gNB link, A and C need an Xn link.
inline std::optional<std::string> cell_infeasibility(const Scenario& sc, const Cell& cell) {
    auto kind_of = [&](NodeId n) -> std::optional<NodeKind> {
        for (auto& [id, k] : sc.nodes)
            if (id == n) return k;
        return std::nullopt;
    };
    bool has_uu_gnb = false, has_xn = false;
    for (const Link& l : sc.links) {
        auto ka = kind_of(l.a), kb = kind_of(l.b);
        if (!ka || !kb) continue;
        if (l.kind == LinkKind::Uu && ka == NodeKind::AccessNode && kb == NodeKind::AccessNode)
            has_uu_gnb = true;
        if (l.kind == LinkKind::Xn) has_xn = true;
    }
    if (cell.approach == Approach::B && !has_uu_gnb)
        return "approach B requires a direct Uu gNB-gNB link (interface table)";
    if (cell.approach != Approach::B && !has_xn)
        return "approach " + std::string(to_string(cell.approach)) +
               " requires an Xn gNB-gNB link (interface table)";
    try {
        TopologySpec spec{sc.nodes, sc.links, cell.variant};
        build_topology(spec);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return std::nullopt;
}

} // namespace meshran
