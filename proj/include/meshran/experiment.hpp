#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "meshran/scenario.hpp"

namespace meshran {

struct CellResult {
    Cell cell;
    bool infeasible = false;
    std::string reason;
    Metrics metrics;
    std::string trace;
};

struct ComparisonReport {
    std::string scenario_name;
    std::uint64_t seed = 0;
    std::vector<CellResult> cells;
};

inline MicroSec percentile_us(std::vector<MicroSec> v, double p) {
    if (v.empty()) return -1;
    std::sort(v.begin(), v.end());
    // nearest-rank
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    if (rank == 0) rank = 1;
    return v[std::min(rank, v.size()) - 1];
}

inline ComparisonReport run_cells(const Scenario& sc, std::uint64_t seed) {
    ComparisonReport rep;
    rep.scenario_name = sc.name;
    rep.seed = seed;
    for (const Cell& cell : sc.cells) {
        CellResult cr;
        cr.cell = cell;
        if (auto why = cell_infeasibility(sc, cell)) {
            cr.infeasible = true;
            cr.reason = *why;
            rep.cells.push_back(std::move(cr));
            continue;
        }
        TopologySpec spec{sc.nodes, sc.links, cell.variant};
        Topology topo = build_topology(spec);
        SimConfig cfg;
        cfg.seed = seed;
        cfg.horizon_us = sc.horizon_us;
        cfg.proc_delay_ran_us = sc.proc_delay_ran_us;
        cfg.proc_delay_core_us = sc.proc_delay_core_us;
        cfg.protocol.fsm_timeout_us = sc.fsm_timeout_us;
        Engine eng(topo, cell.approach, cfg);
        eng.add_workload(sc.workload);
        RunResult res = eng.run();
        cr.metrics = std::move(res.metrics);
        cr.trace = std::move(res.trace);
        rep.cells.push_back(std::move(cr));
    }
    std::stable_sort(rep.cells.begin(), rep.cells.end(),
                     [](const CellResult& x, const CellResult& y) {
                         return std::make_pair(static_cast<int>(x.cell.variant),
                                               static_cast<int>(x.cell.approach)) <
                                std::make_pair(static_cast<int>(y.cell.variant),
                                               static_cast<int>(y.cell.approach));
                     });
    return rep;
}

inline std::string metrics_csv(const ComparisonReport& rep) {
    std::ostringstream os;
    os << "scenario,variant,approach,session_id,establishment_us,pkt_latency_p50_us,"
          "pkt_latency_p99_us,delivered,dropped,sig_msgs_ran,sig_msgs_agg,sig_msgs_core\n";
    for (const CellResult& c : rep.cells) {
        auto prefix = [&]() -> std::ostringstream& {
            os << rep.scenario_name << ',' << to_string(c.cell.variant) << ','
               << to_string(c.cell.approach) << ',';
            return os;
        };
        if (c.infeasible) {
            prefix() << "-1,-1,-1,-1,0,0,0,0,0\n";
            continue;
        }
        if (c.metrics.sessions.empty()) {
            prefix() << "-1,-1,-1,-1,0,0," << c.metrics.sig_msgs_ran << ','
                     << c.metrics.sig_msgs_agg << ',' << c.metrics.sig_msgs_core << '\n';
            continue;
        }
        for (const SessionStats& s : c.metrics.sessions) {
            prefix() << s.sid << ',' << s.establishment_us() << ','
                     << percentile_us(s.latencies_us, 0.50) << ','
                     << percentile_us(s.latencies_us, 0.99) << ',' << s.pkts_delivered
                     << ',' << s.pkts_dropped << ',' << c.metrics.sig_msgs_ran << ','
                     << c.metrics.sig_msgs_agg << ',' << c.metrics.sig_msgs_core << '\n';
        }
    }
    return os.str();
}

namespace detail {

inline std::string us_with_ms(MicroSec us) {
    if (us < 0) return "-";
    std::ostringstream os;
    os << us << "us (" << std::fixed << std::setprecision(2)
       << static_cast<double>(us) / 1000.0 << "ms)";
    return os.str();
}

} // namespace detail

inline std::string report_table(const ComparisonReport& rep) {
    std::ostringstream os;
    os << "scenario: " << rep.scenario_name << "  seed: " << rep.seed << '\n';
    os << std::left << std::setw(16) << "variant" << std::setw(10) << "approach"
       << std::setw(22) << "establish_med" << std::setw(22) << "data_p50"
       << std::setw(22) << "data_p99" << std::setw(10) << "delivery" << std::setw(20)
       << "sig ran/agg/core" << '\n';
    for (const CellResult& c : rep.cells) {
        os << std::left << std::setw(16) << to_string(c.cell.variant) << std::setw(10)
           << to_string(c.cell.approach);
        if (c.infeasible) {
            os << "infeasible: " << c.reason << '\n';
            continue;
        }
        std::vector<MicroSec> est, lat;
        std::uint64_t inj = 0, del = 0;
        for (const SessionStats& s : c.metrics.sessions) {
            if (s.established()) est.push_back(s.establishment_us());
            lat.insert(lat.end(), s.latencies_us.begin(), s.latencies_us.end());
            inj += s.pkts_injected;
            del += s.pkts_delivered;
        }
        std::ostringstream ratio;
        if (inj)
            ratio << std::fixed << std::setprecision(3)
                  << static_cast<double>(del) / static_cast<double>(inj);
        else
            ratio << "-";
        os << std::setw(22) << detail::us_with_ms(percentile_us(est, 0.50))
           << std::setw(22) << detail::us_with_ms(percentile_us(lat, 0.50))
           << std::setw(22) << detail::us_with_ms(percentile_us(lat, 0.99))
           << std::setw(10) << ratio.str() << c.metrics.sig_msgs_ran << '/'
           << c.metrics.sig_msgs_agg << '/' << c.metrics.sig_msgs_core << '\n';
    }
    return os.str();
}

} // namespace meshran
