#include <tilesim/analysis.hpp>

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace tilesim {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

double operational_intensity(const SimReport& report) {
    const std::uint64_t traffic = report.hbm_bytes_read + report.hbm_bytes_written;
    if (traffic == 0) throw ZeroTraffic("report moved no HBM bytes");
    return static_cast<double>(report.flops_executed) / static_cast<double>(traffic);
}

double achieved_flops(const SimReport& report, const ArchConfig& arch) {
    if (report.total_cycles == 0) return 0.0;
    return static_cast<double>(report.flops_executed) * arch.clock_ghz * 1e9 /
           static_cast<double>(report.total_cycles);
}

double model_engine_efficiency(std::uint64_t tm, std::uint64_t tn, std::uint64_t tk,
                               std::uint32_t engine_rows, std::uint32_t engine_cols) {
    const std::uint64_t steps = ceil_div(tm, engine_rows) * ceil_div(tn, engine_cols) * tk;
    const std::uint64_t useful = tm * tn * tk;
    return static_cast<double>(useful) /
           static_cast<double>(steps * engine_rows * engine_cols);
}

UtilizationReport make_utilization(const SimReport& report, const ArchConfig& arch,
                                   std::uint64_t tm, std::uint64_t tn, std::uint64_t tk) {
    UtilizationReport u;
    u.compute_utilization = achieved_flops(report, arch) / peak_flops(arch);
    if (report.total_cycles > 0) {
        const double seconds =
            static_cast<double>(report.total_cycles) / (arch.clock_ghz * 1e9);
        const double bytes_per_s =
            static_cast<double>(report.hbm_bytes_read + report.hbm_bytes_written) / seconds;
        u.hbm_bw_utilization = bytes_per_s / peak_hbm_bw(arch);
        double busy_sum = 0.0;
        for (std::uint64_t busy : report.engine_busy_by_tile) {
            busy_sum += static_cast<double>(busy) / static_cast<double>(report.total_cycles);
        }
        u.engine_tile_utilization = busy_sum / static_cast<double>(report.engine_busy_by_tile.size());
    }
    u.model_engine_efficiency =
        model_engine_efficiency(tm, tn, tk, arch.engine_rows, arch.engine_cols);
    return u;
}

RooflinePoint make_roofline_point(const std::string& label, const SimReport& report,
                                  const ArchConfig& arch) {
    return RooflinePoint{label, operational_intensity(report), achieved_flops(report, arch)};
}

bool under_roofline(const RooflinePoint& point, const ArchConfig& arch, double slack) {
    const double ceiling =
        std::min(peak_flops(arch), point.operational_intensity * peak_hbm_bw(arch));
    return point.achieved_flops <= ceiling * (1.0 + slack);
}

std::string emit_report(const std::vector<std::pair<std::string, SimReport>>& reports,
                        const ArchConfig& arch) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].second.total_cycles < reports[best].second.total_cycles) best = i;
    }

    std::ostringstream out;
    out << "label,cycles,tflops,oi_flop_per_byte,compute_util,hbm_bw_util,best";
    const std::uint32_t channels = arch.channel_count();
    for (std::uint32_t ch = 0; ch < channels; ++ch) out << ",ch" << ch << "_bytes";
    out << "\n";
    out << std::setprecision(6);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const SimReport& r = reports[i].second;
        const double achieved = achieved_flops(r, arch);
        const std::uint64_t traffic = r.hbm_bytes_read + r.hbm_bytes_written;
        const double oi = traffic > 0
                              ? static_cast<double>(r.flops_executed) / static_cast<double>(traffic)
                              : 0.0;
        out << reports[i].first << "," << r.total_cycles << "," << achieved / 1e12 << "," << oi
            << "," << achieved / peak_flops(arch) << ",";
        if (r.total_cycles > 0) {
            const double seconds = static_cast<double>(r.total_cycles) / (arch.clock_ghz * 1e9);
            out << (static_cast<double>(traffic) / seconds) / peak_hbm_bw(arch);
        } else {
            out << 0.0;
        }
        out << "," << (i == best ? 1 : 0);
        for (std::uint32_t ch = 0; ch < channels; ++ch) {
            const std::uint64_t rd = ch < r.hbm_read_by_channel.size() ? r.hbm_read_by_channel[ch] : 0;
            const std::uint64_t wr =
                ch < r.hbm_written_by_channel.size() ? r.hbm_written_by_channel[ch] : 0;
            out << "," << rd + wr;
        }
        out << "\n";
    }
    return out.str();
}

std::string emit_roofline(const std::vector<std::pair<std::string, SimReport>>& reports,
                          const ArchConfig& arch) {
    std::ostringstream out;
    out << std::setprecision(9);
    out << "# peak_flops=" << peak_flops(arch) << "\n";
    out << "# peak_hbm_bw=" << peak_hbm_bw(arch) << "\n";
    out << "label,oi_flop_per_byte,achieved_flops\n";
    for (const auto& [label, report] : reports) {
        const RooflinePoint p = make_roofline_point(label, report, arch);
        out << label << "," << p.operational_intensity << "," << p.achieved_flops << "\n";
    }
    return out.str();
}

}  // namespace tilesim
