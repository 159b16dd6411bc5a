#include "arht/report_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "arht/errors.hpp"

namespace arht::report {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open for writing: " + path);
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_report_csv(const detector::DetectionReport& report,
                      const std::string& path) {
    auto out = open_out(path);
    out << "point_id,label,lambda,rht,arht,p_value,rejected\n";
    for (const auto& point : report.points) {
        out << point.point_id << ',';
        if (point.label >= 0) {
            out << point.label;
        }
        out << ',';
        if (point.ok) {
            out << format_double(point.arht.lambda) << ','
                << format_double(point.arht.rht) << ','
                << format_double(point.arht.statistic) << ','
                << format_double(point.p_value) << ',' << (point.rejected ? 1 : 0)
                << '\n';
        } else {
            out << ",,,," << 0 << '\n';
        }
    }
}

void write_summary_json(const detector::DetectionReport& report,
                        const std::map<std::string, double>& extra_metrics,
                        const std::string& path) {
    nlohmann::json j;
    j["alpha"] = report.alpha;
    j["m"] = report.m;
    j["k_hat"] = report.k_hat;
    j["threshold"] = report.threshold_used;
    std::int64_t rejections = 0;
    for (const auto& point : report.points) {
        rejections += point.rejected;
    }
    j["rejections"] = rejections;
    for (const auto& [key, value] : extra_metrics) {
        j[key] = value;
    }
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_loss_csv(const std::vector<bnn::ElboParts>& trace,
                    const std::string& path) {
    auto out = open_out(path);
    out << "epoch,loss,task_term,kl_term\n";
    for (std::size_t e = 0; e < trace.size(); ++e) {
        out << e << ',' << format_double(trace[e].loss) << ','
            << format_double(trace[e].task_term) << ','
            << format_double(trace[e].kl_term) << '\n';
    }
}

void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path) {
    auto out = open_out(path);
    out << "metric,value\n";
    for (const auto& [name, value] : rows) {
        out << name << ',' << format_double(value) << '\n';
    }
}

void write_null_csv(const simulate::NullSimResult& result,
                    const std::string& path) {
    auto out = open_out(path);
    out << "replicate,lambda,arht\n";
    for (std::size_t r = 0; r < result.statistics.size(); ++r) {
        out << r << ',' << format_double(result.lambdas[r]) << ','
            << format_double(result.statistics[r]) << '\n';
    }
}

void write_null_summary_json(const simulate::NullSimResult& result,
                             const std::string& path) {
    nlohmann::json j;
    j["replicates"] = result.statistics.size();
    j["mean"] = result.mean;
    j["sd"] = result.sd;
    j["tail_1645"] = result.tail_1645;
    j["tail_196"] = result.tail_196;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace arht::report
