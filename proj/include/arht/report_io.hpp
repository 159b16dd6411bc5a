#pragma once

#include <map>
#include <string>
#include <vector>

#include "arht/bnn.hpp"
#include "arht/detector.hpp"
#include "arht/simulate.hpp"

// CSV/JSON emission. Numeric cells are printed with %.17g so identical runs
// produce byte-identical files.

namespace arht::report {

std::string format_double(double v);

// Columns: point_id,label,lambda,rht,arht,p_value,rejected (fixed order).
// The label cell is empty when unknown; numeric cells are empty for points
// whose scoring failed.
void write_report_csv(const detector::DetectionReport& report,
                      const std::string& path);

// {"alpha":..,"k_hat":..,"m":..,"rejections":..,"threshold":..} plus any
// extra metric keys (e.g. auroc/aupr).
void write_summary_json(const detector::DetectionReport& report,
                        const std::map<std::string, double>& extra_metrics,
                        const std::string& path);

// Columns: epoch,loss,task_term,kl_term.
void write_loss_csv(const std::vector<bnn::ElboParts>& trace,
                    const std::string& path);

// Columns: metric,value.
void write_metrics_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path);

// Columns: replicate,lambda,arht.
void write_null_csv(const simulate::NullSimResult& result,
                    const std::string& path);

void write_null_summary_json(const simulate::NullSimResult& result,
                             const std::string& path);

}  // namespace arht::report
