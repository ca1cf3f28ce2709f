#ifndef KI_REPORT_HPP
#define KI_REPORT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ki {

struct CurveSeries {
    std::string label;
    std::vector<std::pair<int64_t, double>> points;  // (step, valid_ppl)
};

// Pulls the evaluated (step, valid_ppl) pairs out of a metrics CSV.
CurveSeries read_ppl_series(const std::string& csv_path, const std::string& label);

// Validation-PPL-vs-step curves as a standalone SVG.
std::string render_ppl_svg(std::span<const CurveSeries> series, const std::string& title,
                           int width = 860, int height = 520);

void write_report(std::span<const CurveSeries> series, const std::string& title,
                  const std::string& out_path);

}  // namespace ki

#endif
