#include "ki/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ki/errors.hpp"

namespace ki {

CurveSeries read_ppl_series(const std::string& csv_path, const std::string& label) {
    std::ifstream in(csv_path);
    require(bool(in), Errc::IoError, "cannot open " + csv_path);
    std::string line;
    require(bool(std::getline(in, line)), Errc::FormatError, "empty metrics file " + csv_path);
    require(line.rfind("step,alpha,lr,loss_self,loss_ki,loss_total,valid_ppl,tokens_seen", 0) == 0,
            Errc::FormatError, "unexpected metrics header in " + csv_path);
    CurveSeries s;
    s.label = label;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        std::string col;
        while (std::getline(ls, col, ',')) cols.push_back(col);
        require(cols.size() >= 7, Errc::FormatError, "short metrics row in " + csv_path);
        if (cols[6].empty()) continue;
        s.points.emplace_back(std::stoll(cols[0]), std::stod(cols[6]));
    }
    return s;
}

namespace {
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
}  // namespace

std::string render_ppl_svg(std::span<const CurveSeries> series, const std::string& title,
                           int width, int height) {
    require(!series.empty(), Errc::InvalidArgument, "no series to plot");
    int64_t x_max = 1;
    double y_min = 1e300, y_max = -1e300;
    for (const auto& s : series) {
        for (auto [step, ppl] : s.points) {
            x_max = std::max(x_max, step);
            y_min = std::min(y_min, ppl);
            y_max = std::max(y_max, ppl);
        }
    }
    if (y_min > y_max) {
        y_min = 1;
        y_max = 10;
    }
    if (y_max - y_min < 1e-9) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double step) { return ml + pw * (step / double(x_max)); };
    auto sy = [&](double ppl) { return mt + ph * (1.0 - (ppl - y_min) / (y_max - y_min)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    // gridlines and ticks
    for (int i = 0; i <= 5; ++i) {
        double gy = mt + ph * i / 5.0;
        double val = y_max - (y_max - y_min) * i / 5.0;
        svg << "<line x1=\"" << ml << "\" y1=\"" << num(gy) << "\" x2=\"" << ml + pw << "\" y2=\""
            << num(gy) << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << num(gy + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(val)
            << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        double gx = ml + pw * i / 5.0;
        double val = double(x_max) * i / 5.0;
        svg << "<text x=\"" << num(gx) << "\" y=\"" << height - mb + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(val) << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">step</text>\n";
    svg << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">validation PPL</text>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << num(pw) << "\" height=\""
        << num(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

    for (size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        if (s.points.empty()) continue;
        const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (auto [step, ppl] : s.points)
            svg << num(sx(double(step))) << "," << num(sy(ppl)) << " ";
        svg << "\"/>\n";
        double ly = mt + 16 + 16 * double(i);
        svg << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << num(ly - 4) << "\" x2=\""
            << ml + pw - 126 << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << ml + pw - 120 << "\" y=\"" << num(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
    }
    svg << "</svg>\n";
    return std::move(svg).str();
}

void write_report(std::span<const CurveSeries> series, const std::string& title,
                  const std::string& out_path) {
    std::string svg = render_ppl_svg(series, title);
    std::ofstream out(out_path, std::ios::binary);
    require(bool(out), Errc::IoError, "cannot open " + out_path);
    out.write(svg.data(), std::streamsize(svg.size()));
    require(bool(out), Errc::IoError, "write failed: " + out_path);
}

}  // namespace ki
