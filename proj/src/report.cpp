#include "pauselab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace pauselab {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open report file for writing: " + path);
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

constexpr const char* kSeriesColors[2] = {"#1f77b4", "#d62728"};

struct Range {
    double lo = 0, hi = 1;
};

Range span_of(const std::vector<const std::vector<double>*>& series) {
    Range r{1e300, -1e300};
    bool any = false;
    for (const auto* s : series)
        for (double v : *s) {
            r.lo = std::min(r.lo, v);
            r.hi = std::max(r.hi, v);
            any = true;
        }
    if (!any) return {0, 1};
    if (r.hi - r.lo < 1e-12) r.hi = r.lo + 1.0;
    return r;
}

}  // namespace

std::string format_real(double v) {
    if (v == 0.0) v = 0.0;  // fold -0 into 0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_trainlog_csv(const TrainLog& log, const std::string& path) {
    auto out = open_out(path);
    out << "step,loss,positions,fwd,bwd\n";
    for (const StepRecord& s : log.steps)
        out << s.step << "," << format_real(s.loss) << "," << s.contributing_positions << "," << s.forward_count
            << "," << s.backward_count << "\n";
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "id,correct,extracted,gold,overflow,generated\n";
    for (const EvalRow& r : report.rows)
        out << r.id << "," << (r.correct ? 1 : 0) << "," << csv_escape(r.extracted_answer) << ","
            << csv_escape(r.gold_answer) << "," << (r.overflow ? 1 : 0) << "," << csv_escape(r.generated_text)
            << "\n";
}

void write_logprobs_csv(const LowestKResult& result, const std::string& path) {
    auto out = open_out(path);
    out << "id,correct,mean_lowest_k,lowest_k\n";
    for (const LogProbRecord& r : result.records) {
        out << r.id << "," << (r.correct ? 1 : 0) << "," << format_real(r.mean_lowest_k) << ",\"";
        for (std::size_t i = 0; i < r.lowest_k.size(); ++i) {
            if (i) out << " ";
            out << format_real(r.lowest_k[i]);
        }
        out << "\"\n";
    }
}

void write_comparison_svg(const std::vector<RunSeries>& runs, const std::string& path) {
    if (runs.empty() || runs.size() > 2) throw std::invalid_argument("comparison SVG takes one or two runs");
    const int width = 960, height = 420;
    const int panel_w = 420, panel_h = 300, pad_x = 60, pad_y = 50;

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Left panel: loss curves.
    std::vector<const std::vector<double>*> loss_series;
    for (const RunSeries& r : runs) loss_series.push_back(&r.losses);
    const Range ly = span_of(loss_series);
    std::size_t max_steps = 1;
    for (const RunSeries& r : runs) max_steps = std::max(max_steps, r.losses.size());

    out << "<text x=\"" << pad_x + panel_w / 2 << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">"
        << "training loss</text>\n";
    out << "<rect x=\"" << pad_x << "\" y=\"" << pad_y << "\" width=\"" << panel_w << "\" height=\"" << panel_h
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const std::vector<double>& losses = runs[ri].losses;
        if (losses.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << kSeriesColors[ri] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < losses.size(); ++i) {
            const double fx = max_steps > 1 ? static_cast<double>(i) / static_cast<double>(max_steps - 1) : 0.0;
            const double fy = (losses[i] - ly.lo) / (ly.hi - ly.lo);
            out << format_real(pad_x + fx * panel_w) << "," << format_real(pad_y + (1.0 - fy) * panel_h) << " ";
        }
        out << "\"/>\n";
    }
    out << "<text x=\"" << pad_x << "\" y=\"" << pad_y + panel_h + 20 << "\" font-size=\"12\">min "
        << format_real(ly.lo) << " / max " << format_real(ly.hi) << "</text>\n";

    // Right panel: histograms of per-example lowest-k means.
    const int hx = pad_x + panel_w + 80;
    std::vector<const std::vector<double>*> lk_series;
    for (const RunSeries& r : runs) lk_series.push_back(&r.lowest_k_means);
    const Range lx = span_of(lk_series);
    constexpr int kBins = 20;

    out << "<text x=\"" << hx + panel_w / 2 << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">"
        << "lowest-k log-prob distribution</text>\n";
    out << "<rect x=\"" << hx << "\" y=\"" << pad_y << "\" width=\"" << panel_w << "\" height=\"" << panel_h
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const std::vector<double>& vals = runs[ri].lowest_k_means;
        if (vals.empty()) continue;
        std::vector<int> bins(kBins, 0);
        for (double v : vals) {
            int b = static_cast<int>((v - lx.lo) / (lx.hi - lx.lo) * kBins);
            b = std::clamp(b, 0, kBins - 1);
            ++bins[static_cast<std::size_t>(b)];
        }
        const int peak = std::max(1, *std::max_element(bins.begin(), bins.end()));
        const double bw = static_cast<double>(panel_w) / kBins;
        for (int b = 0; b < kBins; ++b) {
            const double h = static_cast<double>(bins[static_cast<std::size_t>(b)]) / peak * panel_h;
            if (h <= 0) continue;
            out << "<rect x=\"" << format_real(hx + b * bw + ri * bw * 0.5) << "\" y=\""
                << format_real(pad_y + panel_h - h) << "\" width=\"" << format_real(bw * 0.45) << "\" height=\""
                << format_real(h) << "\" fill=\"" << kSeriesColors[ri] << "\" fill-opacity=\"0.7\"/>\n";
        }
    }
    out << "<text x=\"" << hx << "\" y=\"" << pad_y + panel_h + 20 << "\" font-size=\"12\">min "
        << format_real(lx.lo) << " / max " << format_real(lx.hi) << "</text>\n";

    // Legend.
    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        const int y = pad_y + panel_h + 45 + static_cast<int>(ri) * 20;
        out << "<rect x=\"" << pad_x << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
            << kSeriesColors[ri] << "\"/>\n";
        out << "<text x=\"" << pad_x + 18 << "\" y=\"" << y << "\" font-size=\"13\">" << runs[ri].label
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    auto out = open_out(path);
    out << "axis,value,seed,accuracy,mean_loss,failed,error\n";
    for (const SweepRow& r : rows)
        out << r.axis << "," << r.value << "," << r.seed << "," << format_real(r.accuracy) << ","
            << format_real(r.mean_loss) << "," << (r.failed ? 1 : 0) << "," << csv_escape(r.error) << "\n";
}

void write_sweep_svg(const std::vector<SweepRow>& rows, const std::string& axis, const std::string& path) {
    // Mean across seeds per axis value.
    std::map<int, std::pair<double, int>> acc, loss;
    for (const SweepRow& r : rows) {
        if (r.failed) continue;
        acc[r.value].first += r.accuracy;
        acc[r.value].second += 1;
        loss[r.value].first += r.mean_loss;
        loss[r.value].second += 1;
    }
    std::vector<double> acc_curve, loss_curve;
    std::vector<int> values;
    for (const auto& [v, p] : acc) {
        values.push_back(v);
        acc_curve.push_back(p.first / p.second);
        loss_curve.push_back(loss[v].first / loss[v].second);
    }

    const int width = 640, height = 420, panel_w = 520, panel_h = 300, pad_x = 60, pad_y = 50;
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << pad_x + panel_w / 2 << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">" << axis
        << " sweep</text>\n";
    out << "<rect x=\"" << pad_x << "\" y=\"" << pad_y << "\" width=\"" << panel_w << "\" height=\"" << panel_h
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    auto draw = [&](const std::vector<double>& curve, const char* color) {
        if (curve.empty()) return;
        Range r{*std::min_element(curve.begin(), curve.end()), *std::max_element(curve.begin(), curve.end())};
        if (r.hi - r.lo < 1e-12) r.hi = r.lo + 1.0;
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const double fx = curve.size() > 1 ? static_cast<double>(i) / static_cast<double>(curve.size() - 1) : 0.5;
            const double fy = (curve[i] - r.lo) / (r.hi - r.lo);
            out << format_real(pad_x + fx * panel_w) << "," << format_real(pad_y + (1.0 - fy) * panel_h) << " ";
        }
        out << "\"/>\n";
    };
    draw(acc_curve, kSeriesColors[0]);
    draw(loss_curve, kSeriesColors[1]);

    for (std::size_t i = 0; i < values.size(); ++i) {
        const double fx = values.size() > 1 ? static_cast<double>(i) / static_cast<double>(values.size() - 1) : 0.5;
        out << "<text x=\"" << format_real(pad_x + fx * panel_w) << "\" y=\"" << pad_y + panel_h + 20
            << "\" text-anchor=\"middle\" font-size=\"12\">" << values[i] << "</text>\n";
    }
    out << "<rect x=\"" << pad_x << "\" y=\"" << pad_y + panel_h + 35 << "\" width=\"12\" height=\"12\" fill=\""
        << kSeriesColors[0] << "\"/>\n<text x=\"" << pad_x + 18 << "\" y=\"" << pad_y + panel_h + 45
        << "\" font-size=\"13\">accuracy (normalized)</text>\n";
    out << "<rect x=\"" << pad_x + 220 << "\" y=\"" << pad_y + panel_h + 35
        << "\" width=\"12\" height=\"12\" fill=\"" << kSeriesColors[1] << "\"/>\n<text x=\"" << pad_x + 238
        << "\" y=\"" << pad_y + panel_h + 45 << "\" font-size=\"13\">mean loss (normalized)</text>\n";
    out << "</svg>\n";
}

}  // namespace pauselab
