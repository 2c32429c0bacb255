#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "smaq/experiments/experiments.hpp"

namespace smaq::experiments {

namespace {

std::string fmt(double v) {
    char buf[64];
    snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
    if (records.empty()) throw std::invalid_argument("write_csv: no records");
    std::string body = "scenario,run,metric,value\n";
    for (const auto& rec : records) {
        for (size_t i = 0; i < rec.values.size(); ++i) {
            body += rec.scenario + "," + std::to_string(i) + "," + rec.metric + "," +
                    fmt(rec.values[i]) + "\n";
        }
        body += rec.scenario + ",median," + rec.metric + "," + fmt(rec.median()) + "\n";
        body += rec.scenario + ",stddev," + rec.metric + "," + fmt(rec.stddev()) + "\n";
        if (rec.failures > 0)
            body += rec.scenario + ",failures," + rec.metric + "," +
                    std::to_string(rec.failures) + "\n";
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
}

namespace {

struct Svg {
    std::string body;
    int width, height;
    Svg(int w, int h) : width(w), height(h) {
        body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
                "\" height=\"" + std::to_string(h) + "\">\n";
        body += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        char buf[200];
        snprintf(buf, sizeof(buf),
                 "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\"/>\n",
                 x, y, w, h, fill.c_str());
        body += buf;
    }
    void line(double x1, double y1, double x2, double y2) {
        char buf[200];
        snprintf(buf, sizeof(buf),
                 "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                 "stroke=\"black\" stroke-width=\"1\"/>\n",
                 x1, y1, x2, y2);
        body += buf;
    }
    void text(double x, double y, const std::string& s, int size = 11,
              const std::string& anchor = "start") {
        char buf[300];
        snprintf(buf, sizeof(buf),
                 "<text x=\"%.1f\" y=\"%.1f\" font-size=\"%d\" font-family=\"sans-serif\" "
                 "text-anchor=\"%s\">%s</text>\n",
                 x, y, size, anchor.c_str(), s.c_str());
        body += buf;
    }
    void save(const std::string& path) {
        body += "</svg>\n";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << body;
    }
};

std::string mb(double bytes) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.1f", bytes / 1e6);
    return buf;
}

}  // namespace

void write_bulk_svg(const std::string& path, const std::string& title,
                    const std::vector<BulkResult>& quic, const std::vector<BulkResult>& pep) {
    // Grouped bars: per loss profile and checkpoint, baseline vs pep medians
    // with stddev whiskers.
    Svg svg(760, 420);
    svg.text(20, 24, title, 15);
    double max_val = 1;
    for (const auto* set : {&quic, &pep})
        for (const auto& res : *set)
            for (const auto& rec : res.bytes_at)
                max_val = std::max(max_val, rec.median() + rec.stddev());
    const double x0 = 60, y0 = 370, plot_w = 660, plot_h = 310;
    svg.line(x0, y0, x0 + plot_w, y0);
    svg.line(x0, y0, x0, y0 - plot_h);
    svg.text(14, 40, "MB", 10);
    int groups = 0;
    for (const auto& res : quic) groups += int(res.bytes_at.size());
    double group_w = plot_w / std::max(groups, 1);
    int g = 0;
    for (size_t s = 0; s < quic.size(); ++s) {
        for (size_t c = 0; c < quic[s].bytes_at.size(); ++c, ++g) {
            double base_x = x0 + g * group_w;
            const MetricsRecord& qr = quic[s].bytes_at[c];
            const MetricsRecord* pr = s < pep.size() && c < pep[s].bytes_at.size()
                                          ? &pep[s].bytes_at[c]
                                          : nullptr;
            double qh = qr.median() / max_val * plot_h;
            svg.rect(base_x + group_w * 0.15, y0 - qh, group_w * 0.3, qh, "#4878cf");
            svg.text(base_x + group_w * 0.3, y0 - qh - 4, mb(qr.median()), 9, "middle");
            if (pr) {
                double ph = pr->median() / max_val * plot_h;
                svg.rect(base_x + group_w * 0.55, y0 - ph, group_w * 0.3, ph, "#ee854a");
                svg.text(base_x + group_w * 0.7, y0 - ph - 4, mb(pr->median()), 9, "middle");
                double cx = base_x + group_w * 0.7;
                double sd = pr->stddev() / max_val * plot_h;
                svg.line(cx, y0 - ph - sd, cx, std::min(y0, y0 - ph + sd));
            }
            double cq = base_x + group_w * 0.3;
            double sdq = qr.stddev() / max_val * plot_h;
            svg.line(cq, y0 - qh - sdq, cq, std::min(y0, y0 - qh + sdq));
            std::string label = qr.metric.substr(std::string("bytes_at_").size());
            svg.text(base_x + group_w / 2, y0 + 14,
                     label + " @" + fmt(quic[s].scenario.loss * 100) + "%", 8, "middle");
        }
    }
    svg.rect(x0 + plot_w - 170, 34, 12, 12, "#4878cf");
    svg.text(x0 + plot_w - 152, 44, "baseline", 10);
    svg.rect(x0 + plot_w - 80, 34, 12, 12, "#ee854a");
    svg.text(x0 + plot_w - 62, 44, "pep", 10);
    svg.save(path);
}

void write_aplt_svg(const std::string& path, const std::string& title,
                    const std::vector<AplRow>& rows) {
    int h = 80 + int(rows.size()) * 34;
    Svg svg(760, h);
    svg.text(20, 24, title + " (negative = faster with pep)", 14);
    double max_abs = 0.05;
    for (const auto& r : rows) {
        max_abs = std::max({max_abs, std::abs(r.rel_diff_low_loss),
                            std::abs(r.rel_diff_high_loss)});
    }
    const double mid_x = 430, half_w = 240;
    svg.line(mid_x, 44, mid_x, h - 20);
    for (size_t i = 0; i < rows.size(); ++i) {
        const AplRow& r = rows[i];
        double y = 56 + double(i) * 34;
        char label[160];
        snprintf(label, sizeof(label), "%s (%d) [%llu KB]", r.page.c_str(), r.connections,
                 static_cast<unsigned long long>(r.avg_bytes / 1000));
        svg.text(20, y + 12, label, 11);
        auto bar = [&](double rel, double yy, const std::string& color) {
            double w = std::min(std::abs(rel) / max_abs, 1.0) * half_w;
            double x = rel < 0 ? mid_x - w : mid_x;
            svg.rect(x, yy, std::max(w, 0.5), 10, rel < 0 ? "#2ca02c" : color);
            char pct[32];
            snprintf(pct, sizeof(pct), "%+.1f%%", rel * 100);
            svg.text(rel < 0 ? mid_x - w - 4 : mid_x + w + 4, yy + 9, pct, 9,
                     rel < 0 ? "end" : "start");
        };
        bar(r.rel_diff_low_loss, y, "#d62728");
        bar(r.rel_diff_high_loss, y + 13, "#ff9896");
    }
    svg.save(path);
}

}  // namespace smaq::experiments
