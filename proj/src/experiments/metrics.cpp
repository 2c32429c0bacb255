#include <algorithm>
#include <cmath>

#include "smaq/experiments/experiments.hpp"

namespace smaq::experiments {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double MetricsRecord::median() const { return median_of(values); }

double MetricsRecord::stddev() const {
    if (values.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(values.size() - 1));
}

uint64_t PageManifest::total_bytes() const {
    uint64_t total = 0;
    for (const auto& h : hosts) total += uint64_t(h.resources) * h.bytes_per_resource;
    return total;
}

uint64_t PageManifest::avg_bytes_per_connection() const {
    return hosts.empty() ? 0 : total_bytes() / hosts.size();
}

std::vector<uint64_t> BulkResult::median_curve() const {
    std::vector<uint64_t> out;
    if (curves.empty()) return out;
    size_t len = curves.front().size();
    for (const auto& c : curves) len = std::min(len, c.size());
    out.resize(len);
    std::vector<double> column(curves.size());
    for (size_t i = 0; i < len; ++i) {
        for (size_t r = 0; r < curves.size(); ++r) column[r] = double(curves[r][i]);
        out[i] = uint64_t(median_of(column));
    }
    return out;
}

CrossingAnalysis analyze_crossing(const std::vector<uint64_t>& baseline,
                                  const std::vector<uint64_t>& pep, Time interval) {
    CrossingAnalysis out;
    size_t len = std::min(baseline.size(), pep.size());
    if (len == 0) return out;
    // Dead band: wiggles around equality are not break-even events.
    uint64_t final_scale = std::max(baseline[len - 1], pep[len - 1]);
    int64_t band = int64_t(std::max<uint64_t>(final_scale / 500, 100 * 1024));
    // Hysteresis: inside the band the previous state persists. A crossing is
    // the pep curve taking the lead; losing it again counts as another event,
    // so a clean break-even reports exactly one.
    int sign = 0;
    for (size_t i = 0; i < len; ++i) {
        int64_t diff = int64_t(pep[i]) - int64_t(baseline[i]);
        int s = diff > band ? 1 : diff < -band ? -1 : sign;
        if (s == 1 && sign != 1) {
            ++out.crossings;
            if (out.first_crossing < 0) out.first_crossing = Time(i + 1) * interval;
        } else if (s == -1 && sign == 1) {
            ++out.crossings;
        }
        sign = s;
    }
    return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0.0;
    auto ranks = [n](const std::vector<double>& v) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        for (size_t i = 0; i < n; ++i) r[idx[i]] = double(i);
        return r;
    };
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mean = double(n - 1) / 2.0;
    double num = 0, dx = 0, dy = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (rx[i] - mean) * (ry[i] - mean);
        dx += (rx[i] - mean) * (rx[i] - mean);
        dy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (dx == 0 || dy == 0) return 0.0;
    return num / std::sqrt(dx * dy);
}

}  // namespace smaq::experiments
