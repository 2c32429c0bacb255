#pragma once

#include <map>
#include <string>
#include <vector>

#include "smaq/sim/sim.hpp"

namespace smaq::experiments {

using netem::Time;

// One measurement scenario: experiment x orbit x loss x mode, repeated.
struct ScenarioConfig {
    std::string experiment = "bulk";  // migration-time | bulk | webperf
    netem::Orbit orbit = netem::Orbit::geo;
    double loss = 0.0001;
    sim::Mode mode = sim::Mode::quic;
    int pep_count = 0;
    int repetitions = 1;
    uint64_t seed = 1;
    std::vector<int> checkpoints_s = {10, 20, 30};
    std::string manifest_path;
    double window_cap_factor = 2.0;
    uint64_t bulk_total_bytes = 0;

    std::string name() const;
    // key=value file, one per line, '#' comments.
    static ScenarioConfig from_file(const std::string& path);
    void apply(const std::string& key, const std::string& value);
};

struct PageManifest {
    std::string page;
    std::vector<sim::HostProfile> hosts;

    int connections() const { return int(hosts.size()); }
    uint64_t total_bytes() const;
    uint64_t avg_bytes_per_connection() const;

    static PageManifest from_file(const std::string& path);
    static std::vector<PageManifest> load_directory(const std::string& dir);
};

// Per-run values of one metric plus the aggregates the campaign reports.
struct MetricsRecord {
    std::string scenario;
    std::string metric;
    std::vector<double> values;
    int failures = 0;

    double median() const;
    double stddev() const;
};

double median_of(std::vector<double> v);

struct BulkResult {
    ScenarioConfig scenario;
    std::vector<MetricsRecord> bytes_at;      // one record per checkpoint
    std::vector<std::vector<uint64_t>> curves;  // per-rep cumulative-byte curves
    Time curve_interval = netem::milliseconds(100);
    std::vector<uint64_t> median_curve() const;
};

struct MigrationResult {
    ScenarioConfig scenario;
    MetricsRecord migration_ms;
};

struct WebperfResult {
    ScenarioConfig scenario;
    std::string page;
    MetricsRecord aplt_ms;
};

sim::RunConfig to_run_config(const ScenarioConfig& sc, int rep);

MigrationResult run_migration_time(const ScenarioConfig& sc);
BulkResult run_bulk(const ScenarioConfig& sc);
WebperfResult run_webperf(const ScenarioConfig& sc, const PageManifest& manifest);

// Break-even analysis between two cumulative-byte curves sampled on the same
// grid: sign changes of (pep - baseline), ignoring the leading all-zero span.
struct CrossingAnalysis {
    int crossings = 0;
    Time first_crossing = -1;
};
CrossingAnalysis analyze_crossing(const std::vector<uint64_t>& baseline,
                                  const std::vector<uint64_t>& pep, Time interval);

// Spearman rank correlation.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---- outputs ----

// CSV columns: scenario,run,metric,value (aggregates use run = "median"/"stddev").
void write_csv(const std::string& path, const std::vector<MetricsRecord>& records);

void write_bulk_svg(const std::string& path, const std::string& title,
                    const std::vector<BulkResult>& quic, const std::vector<BulkResult>& pep);

struct AplRow {
    std::string page;
    int connections = 0;
    uint64_t avg_bytes = 0;
    double rel_diff_low_loss = 0;   // (pep - quic) / quic
    double rel_diff_high_loss = 0;
};
void write_aplt_svg(const std::string& path, const std::string& title,
                    const std::vector<AplRow>& rows);

struct CampaignOptions {
    std::string out_dir;
    std::string manifest_dir;
    uint64_t seed = 1;
    int migration_reps = 100;
    int bulk_reps = 7;
    int webperf_reps = 5;
    double window_cap_factor = 2.0;
};

// The full measurement program: migration time, bulk and web performance for
// every orbit/loss/mode combination. Writes CSV files and SVG panels.
int run_campaign(const CampaignOptions& opts);

}  // namespace smaq::experiments
