#include <filesystem>

#include "smaq/experiments/experiments.hpp"

namespace smaq::experiments {

MigrationResult run_migration_time(const ScenarioConfig& sc) {
    if (sc.mode != sim::Mode::smaq_pep)
        throw std::invalid_argument("migration-time requires mode=smaq-pep");
    MigrationResult out;
    out.scenario = sc;
    out.migration_ms.scenario = sc.name();
    out.migration_ms.metric = "migration_time_ms";
    for (int rep = 0; rep < sc.repetitions; ++rep) {
        sim::RunConfig rc = to_run_config(sc, rep);
        sim::RunResult r = sim::run_scenario(rc);
        if (r.migration_time < 0) {
            ++out.migration_ms.failures;
            continue;
        }
        out.migration_ms.values.push_back(netem::to_millis(r.migration_time));
    }
    return out;
}

BulkResult run_bulk(const ScenarioConfig& sc) {
    BulkResult out;
    out.scenario = sc;
    for (int cp : sc.checkpoints_s) {
        MetricsRecord rec;
        rec.scenario = sc.name();
        rec.metric = "bytes_at_" + std::to_string(cp) + "s";
        out.bytes_at.push_back(std::move(rec));
    }
    for (int rep = 0; rep < sc.repetitions; ++rep) {
        sim::RunConfig rc = to_run_config(sc, rep);
        sim::RunResult r = sim::run_scenario(rc);
        if (r.outcome == sim::Outcome::closed_error) {
            for (auto& rec : out.bytes_at) ++rec.failures;
            continue;
        }
        for (size_t i = 0; i < sc.checkpoints_s.size(); ++i) {
            size_t tick = size_t(netem::seconds(sc.checkpoints_s[i]) / rc.curve_interval);
            uint64_t bytes =
                tick < r.curve.size() ? r.curve[tick] : r.client_received_bytes;
            out.bytes_at[i].values.push_back(double(bytes));
        }
        out.curves.push_back(std::move(r.curve));
    }
    return out;
}

WebperfResult run_webperf(const ScenarioConfig& sc, const PageManifest& manifest) {
    WebperfResult out;
    out.scenario = sc;
    out.page = manifest.page;
    out.aplt_ms.scenario = sc.name() + "-" + manifest.page;
    out.aplt_ms.metric = "aplt_ms";
    for (int rep = 0; rep < sc.repetitions; ++rep) {
        sim::RunConfig rc = to_run_config(sc, rep);
        rc.page = manifest.hosts;
        sim::RunResult r = sim::run_scenario(rc);
        if (r.aplt < 0) {
            ++out.aplt_ms.failures;
            continue;
        }
        out.aplt_ms.values.push_back(netem::to_millis(r.aplt));
    }
    return out;
}

namespace fs = std::filesystem;

int run_campaign(const CampaignOptions& opts) {
    fs::create_directories(opts.out_dir);
    const double losses[] = {0.0001, 0.001};
    const netem::Orbit orbits[] = {netem::Orbit::geo, netem::Orbit::leo};

    // Migration time (smaq-pep only).
    {
        std::vector<MetricsRecord> records;
        for (netem::Orbit orbit : orbits) {
            for (double loss : losses) {
                ScenarioConfig sc;
                sc.experiment = "migration-time";
                sc.orbit = orbit;
                sc.loss = loss;
                sc.mode = sim::Mode::smaq_pep;
                sc.pep_count = 2;
                sc.repetitions = opts.migration_reps;
                sc.seed = opts.seed;
                sc.window_cap_factor = opts.window_cap_factor;
                records.push_back(run_migration_time(sc).migration_ms);
            }
        }
        write_csv(opts.out_dir + "/migration_time.csv", records);
    }

    // Bulk download: 8 scenarios, one CSV each plus per-orbit SVG panels.
    {
        std::vector<BulkResult> quic_results, pep_results;
        for (netem::Orbit orbit : orbits) {
            for (double loss : losses) {
                for (sim::Mode mode : {sim::Mode::quic, sim::Mode::smaq_pep}) {
                    ScenarioConfig sc;
                    sc.experiment = "bulk";
                    sc.orbit = orbit;
                    sc.loss = loss;
                    sc.mode = mode;
                    sc.pep_count = mode == sim::Mode::smaq_pep ? 2 : 0;
                    sc.repetitions = opts.bulk_reps;
                    sc.seed = opts.seed;
                    sc.window_cap_factor = opts.window_cap_factor;
                    BulkResult res = run_bulk(sc);
                    write_csv(opts.out_dir + "/" + sc.name() + ".csv", res.bytes_at);
                    (mode == sim::Mode::quic ? quic_results : pep_results)
                        .push_back(std::move(res));
                }
            }
        }
        auto panel = [&](netem::Orbit orbit, const std::string& path) {
            std::vector<BulkResult> q, p;
            for (auto& r : quic_results)
                if (r.scenario.orbit == orbit) q.push_back(r);
            for (auto& r : pep_results)
                if (r.scenario.orbit == orbit) p.push_back(r);
            write_bulk_svg(path, orbit == netem::Orbit::geo ? "GEO bulk download"
                                                            : "LEO bulk download",
                           q, p);
        };
        panel(netem::Orbit::geo, opts.out_dir + "/bulk_geo.svg");
        panel(netem::Orbit::leo, opts.out_dir + "/bulk_leo.svg");
    }

    // Web performance over the manifest set.
    if (!opts.manifest_dir.empty()) {
        auto manifests = PageManifest::load_directory(opts.manifest_dir);
        for (netem::Orbit orbit : orbits) {
            std::vector<AplRow> rows;
            std::vector<MetricsRecord> records;
            for (const auto& manifest : manifests) {
                AplRow row;
                row.page = manifest.page;
                row.connections = manifest.connections();
                row.avg_bytes = manifest.avg_bytes_per_connection();
                for (double loss : losses) {
                    double medians[2] = {0, 0};
                    for (sim::Mode mode : {sim::Mode::quic, sim::Mode::smaq_pep}) {
                        ScenarioConfig sc;
                        sc.experiment = "webperf";
                        sc.orbit = orbit;
                        sc.loss = loss;
                        sc.mode = mode;
                        sc.pep_count = mode == sim::Mode::smaq_pep ? 2 : 0;
                        sc.repetitions = opts.webperf_reps;
                        sc.seed = opts.seed;
                        sc.window_cap_factor = opts.window_cap_factor;
                        WebperfResult res = run_webperf(sc, manifest);
                        medians[mode == sim::Mode::quic ? 0 : 1] = res.aplt_ms.median();
                        records.push_back(std::move(res.aplt_ms));
                    }
                    double rel = medians[0] > 0 ? (medians[1] - medians[0]) / medians[0] : 0;
                    (loss == losses[0] ? row.rel_diff_low_loss : row.rel_diff_high_loss) = rel;
                }
                rows.push_back(row);
            }
            std::string tag = orbit == netem::Orbit::geo ? "geo" : "leo";
            write_csv(opts.out_dir + "/webperf_" + tag + ".csv", records);
            write_aplt_svg(opts.out_dir + "/aplt_" + tag + ".svg",
                           tag == "geo" ? "GEO relative aPLT" : "LEO relative aPLT", rows);
        }
    }
    return 0;
}

}  // namespace smaq::experiments
