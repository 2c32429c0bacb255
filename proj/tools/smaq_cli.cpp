// Scenario driver for the SMAQ simulation testbed.

#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>

#include "smaq/experiments/experiments.hpp"

using namespace smaq;
using experiments::ScenarioConfig;

namespace {

struct CommonArgs {
    std::string orbit = "geo";
    double loss = 0.0001;
    std::string mode = "smaq-pep";
    int pep_count = -1;
    int reps = 10;
    uint64_t seed = 1;
    std::string out_dir = "results";
    std::string config_file;
    double cap_factor = 2.0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_mode) {
    cmd->add_option("--orbit", args.orbit, "Satellite orbit: geo or leo");
    cmd->add_option("--loss", args.loss, "Satellite-segment loss probability");
    if (with_mode) cmd->add_option("--mode", args.mode, "quic or smaq-pep");
    cmd->add_option("--pep-count", args.pep_count, "Middlebox count for smaq-pep (1 or 2)");
    cmd->add_option("--reps", args.reps, "Repetitions per scenario");
    cmd->add_option("--seed", args.seed, "Campaign seed");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--config", args.config_file, "Scenario config file (key=value lines)");
    cmd->add_option("--cap-factor", args.cap_factor, "Congestion window cap, in path BDPs");
}

ScenarioConfig to_scenario(const CommonArgs& args, const std::string& experiment) {
    ScenarioConfig sc;
    if (!args.config_file.empty()) sc = ScenarioConfig::from_file(args.config_file);
    sc.experiment = experiment;
    sc.apply("orbit", args.orbit);
    sc.apply("loss", std::to_string(args.loss));
    sc.apply("mode", args.mode);
    if (args.pep_count >= 0) sc.pep_count = args.pep_count;
    sc.repetitions = args.reps;
    sc.seed = args.seed;
    sc.window_cap_factor = args.cap_factor;
    return sc;
}

void print_record(const experiments::MetricsRecord& rec) {
    printf("%-42s %-16s median %12.3f  stddev %12.3f  n=%zu%s\n", rec.scenario.c_str(),
           rec.metric.c_str(), rec.median(), rec.stddev(), rec.values.size(),
           rec.failures > 0 ? (" failures=" + std::to_string(rec.failures)).c_str() : "");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"smaq: middlebox-assisted transport experiments at desk scale"};
    app.require_subcommand(1);

    CommonArgs margs, bargs, wargs, cargs;
    std::string manifest_path = "data/manifests/google.json";
    std::string manifest_dir = "data/manifests";

    CLI::App* mig = app.add_subcommand("migration-time",
                                       "Measure state handover + dual migration time");
    add_common(mig, margs, false);

    CLI::App* bulk = app.add_subcommand("bulk", "Bulk download: received bytes at checkpoints");
    add_common(bulk, bargs, true);

    CLI::App* web = app.add_subcommand("webperf", "Approximated page load time for a manifest");
    add_common(web, wargs, true);
    web->add_option("--manifest", manifest_path, "Page manifest (JSON)");

    CLI::App* campaign = app.add_subcommand("campaign", "Run the full measurement program");
    add_common(campaign, cargs, false);
    campaign->add_option("--manifest-dir", manifest_dir, "Directory of page manifests");
    int bulk_reps = 7, webperf_reps = 5;
    campaign->add_option("--bulk-reps", bulk_reps, "Repetitions for bulk scenarios");
    campaign->add_option("--webperf-reps", webperf_reps, "Repetitions for webperf scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mig->parsed()) {
            margs.mode = "smaq-pep";
            ScenarioConfig sc = to_scenario(margs, "migration-time");
            auto res = experiments::run_migration_time(sc);
            std::filesystem::create_directories(margs.out_dir);
            experiments::write_csv(margs.out_dir + "/" + sc.name() + ".csv",
                                   {res.migration_ms});
            print_record(res.migration_ms);
        } else if (bulk->parsed()) {
            ScenarioConfig sc = to_scenario(bargs, "bulk");
            auto res = experiments::run_bulk(sc);
            std::filesystem::create_directories(bargs.out_dir);
            experiments::write_csv(bargs.out_dir + "/" + sc.name() + ".csv", res.bytes_at);
            for (const auto& rec : res.bytes_at) print_record(rec);
        } else if (web->parsed()) {
            ScenarioConfig sc = to_scenario(wargs, "webperf");
            auto manifest = experiments::PageManifest::from_file(manifest_path);
            auto res = experiments::run_webperf(sc, manifest);
            std::filesystem::create_directories(wargs.out_dir);
            experiments::write_csv(wargs.out_dir + "/" + sc.name() + "-" + res.page + ".csv",
                                   {res.aplt_ms});
            print_record(res.aplt_ms);
        } else if (campaign->parsed()) {
            experiments::CampaignOptions opts;
            opts.out_dir = cargs.out_dir;
            opts.manifest_dir = manifest_dir;
            opts.seed = cargs.seed;
            opts.migration_reps = cargs.reps;
            opts.bulk_reps = bulk_reps;
            opts.webperf_reps = webperf_reps;
            opts.window_cap_factor = cargs.cap_factor;
            experiments::run_campaign(opts);
            printf("campaign outputs written to %s\n", opts.out_dir.c_str());
        }
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
