#include <fstream>
#include <sstream>

#include "smaq/experiments/experiments.hpp"

namespace smaq::experiments {

std::string ScenarioConfig::name() const {
    std::ostringstream os;
    os << experiment << "-" << (orbit == netem::Orbit::geo ? "geo" : "leo") << "-l" << loss
       << "-" << (mode == sim::Mode::quic ? "quic" : "smaq-pep");
    return os.str();
}

void ScenarioConfig::apply(const std::string& key, const std::string& value) {
    if (key == "experiment") {
        experiment = value;
    } else if (key == "orbit") {
        if (value == "geo") {
            orbit = netem::Orbit::geo;
        } else if (value == "leo") {
            orbit = netem::Orbit::leo;
        } else {
            throw std::invalid_argument("unknown orbit: " + value);
        }
    } else if (key == "loss") {
        loss = std::stod(value);
        if (loss < 0.0 || loss > 1.0) throw std::invalid_argument("loss out of range");
    } else if (key == "mode") {
        if (value == "quic") {
            mode = sim::Mode::quic;
            pep_count = 0;
        } else if (value == "smaq-pep") {
            mode = sim::Mode::smaq_pep;
            if (pep_count == 0) pep_count = 2;
        } else {
            throw std::invalid_argument("unknown mode: " + value);
        }
    } else if (key == "pep_count") {
        pep_count = std::stoi(value);
    } else if (key == "repetitions") {
        repetitions = std::stoi(value);
        if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    } else if (key == "seed") {
        seed = std::stoull(value);
    } else if (key == "manifest") {
        manifest_path = value;
    } else if (key == "window_cap_factor") {
        window_cap_factor = std::stod(value);
    } else if (key == "bulk_total_bytes") {
        bulk_total_bytes = std::stoull(value);
    } else if (key == "checkpoints") {
        checkpoints_s.clear();
        std::istringstream is(value);
        std::string tok;
        while (std::getline(is, tok, ',')) checkpoints_s.push_back(std::stoi(tok));
    } else {
        throw std::invalid_argument("unknown scenario key: " + key);
    }
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    ScenarioConfig sc;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad scenario line: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t'))
                s.pop_back();
        };
        trim(key);
        trim(value);
        sc.apply(key, value);
    }
    if (sc.mode == sim::Mode::quic && sc.pep_count != 0)
        throw std::invalid_argument("mode=quic requires pep_count=0");
    return sc;
}

sim::RunConfig to_run_config(const ScenarioConfig& sc, int rep) {
    sim::RunConfig rc;
    rc.topo = netem::TopologyConfig::make(sc.orbit, sc.loss);
    rc.mode = sc.mode;
    rc.pep_count = sc.mode == sim::Mode::quic ? 0 : sc.pep_count;
    rc.seed = netem::Rng::derive(sc.seed, sc.name() + "/rep" + std::to_string(rep));
    rc.window_cap_factor = sc.window_cap_factor;
    rc.bulk_total_bytes = sc.bulk_total_bytes;
    if (sc.experiment == "migration-time") {
        rc.workload = sim::Workload::bulk;
        rc.bulk_total_bytes = 1200;  // tiny transfer; only the setup matters
        rc.run_until = netem::seconds(20);
        rc.curve_interval = 0;
    } else if (sc.experiment == "bulk") {
        rc.workload = sim::Workload::bulk;
        int last = sc.checkpoints_s.empty() ? 30 : sc.checkpoints_s.back();
        rc.run_until = netem::seconds(last) + netem::milliseconds(200);
        rc.stop_when_complete = sc.bulk_total_bytes != 0;
    } else if (sc.experiment == "webperf") {
        rc.workload = sim::Workload::webperf;
        rc.run_until = netem::seconds(120);
        rc.curve_interval = 0;
    } else {
        throw std::invalid_argument("unknown experiment: " + sc.experiment);
    }
    return rc;
}

}  // namespace smaq::experiments
