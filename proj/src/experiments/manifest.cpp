#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "smaq/experiments/experiments.hpp"

namespace smaq::experiments {

PageManifest PageManifest::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json j;
    in >> j;
    PageManifest m;
    m.page = j.at("page").get<std::string>();
    for (const auto& h : j.at("hosts")) {
        sim::HostProfile p;
        p.host = h.at("host").get<std::string>();
        p.resources = h.at("resources").get<int>();
        p.bytes_per_resource = h.at("bytes_per_resource").get<uint64_t>();
        if (p.resources < 1 || p.bytes_per_resource == 0)
            throw std::invalid_argument("manifest host with empty transfer: " + p.host);
        m.hosts.push_back(std::move(p));
    }
    if (m.hosts.empty()) throw std::invalid_argument("manifest without hosts: " + path);
    return m;
}

std::vector<PageManifest> PageManifest::load_directory(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    std::vector<PageManifest> out;
    for (const auto& f : files) out.push_back(from_file(f));
    return out;
}

}  // namespace smaq::experiments
