#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "smaq/bytes.hpp"

namespace smaq::test {

// Parses the repo's "case NAME / field hexvalue" vector files.
using VectorCase = std::map<std::string, std::string>;

inline std::vector<VectorCase> load_vector_file(const std::string& relpath) {
    std::string path = std::string(SMAQ_SOURCE_DIR) + "/" + relpath;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing vector file: " + path);
    std::vector<VectorCase> cases;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, value;
        ls >> key;
        std::getline(ls, value);
        if (!value.empty() && value[0] == ' ') value.erase(0, 1);
        if (key == "case") {
            cases.emplace_back();
            cases.back()["case"] = value;
        } else if (!cases.empty()) {
            cases.back()[key] = value;
        }
    }
    return cases;
}

inline ByteVec hexfield(const VectorCase& c, const std::string& key) {
    auto it = c.find(key);
    if (it == c.end()) throw std::runtime_error("missing vector field " + key);
    return from_hex(it->second);
}

}  // namespace smaq::test
