#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "placedup/metric_train.hpp"
#include "placedup/util.hpp"

namespace placedup {

// Checkpoint layout: one JSON metadata line (version, dims, loss and distance
// kinds, sources, matrix directory), then the listed matrices as row-major
// little-endian 64-bit floats, concatenated in directory order. Round-trips
// are byte-exact.

namespace detail {

inline void write_f64_le(std::ostream& out, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
        unsigned char buf[8];
        for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
        out.write(reinterpret_cast<const char*>(buf), 8);
    }
}

inline void read_f64_le(std::istream& in, double* data, std::size_t n, const std::string& what) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char buf[8];
        in.read(reinterpret_cast<char*>(buf), 8);
        if (!in) throw FormatError("checkpoint: truncated matrix data in " + what);
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[b];
        data[i] = std::bit_cast<double>(bits);
    }
}

}  // namespace detail

struct Checkpoint {
    MetricModel model;
    Mat centers;               // empty when the model trained without denoising
    std::string config_hash;   // recorded by the training stage
    std::uint64_t seed = 0;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const MetricModel& m = ckpt.model;
    std::vector<std::pair<std::string, const Mat*>> mats = {
        {"trunk_w1", &m.w1}, {"trunk_w2", &m.w2}, {"key_w", &m.wk}, {"value_w", &m.wv}, {"source_q", &m.q}};
    if (!m.bilinear.empty()) mats.emplace_back("bilinear_m", &m.bilinear);
    if (!ckpt.centers.empty()) mats.emplace_back("centers", &ckpt.centers);

    Mat b1(1, static_cast<int>(m.b1.size()));
    b1.a = m.b1;
    Mat b2(1, static_cast<int>(m.b2.size()));
    b2.a = m.b2;
    Mat bk(1, static_cast<int>(m.bk.size()));
    bk.a = m.bk;
    Mat bv(1, static_cast<int>(m.bv.size()));
    bv.a = m.bv;
    mats.emplace_back("trunk_b1", &b1);
    mats.emplace_back("trunk_b2", &b2);
    mats.emplace_back("key_b", &bk);
    mats.emplace_back("value_b", &bv);

    nlohmann::ordered_json header;
    header["format"] = "placedup-checkpoint";
    header["version"] = 1;
    header["input_dim"] = m.input_dim();
    header["hidden1"] = m.hidden1();
    header["hidden2"] = m.hidden2();
    header["dk"] = m.dk();
    header["dv"] = m.dv();
    header["loss"] = to_string(m.loss);
    header["distance"] = to_string(m.distance);
    header["alpha"] = m.alpha;
    header["sources"] = m.sources;
    header["config_hash"] = ckpt.config_hash;
    header["seed"] = ckpt.seed;
    nlohmann::ordered_json dir = nlohmann::ordered_json::array();
    for (const auto& [name, mat] : mats) dir.push_back({{"name", name}, {"rows", mat->rows}, {"cols", mat->cols}});
    header["matrices"] = dir;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_checkpoint: cannot open " + path);
    out << header.dump() << '\n';
    for (const auto& [name, mat] : mats) {
        (void)name;
        detail::write_f64_le(out, mat->a.data(), mat->a.size());
    }
    if (!out) throw FormatError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("load_checkpoint: missing header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed checkpoint header: " + e.what());
    }
    if (header.value("format", "") != "placedup-checkpoint")
        throw FormatError(path + ": not a placedup checkpoint");

    Checkpoint ckpt;
    MetricModel& m = ckpt.model;
    m.alpha = header.at("alpha").get<double>();
    m.loss = loss_kind_from(header.at("loss").get<std::string>());
    m.distance = distance_kind_from(header.at("distance").get<std::string>());
    m.sources = header.at("sources").get<std::vector<std::string>>();
    ckpt.config_hash = header.value("config_hash", "");
    ckpt.seed = header.value("seed", 0ull);

    for (const auto& entry : header.at("matrices")) {
        std::string name = entry.at("name").get<std::string>();
        int rows = entry.at("rows").get<int>();
        int cols = entry.at("cols").get<int>();
        Mat mat(rows, cols);
        detail::read_f64_le(in, mat.a.data(), mat.a.size(), name);
        if (name == "trunk_w1")
            m.w1 = std::move(mat);
        else if (name == "trunk_w2")
            m.w2 = std::move(mat);
        else if (name == "key_w")
            m.wk = std::move(mat);
        else if (name == "value_w")
            m.wv = std::move(mat);
        else if (name == "source_q")
            m.q = std::move(mat);
        else if (name == "bilinear_m")
            m.bilinear = std::move(mat);
        else if (name == "centers")
            ckpt.centers = std::move(mat);
        else if (name == "trunk_b1")
            m.b1 = std::move(mat.a);
        else if (name == "trunk_b2")
            m.b2 = std::move(mat.a);
        else if (name == "key_b")
            m.bk = std::move(mat.a);
        else if (name == "value_b")
            m.bv = std::move(mat.a);
        else
            throw FormatError(path + ": unknown matrix '" + name + "'");
    }
    if (m.w1.empty() || m.w2.empty() || m.wk.empty() || m.wv.empty())
        throw FormatError(path + ": checkpoint is missing model matrices");
    int declared = header.at("input_dim").get<int>();
    if (m.input_dim() != declared)
        throw FormatError(path + ": input_dim " + std::to_string(declared) + " does not match trunk matrix");
    return ckpt;
}

}  // namespace placedup
