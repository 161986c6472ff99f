#include "exitrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "exitrack/errors.hpp"

namespace exitrack {
namespace {

constexpr const char* kMagic = "EXITRACK-CKPT v1";

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffU) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

std::filesystem::path calibration_path(const std::filesystem::path& checkpoint) {
    return checkpoint.string() + ".calib";
}

void save_checkpoint(const TrackerNet& net, const std::filesystem::path& path) {
    const auto& ps = net.params();
    std::ostringstream header;
    header << kMagic << '\n' << net.config().to_kv().to_string();
    for (int i = 0; i < ps.size(); ++i) {
        header << "param " << ps.name(i) << ' ' << ps.block(i) << ' ' << ps.value(i).rows() << ' '
               << ps.value(i).cols() << '\n';
    }
    header << "end\n";

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (int i = 0; i < ps.size(); ++i) {
        const Matrix& m = ps.value(i);
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            const std::uint64_t le = to_le(std::bit_cast<std::uint64_t>(m.data()[k]));
            out.write(reinterpret_cast<const char*>(&le), sizeof le);
        }
    }
    if (!out) throw std::runtime_error("short write on " + path.string());
}

TrackerNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    const std::string source = path.string();
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || line != kMagic) throw ParseError(source, 1, "not a checkpoint");

    KeyValues kv;
    struct Entry {
        std::string name;
        std::string block;
        long rows;
        long cols;
    };
    std::vector<Entry> entries;
    bool ended = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line == "end") {
            ended = true;
            break;
        }
        if (line.rfind("param ", 0) == 0) {
            std::istringstream ss(line.substr(6));
            Entry e;
            if (!(ss >> e.name >> e.block >> e.rows >> e.cols)) throw ParseError(source, lineno, "bad param line");
            entries.push_back(e);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected key=value");
        kv.set(line.substr(0, eq), line.substr(eq + 1));
    }
    if (!ended) throw ParseError(source, lineno, "truncated header");

    TrackerNet net(NetConfig::from_kv(kv));
    auto& ps = net.params();
    if (static_cast<int>(entries.size()) != ps.size()) {
        throw std::runtime_error(source + ": parameter count does not match the network layout");
    }
    for (int i = 0; i < ps.size(); ++i) {
        const Entry& e = entries[static_cast<std::size_t>(i)];
        Matrix& m = ps.value(i);
        if (e.name != ps.name(i) || e.rows != m.rows() || e.cols != m.cols()) {
            throw std::runtime_error(source + ": tensor " + e.name + " does not match the network layout");
        }
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            std::uint64_t le = 0;
            if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) throw std::runtime_error(source + ": truncated data");
            m.data()[k] = std::bit_cast<double>(to_le(le));
        }
    }
    return net;
}

}  // namespace exitrack
