#include "zspot/manifest.hpp"

#include <filesystem>
#include <set>
#include <sstream>

namespace zspot {

std::string dirname_of(const std::string& path) {
    std::filesystem::path p(path);
    auto parent = p.parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

std::string join_path(const std::string& dir, const std::string& name) {
    if (name.empty()) return name;
    std::filesystem::path p(name);
    if (p.is_absolute()) return name;
    return (std::filesystem::path(dir) / p).string();
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory: " + path);
}

std::string Manifest::resolve(const std::string& path) const {
    return join_path(base_dir, path);
}

const ManifestRecord* Manifest::find(const std::string& line_id) const {
    for (const auto& r : records)
        if (r.line_id == line_id) return &r;
    return nullptr;
}

Manifest parse_manifest(const std::string& text, const std::string& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 3 && cols.size() != 4)
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": expected 3 or 4 columns");
        if (!seen.insert(cols[0]).second)
            throw DataError("manifest line " + std::to_string(line_no) +
                            ": duplicate line id '" + cols[0] + "'");
        ManifestRecord r;
        r.line_id = cols[0];
        r.image_path = cols[1];
        r.transcription = cols[2];
        if (cols.size() == 4) r.zones_path = cols[3];
        m.records.push_back(std::move(r));
    }
    return m;
}

Manifest load_manifest(const std::string& path) {
    return parse_manifest(read_file(path), dirname_of(path));
}

std::string encode_manifest(const Manifest& m) {
    std::string out;
    for (const auto& r : m.records) {
        out += r.line_id + "\t" + r.image_path + "\t" + r.transcription;
        if (!r.zones_path.empty()) out += "\t" + r.zones_path;
        out += "\n";
    }
    return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
    write_file(path, encode_manifest(m));
}

// ---------------------------------------------------------------- config

const std::string* KeyValueConfig::find(const std::string& key) const {
    const std::string* hit = nullptr;
    for (const auto& [k, v] : entries)
        if (k == key) hit = &v;  // later keys win
    return hit;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        return std::stoi(*v);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not an integer: " + *v);
    }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not a number: " + *v);
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': not an integer: " + *v);
    }
}

KeyValueConfig parse_config(const std::string& text) {
    KeyValueConfig c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(line_no) + ": missing '='");
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        auto strip = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            auto end = s.find_last_not_of(" \t");
            s.erase(end == std::string::npos ? 0 : end + 1);
        };
        strip(key);
        strip(value);
        if (key.empty())
            throw DataError("config line " + std::to_string(line_no) + ": empty key");
        c.set(key, value);
    }
    return c;
}

KeyValueConfig load_config(const std::string& path) {
    return parse_config(read_file(path));
}

std::string encode_config(const KeyValueConfig& c) {
    std::string out;
    for (const auto& [k, v] : c.entries) out += k + "=" + v + "\n";
    return out;
}

}  // namespace zspot
