#ifndef ZSPOT_MANIFEST_HPP
#define ZSPOT_MANIFEST_HPP

#include <map>
#include <string>
#include <vector>

#include "zspot/common.hpp"

namespace zspot {

struct ManifestRecord {
    std::string line_id;
    std::string image_path;
    std::string transcription;
    std::string zones_path;  // optional ground-truth reference
};

struct Manifest {
    std::vector<ManifestRecord> records;
    std::string base_dir;  // directory of the manifest file

    std::string resolve(const std::string& path) const;
    const ManifestRecord* find(const std::string& line_id) const;
};

// TSV: line_id image_path transcription [zones_path]; ids must be unique.
Manifest parse_manifest(const std::string& text, const std::string& base_dir);
Manifest load_manifest(const std::string& path);
std::string encode_manifest(const Manifest& m);
void save_manifest(const Manifest& m, const std::string& path);

// Plain key=value configuration, '#' comments, later keys win.
struct KeyValueConfig {
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(const std::string& key) const;
    void set(const std::string& key, const std::string& value);
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
};

KeyValueConfig parse_config(const std::string& text);
KeyValueConfig load_config(const std::string& path);
std::string encode_config(const KeyValueConfig& c);

std::string dirname_of(const std::string& path);
std::string join_path(const std::string& dir, const std::string& name);
void ensure_dir(const std::string& path);

}  // namespace zspot

#endif
