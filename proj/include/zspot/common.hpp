#ifndef ZSPOT_COMMON_HPP
#define ZSPOT_COMMON_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace zspot {

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientInkError : Error { using Error::Error; };
struct EmptyImageError : Error { using Error::Error; };
struct TooShortError : Error { using Error::Error; };
struct OutOfVocabularyError : Error { using Error::Error; };
struct UnmappedGraphemeError : Error { using Error::Error; };
struct EmptyMiddleFormError : Error { using Error::Error; };
struct BandTooNarrowError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

// ---------------------------------------------------------------- rng

// Deterministic generator (splitmix64 core). All corpus randomness flows
// through one instance so a seed fully pins the output.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool chance(double p) { return uniform() < p; }

  private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------- parallel

// Runs fn(chunk_index, begin, end) on fixed index ranges. Chunking depends
// only on n and the thread count, so per-chunk results merged in chunk order
// are reproducible run to run.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    unsigned t = threads ? threads : hw;
    if (t > n) t = static_cast<unsigned>(n);
    if (t <= 1) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::size_t chunk = (n + t - 1) / t;
    for (unsigned i = 0; i < t; ++i) {
        std::size_t b = std::min(n, static_cast<std::size_t>(i) * chunk);
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, i, b, e] { fn(i, b, e); });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------- io

inline void put_u32le(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

inline void put_f64le(std::string& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.append(b, 8);
}

class ByteReader {
  public:
    explicit ByteReader(const std::string& data) : data_(data) {}

    std::uint32_t u32le() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
        pos_ += 4;
        return v;
    }

    double f64le() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
        pos_ += 8;
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw DataError("truncated binary data");
    }
    const std::string& data_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

// Compact decimal formatting used by every text emitter, so artifacts are
// byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<std::string> split_tabs(const std::string& line);

}  // namespace zspot

#endif
