#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace dragon {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing and seeded randomness
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a base seed with a label so independent pipeline steps draw from
/// independent streams regardless of scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

/// mt19937_64 plus hand-rolled bounded draws. The engine's output sequence is
/// fixed by the standard; the distribution helpers in <random> are not, so all
/// sampling goes through this class to keep artifacts identical across
/// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool is_valid_utf8(std::string_view s);

struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Whitespace-delimited tokens with byte offsets.
std::vector<TokenSpan> whitespace_tokens(std::string_view text);
std::size_t count_whitespace_tokens(std::string_view text);

/// Lowercased alphanumeric words (UTF-8 bytes >= 0x80 count as word bytes).
std::vector<std::string> word_tokens(std::string_view text);

/// Words of `text` that are not on a small English stop-list.
std::vector<std::string> content_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Parses newline-delimited JSON. Blank lines are skipped.
std::vector<json> parse_jsonl(std::string_view content, std::string_view origin = "<memory>");
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& rows);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

// ---------------------------------------------------------------------------
// Bounded parallel map
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on at most `workers` threads and returns results
/// in index order. The first exception thrown is rethrown after all workers join.
template <typename Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out(n);
    if (n == 0) {
        return out;
    }
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = fn(i);
        }
        return out;
    }

    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    auto body = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next >= n || failure) {
                    return;
                }
                i = next++;
            }
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(body);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

} // namespace dragon
