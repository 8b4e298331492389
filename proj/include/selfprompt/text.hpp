#pragma once

// Shared helpers: error types, string utilities, a portable seeded RNG and
// file hashing. Everything else in the library builds on these.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selfprompt {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record or argument violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

namespace text {

std::string trim(std::string_view s);
bool is_blank(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::string collapse_spaces(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Shortened copy of `s` for error messages.
std::string excerpt(std::string_view s, std::size_t max_len = 160);

}  // namespace text

/// splitmix64-seeded xoshiro256** generator. The standard distributions are
/// implementation-defined, so sampling that must be reproducible across
/// toolchains goes through this instead.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    /// Uniform double in [0, 1).
    double uniform();
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace selfprompt
