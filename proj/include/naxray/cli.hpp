#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace naxray::cli
{
//! Exit codes: success, tolerance or assertion failure, input or usage error.
enum ExitCode : int
{
    kPass = 0,
    kFail = 1,
    kInputError = 2
};

/*!
 * Flat INI configuration: "key = value" lines under [section] headers.
 * Keys are addressed as "section.key".
 */
class Config
{
  public:
    static Config from_file(std::filesystem::path const& path);
    static Config from_string(std::string const& text);

    bool has(std::string const& key) const;
    std::string str(std::string const& key, std::string const& fallback) const;
    std::string str(std::string const& key) const;  //!< required
    double num(std::string const& key, double fallback) const;
    long long integer(std::string const& key, long long fallback) const;
    bool flag(std::string const& key, bool fallback) const;
    //! Comma-separated list; empty when missing.
    std::vector<std::string> list(std::string const& key) const;
    std::vector<std::string> sections() const;

    void set(std::string const& key, std::string value) { values_[key] = std::move(value); }
    std::filesystem::path base_dir() const { return base_; }
    //! Resolve a path value relative to the config file.
    std::filesystem::path resolve(std::string const& value) const;

  private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_;
};

struct Options
{
    std::string command;
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "naxray-out";
    std::optional<int> threads;
};

//! Entry point: parses argv, dispatches, maps exceptions to exit codes.
int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err);

//! Dispatch a parsed command (used by tests and bindings).
int run_command(Options const& opts, Config const& cfg, std::ostream& out);

std::vector<std::string> commands();
}  // namespace naxray::cli
