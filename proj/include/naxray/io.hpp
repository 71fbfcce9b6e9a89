#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "naxray/bayes.hpp"
#include "naxray/fields.hpp"
#include "naxray/transport.hpp"

namespace naxray::io
{
namespace fs = std::filesystem;

//! %.17g formatting used everywhere numbers hit a file.
std::string fmt(double x);
//! JSON text with every float printed by fmt, keys in sorted order.
std::string dump(nlohmann::json const& j, int indent = 2);

//! Write via a temporary file in the same directory and rename into place.
void atomic_write(fs::path const& path, std::string const& contents);
std::string read_text(fs::path const& path);

//! Sidecar path for a binary file: same stem with ".json".
fs::path sidecar_of(fs::path const& bin);

/*!
 * Field file: little-endian float64 coefficients (re, im interleaved; modes
 * with axis 0 slowest, then the m x m block row-major) plus a JSON sidecar
 * with d, m, L, modes, structure, delta and layout.
 */
void write_field(fs::path const& bin, PotentialField const& f);
PotentialField read_field(fs::path const& path);
nlohmann::json field_sidecar(PotentialField const& f, std::string const& data_file);

//! One JSON object per record: x, v, value (row-major [re, im] pairs).
std::string scattering_jsonl(std::span<ScatteringRecord const> records);
std::vector<ScatteringRecord> parse_scattering_jsonl(std::string const& text);
//! Binary mirror: per record x (d), v (d), value (2 m^2) float64, with a sidecar.
void write_scattering_bin(fs::path const& bin, std::span<ScatteringRecord const> records);
std::vector<ScatteringRecord> read_scattering_bin(fs::path const& bin);

//! Records {x, v, y}; metadata (m, structure, noise_sigma, truth_id) goes to a sidecar.
void write_dataset(fs::path const& jsonl, Dataset const& ds);
Dataset read_dataset(fs::path const& jsonl);

struct CsvTable
{
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    std::string str() const;
};

nlohmann::json vec_to_json(Vec const& v);
Vec vec_from_json(nlohmann::json const& j);
}  // namespace naxray::io
