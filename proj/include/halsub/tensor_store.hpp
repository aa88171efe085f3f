#pragma once

// On-disk formats.
//
// HSD (hidden-state dump) directory:
//   manifest.json      strict JSON, see DatasetManifest
//   layer_<l>.f32      rows x hidden_dim little-endian binary32, row-major,
//                      rows in manifest sample order
//
// HBB (hallucination basis bank) directory:
//   manifest.json      strict JSON, see BasisBank
//   basis_<l>.f32      rows x hidden_dim little-endian binary32, one
//                      right-singular vector per row
//
// All in-core values are binary64; rounding to binary32 happens only when
// bytes are produced.

#include "halsub/common.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace halsub {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kHsdVersion = "HSD1";
inline constexpr const char* kHbbVersion = "HBB1";
inline constexpr double kBankOrthonormalityTol = 1e-4;

enum class Role { clean, counterfactual };
enum class Granularity { token, pooled };
enum class Pooling { mean, none };

struct SampleRecord {
    std::string sample_id;
    Role role = Role::clean;
    int variant = 0;
    std::optional<int> token_count;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetManifest {
    std::string format_version = kHsdVersion;
    std::string model_id;
    int hidden_dim = 0;
    std::vector<int> layers;
    Granularity granularity = Granularity::pooled;
    Pooling pooling = Pooling::mean;
    std::vector<SampleRecord> samples;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

    Index rows_of(const SampleRecord& s) const
    {
        return granularity == Granularity::pooled ? 1 : s.token_count.value_or(0);
    }

    Index total_rows() const
    {
        Index n = 0;
        for (const auto& s : samples) n += rows_of(s);
        return n;
    }

    /// First row of every sample in the layer blocks, plus a final sentinel.
    std::vector<Index> row_offsets() const
    {
        std::vector<Index> off;
        off.reserve(samples.size() + 1);
        Index n = 0;
        for (const auto& s : samples) {
            off.push_back(n);
            n += rows_of(s);
        }
        off.push_back(n);
        return off;
    }

    bool has_layer(int layer) const { return std::find(layers.begin(), layers.end(), layer) != layers.end(); }
};

struct HiddenStateDump {
    DatasetManifest manifest;
    std::map<int, Matrix> blocks;  // layer -> rows x hidden_dim

    const Matrix& block(int layer) const
    {
        auto it = blocks.find(layer);
        require(it != blocks.end(), "layer " + std::to_string(layer) + " not present in dump");
        return it->second;
    }
};

struct BasisBank {
    std::string format_version = kHbbVersion;
    int hidden_dim = 0;
    int rank = 0;
    std::vector<int> layers;
    std::map<int, Matrix> bases;  // layer -> (rows <= rank) x hidden_dim
    std::string source_hash;
    std::map<int, std::string> warnings;  // in-core only, not serialized

    const Matrix& basis(int layer) const
    {
        auto it = bases.find(layer);
        require(it != bases.end(), "layer " + std::to_string(layer) + " not present in bank");
        return it->second;
    }
};

// ---------------------------------------------------------------------------
// Enum text forms

inline const char* to_string(Role r) { return r == Role::clean ? "clean" : "counterfactual"; }
inline const char* to_string(Granularity g) { return g == Granularity::token ? "token" : "pooled"; }
inline const char* to_string(Pooling p) { return p == Pooling::mean ? "mean" : "none"; }

// ---------------------------------------------------------------------------
// Validation

inline void validate_manifest(const DatasetManifest& m)
{
    require(m.format_version == kHsdVersion, "format_version must be HSD1");
    require(m.hidden_dim >= 1, "hidden_dim must be >= 1");
    require(!m.layers.empty(), "layers must be non-empty");
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        require(m.layers[i] >= 0, "layer indices must be non-negative");
        if (i > 0) require(m.layers[i] > m.layers[i - 1], "layers must be strictly increasing");
    }
    if (m.granularity == Granularity::pooled)
        require(m.pooling == Pooling::mean, "granularity=pooled requires pooling=mean");
    require(!m.samples.empty(), "samples must be non-empty");

    std::set<std::string> clean_ids;
    std::set<std::tuple<std::string, Role, int>> seen;
    bool any_clean = false;
    for (const auto& s : m.samples) {
        require(!s.sample_id.empty(), "sample_id must be non-empty");
        if (s.role == Role::clean) {
            require(s.variant == 0, "clean sample " + s.sample_id + " must have variant 0");
            clean_ids.insert(s.sample_id);
            any_clean = true;
        } else {
            require(s.variant >= 1, "counterfactual sample " + s.sample_id + " must have variant >= 1");
        }
        if (m.granularity == Granularity::token)
            require(s.token_count.has_value() && *s.token_count >= 1,
                    "sample " + s.sample_id + " needs token_count >= 1 at token granularity");
        else
            require(!s.token_count.has_value(), "token_count is only allowed at token granularity");
        require(seen.emplace(s.sample_id, s.role, s.variant).second,
                "duplicate record for sample " + s.sample_id);
    }
    // A dump holding only counterfactual records is the counterfactual half of
    // a pair; pairing is then checked when deltas are built.
    if (any_clean)
        for (const auto& s : m.samples)
            if (s.role == Role::counterfactual)
                require(clean_ids.count(s.sample_id) == 1,
                        "counterfactual sample " + s.sample_id + " has no clean record");
}

inline void validate_blocks(const DatasetManifest& m, const std::map<int, Matrix>& blocks)
{
    const Index rows = m.total_rows();
    require(blocks.size() == m.layers.size(), "one block per manifest layer is required");
    for (int layer : m.layers) {
        auto it = blocks.find(layer);
        require(it != blocks.end(), "missing block for layer " + std::to_string(layer));
        require(it->second.cols() == m.hidden_dim,
                "layer " + std::to_string(layer) + ": expected " + std::to_string(m.hidden_dim) + " columns, got " +
                    std::to_string(it->second.cols()));
        require(it->second.rows() == rows, "layer " + std::to_string(layer) + ": expected " + std::to_string(rows) +
                                               " rows, got " + std::to_string(it->second.rows()));
        require(all_finite(it->second), "layer " + std::to_string(layer) + ": non-finite entries");
    }
}

inline void validate_bank(const BasisBank& bank, double tol = kBankOrthonormalityTol)
{
    require(bank.format_version == kHbbVersion, "format_version must be HBB1");
    require(bank.hidden_dim >= 1, "bank hidden_dim must be >= 1");
    require(bank.rank >= 1 && bank.rank <= bank.hidden_dim, "bank rank must be in [1, hidden_dim]");
    require(bank.bases.size() == bank.layers.size(), "one basis per bank layer is required");
    for (int layer : bank.layers) {
        const auto& b = bank.basis(layer);
        require(b.cols() == bank.hidden_dim, "basis " + std::to_string(layer) + ": wrong column count");
        require(b.rows() <= bank.rank, "basis " + std::to_string(layer) + ": more rows than rank");
        for (Index i = 0; i < b.rows(); ++i) {
            require(std::abs(b.row(i).norm() - 1.0) <= tol,
                    "basis " + std::to_string(layer) + ": row " + std::to_string(i) + " is not unit norm");
            for (Index j = 0; j < i; ++j)
                require(std::abs(b.row(i).dot(b.row(j))) <= tol,
                        "basis " + std::to_string(layer) + ": rows " + std::to_string(j) + "," + std::to_string(i) +
                            " are not orthogonal");
        }
    }
}

// ---------------------------------------------------------------------------
// Bytes

using FileSet = std::vector<std::pair<std::string, std::string>>;  // name -> bytes, in canonical order

inline std::string encode_f32(const Matrix& m)
{
    std::string out;
    out.resize(static_cast<std::size_t>(m.size()) * 4);
    std::size_t pos = 0;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j)));
            for (int b = 0; b < 4; ++b) out[pos++] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    return out;
}

inline Matrix decode_f32(const std::string& bytes, Index rows, Index cols)
{
    Matrix m(rows, cols);
    std::size_t pos = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
            m(i, j) = static_cast<double>(std::bit_cast<float>(bits));
        }
    return m;
}

inline std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[digest[i] >> 4]);
        hex.push_back(kHex[digest[i] & 0xF]);
    }
    return hex;
}

inline std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_fileset(const fs::path& dir, const FileSet& files)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
    for (const auto& [name, bytes] : files) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + (dir / name).string());
    }
}

// ---------------------------------------------------------------------------
// Manifest JSON (strict: unknown or missing fields are format errors)

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional, const std::string& where)
{
    if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
    std::set<std::string> allowed;
    for (auto* k : required) {
        allowed.insert(k);
        if (!j.contains(k)) throw FormatError(where + ": missing field '" + std::string(k) + "'");
    }
    for (auto* k : optional) allowed.insert(k);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw FormatError(where + ": unknown field '" + it.key() + "'");
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where)
{
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(where + ": field '" + std::string(key) + "' has the wrong type");
    }
}

} // namespace detail

inline json manifest_to_json(const DatasetManifest& m)
{
    json samples = json::array();
    for (const auto& s : m.samples) {
        json js;
        js["sample_id"] = s.sample_id;
        js["role"] = to_string(s.role);
        js["variant"] = s.variant;
        if (s.token_count) js["token_count"] = *s.token_count;
        samples.push_back(std::move(js));
    }
    json j;
    j["format_version"] = m.format_version;
    j["model_id"] = m.model_id;
    j["hidden_dim"] = m.hidden_dim;
    j["layers"] = m.layers;
    j["granularity"] = to_string(m.granularity);
    j["pooling"] = to_string(m.pooling);
    j["samples"] = std::move(samples);
    return j;
}

inline DatasetManifest manifest_from_json(const json& j)
{
    const std::string where = "HSD manifest";
    detail::check_keys(j, {"format_version", "model_id", "hidden_dim", "layers", "granularity", "pooling", "samples"},
                       {}, where);
    DatasetManifest m;
    m.format_version = detail::get_field<std::string>(j, "format_version", where);
    if (m.format_version != kHsdVersion) throw FormatError(where + ": unsupported format_version '" + m.format_version + "'");
    m.model_id = detail::get_field<std::string>(j, "model_id", where);
    m.hidden_dim = detail::get_field<int>(j, "hidden_dim", where);
    m.layers = detail::get_field<std::vector<int>>(j, "layers", where);
    const auto gran = detail::get_field<std::string>(j, "granularity", where);
    if (gran == "token") m.granularity = Granularity::token;
    else if (gran == "pooled") m.granularity = Granularity::pooled;
    else throw FormatError(where + ": unknown granularity '" + gran + "'");
    const auto pool = detail::get_field<std::string>(j, "pooling", where);
    if (pool == "mean") m.pooling = Pooling::mean;
    else if (pool == "none") m.pooling = Pooling::none;
    else throw FormatError(where + ": unknown pooling '" + pool + "'");
    const auto& samples = j.at("samples");
    if (!samples.is_array()) throw FormatError(where + ": samples must be an array");
    for (const auto& js : samples) {
        detail::check_keys(js, {"sample_id", "role", "variant"}, {"token_count"}, where + " sample");
        SampleRecord s;
        s.sample_id = detail::get_field<std::string>(js, "sample_id", where);
        const auto role = detail::get_field<std::string>(js, "role", where);
        if (role == "clean") s.role = Role::clean;
        else if (role == "counterfactual") s.role = Role::counterfactual;
        else throw FormatError(where + ": unknown role '" + role + "'");
        s.variant = detail::get_field<int>(js, "variant", where);
        if (js.contains("token_count")) s.token_count = detail::get_field<int>(js, "token_count", where);
        m.samples.push_back(std::move(s));
    }
    return m;
}

inline std::string layer_file_name(int layer) { return "layer_" + std::to_string(layer) + ".f32"; }
inline std::string basis_file_name(int layer) { return "basis_" + std::to_string(layer) + ".f32"; }

// ---------------------------------------------------------------------------
// HSD

inline FileSet serialize_hsd(const DatasetManifest& manifest, const std::map<int, Matrix>& blocks)
{
    validate_manifest(manifest);
    validate_blocks(manifest, blocks);
    FileSet files;
    files.emplace_back("manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    for (int layer : manifest.layers) files.emplace_back(layer_file_name(layer), encode_f32(blocks.at(layer)));
    return files;
}

inline std::string content_hash(const FileSet& files)
{
    std::string all;
    for (const auto& [name, bytes] : files) all += bytes;
    return sha256_hex(all);
}

/// SHA-256 over manifest.json followed by each layer file in layer order.
inline std::string hsd_content_hash(const HiddenStateDump& dump)
{
    return content_hash(serialize_hsd(dump.manifest, dump.blocks));
}

inline void write_hsd(const DatasetManifest& manifest, const std::map<int, Matrix>& blocks, const fs::path& dir)
{
    write_fileset(dir, serialize_hsd(manifest, blocks));
}

inline void write_hsd(const HiddenStateDump& dump, const fs::path& dir) { write_hsd(dump.manifest, dump.blocks, dir); }

inline json parse_manifest_file(const fs::path& path)
{
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline HiddenStateDump read_hsd(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    HiddenStateDump dump;
    dump.manifest = manifest_from_json(parse_manifest_file(dir / "manifest.json"));
    validate_manifest(dump.manifest);
    const Index rows = dump.manifest.total_rows();
    const Index d = dump.manifest.hidden_dim;
    for (int layer : dump.manifest.layers) {
        const auto path = dir / layer_file_name(layer);
        if (!fs::exists(path)) throw FormatError("layer " + std::to_string(layer) + ": missing " + path.filename().string());
        const auto expected = static_cast<std::uintmax_t>(rows * d * 4);
        const auto actual = fs::file_size(path);
        if (actual != expected)
            throw FormatError("layer " + std::to_string(layer) + ": " + path.filename().string() + " has " +
                              std::to_string(actual) + " bytes, expected " + std::to_string(expected));
        dump.blocks.emplace(layer, decode_f32(read_file(path), rows, d));
    }
    validate_blocks(dump.manifest, dump.blocks);
    return dump;
}

// ---------------------------------------------------------------------------
// HBB

inline FileSet serialize_bank(const BasisBank& bank)
{
    validate_bank(bank);
    json j;
    j["format_version"] = bank.format_version;
    j["hidden_dim"] = bank.hidden_dim;
    j["rank"] = bank.rank;
    j["layers"] = bank.layers;
    json rows = json::array();
    for (int layer : bank.layers) rows.push_back(bank.basis(layer).rows());
    j["layer_rows"] = std::move(rows);
    j["source_hash"] = bank.source_hash;
    FileSet files;
    files.emplace_back("manifest.json", j.dump(2) + "\n");
    for (int layer : bank.layers) files.emplace_back(basis_file_name(layer), encode_f32(bank.basis(layer)));
    return files;
}

inline void write_bank(const BasisBank& bank, const fs::path& dir) { write_fileset(dir, serialize_bank(bank)); }

inline BasisBank read_bank(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    const json j = parse_manifest_file(dir / "manifest.json");
    const std::string where = "HBB manifest";
    detail::check_keys(j, {"format_version", "hidden_dim", "rank", "layers", "layer_rows", "source_hash"}, {}, where);
    BasisBank bank;
    bank.format_version = detail::get_field<std::string>(j, "format_version", where);
    if (bank.format_version != kHbbVersion)
        throw FormatError(where + ": unsupported format_version '" + bank.format_version + "'");
    bank.hidden_dim = detail::get_field<int>(j, "hidden_dim", where);
    bank.rank = detail::get_field<int>(j, "rank", where);
    bank.layers = detail::get_field<std::vector<int>>(j, "layers", where);
    const auto rows = detail::get_field<std::vector<int>>(j, "layer_rows", where);
    bank.source_hash = detail::get_field<std::string>(j, "source_hash", where);
    if (rows.size() != bank.layers.size()) throw FormatError(where + ": layer_rows length differs from layers");
    if (bank.hidden_dim < 1) throw FormatError(where + ": hidden_dim must be >= 1");
    for (std::size_t i = 0; i < bank.layers.size(); ++i) {
        const int layer = bank.layers[i];
        if (rows[i] < 0) throw FormatError(where + ": negative row count");
        const auto path = dir / basis_file_name(layer);
        if (!fs::exists(path)) throw FormatError("basis " + std::to_string(layer) + ": missing " + path.filename().string());
        const auto expected = static_cast<std::uintmax_t>(rows[i]) * static_cast<std::uintmax_t>(bank.hidden_dim) * 4u;
        if (fs::file_size(path) != expected)
            throw FormatError("basis " + std::to_string(layer) + ": size mismatch, expected " + std::to_string(expected) +
                              " bytes");
        bank.bases.emplace(layer, decode_f32(read_file(path), rows[i], bank.hidden_dim));
    }
    try {
        validate_bank(bank);
    } catch (const InvalidInput& e) {
        throw FormatError(std::string("corrupt bank: ") + e.what());
    }
    return bank;
}

} // namespace halsub
