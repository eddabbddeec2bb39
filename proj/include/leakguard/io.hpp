#pragma once

// File formats:
//   metadata      JSONL  {"id", "label": "benign"|"malicious", "timestamp": "YYYY-MM[-DD]", "family"?}
//   sparse reps   JSONL  header {"dim": D}, then {"id", "indices": [...]}
//   dense reps    LKGE   16-byte header: "LKGE", u32 rows, u32 dim, u32 reserved (0);
//                        rows*dim little-endian f32, row-major; sidecar JSONL {"row", "id"}
//                 CSV    id,v0,...,v{D-1} (optional header row starting with "id")
//   predictions   JSONL  optional header {"model_name"}, then {"id", "prediction"}
//   schedule      JSONL  {"period", "add_ids": [...], "budget"}
//   ground truth  JSONL  {"dup_id", "source_id", "exact"}

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "leakguard/core.hpp"
#include "leakguard/harness.hpp"
#include "leakguard/synth.hpp"

namespace leakguard {

namespace fs = std::filesystem;

inline constexpr char embedding_magic[4] = {'L', 'K', 'G', 'E'};

inline fs::path default_sidecar(const fs::path& matrix) { return fs::path(matrix.string() + ".ids.jsonl"); }

namespace detail {

inline std::string where(const fs::path& p, std::size_t line) { return p.string() + ":" + std::to_string(line) + ": "; }

/// Calls fn(json, line_no) for each non-blank line.
template <class Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(where(path, n) + "invalid JSON: " + e.what(), n);
        }
        if (!j.is_object()) throw DataError(where(path, n) + "expected a JSON object", n);
        fn(j, n);
    }
}

inline std::string require_string(const nlohmann::json& j, const char* key, const fs::path& p, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw DataError(where(p, line) + "missing or non-string field \"" + key + "\"", line);
    return it->get<std::string>();
}

inline std::uint32_t read_u32_le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

struct RepTable {
    RepKind kind = RepKind::binary;
    std::uint32_t dim = 0;
    std::unordered_map<SampleId, Representation> by_id;
    std::vector<SampleId> order;

    void put(SampleId id, Representation rep, const fs::path& p, std::size_t line) {
        if (!by_id.emplace(id, std::move(rep)).second)
            throw DataError(where(p, line) + "duplicate representation for id " + id, line);
        order.push_back(std::move(id));
    }
};

inline RepTable read_sparse(const fs::path& path) {
    RepTable t;
    t.kind = RepKind::binary;
    bool have_header = false;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        if (!have_header) {
            auto d = j.find("dim");
            if (d == j.end() || !d->is_number_unsigned() || d->get<std::uint64_t>() == 0 ||
                d->get<std::uint64_t>() > UINT32_MAX)
                throw DataError(where(path, line) + "first line must be a header {\"dim\": positive int}", line);
            t.dim = d->get<std::uint32_t>();
            have_header = true;
            return;
        }
        std::string id = require_string(j, "id", path, line);
        auto idx = j.find("indices");
        if (idx == j.end() || !idx->is_array()) throw DataError(where(path, line) + "missing \"indices\" array", line);
        BinaryFeatureVector v{t.dim, {}};
        v.indices.reserve(idx->size());
        for (const auto& x : *idx) {
            if (!x.is_number_unsigned()) throw DataError(where(path, line) + "indices must be non-negative integers", line);
            auto i = x.get<std::uint64_t>();
            if (i >= t.dim)
                throw DataError(where(path, line) + "dim mismatch: index " + std::to_string(i) + " >= dim " +
                                    std::to_string(t.dim),
                                line);
            v.indices.push_back(static_cast<std::uint32_t>(i));
        }
        std::sort(v.indices.begin(), v.indices.end());
        if (std::adjacent_find(v.indices.begin(), v.indices.end()) != v.indices.end())
            throw DataError(where(path, line) + "repeated feature index", line);
        t.put(std::move(id), std::move(v), path, line);
    });
    if (!have_header) throw DataError(path.string() + ": missing {\"dim\": ...} header");
    return t;
}

inline RepTable read_lkge(const fs::path& path, const fs::path& sidecar) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), 16)) throw DataError(path.string() + ": truncated header");
    if (std::memcmp(header, embedding_magic, 4) != 0) throw DataError(path.string() + ": bad magic");
    const std::uint32_t rows = read_u32_le(header + 4);
    const std::uint32_t dim = read_u32_le(header + 8);
    if (dim == 0) throw DataError(path.string() + ": dim must be positive");
    std::vector<unsigned char> body(static_cast<std::size_t>(rows) * dim * 4);
    if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size())))
        throw DataError(path.string() + ": file shorter than rows*dim floats");
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after matrix");

    std::vector<std::optional<SampleId>> ids(rows);
    for_each_jsonl(sidecar, [&](const nlohmann::json& j, std::size_t line) {
        auto r = j.find("row");
        if (r == j.end() || !r->is_number_unsigned() || r->get<std::uint64_t>() >= rows)
            throw DataError(where(sidecar, line) + "\"row\" missing or out of range", line);
        auto row = r->get<std::size_t>();
        if (ids[row]) throw DataError(where(sidecar, line) + "row " + std::to_string(row) + " mapped twice", line);
        ids[row] = require_string(j, "id", sidecar, line);
    });

    RepTable t;
    t.kind = RepKind::embedding;
    t.dim = dim;
    for (std::uint32_t r = 0; r < rows; ++r) {
        if (!ids[r]) throw DataError(sidecar.string() + ": no id for row " + std::to_string(r));
        DenseEmbedding e;
        e.values.resize(dim);
        for (std::uint32_t d = 0; d < dim; ++d)
            e.values[d] = std::bit_cast<float>(read_u32_le(body.data() + (static_cast<std::size_t>(r) * dim + d) * 4));
        if (!e.finite()) throw DataError(path.string() + ": non-finite value in row " + std::to_string(r));
        t.put(*ids[r], std::move(e), sidecar, 0);
    }
    return t;
}

inline RepTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    RepTable t;
    t.kind = RepKind::embedding;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (t.order.empty() && t.dim == 0 && fields.front() == "id") continue;  // header row
        if (fields.size() < 2) throw DataError(where(path, n) + "expected id followed by values", n);
        DenseEmbedding e;
        for (std::size_t f = 1; f < fields.size(); ++f) {
            auto s = fields[f];
            while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
            while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
            float v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size())
                throw DataError(where(path, n) + "unparseable value '" + std::string(s) + "'", n);
            e.values.push_back(v);
        }
        if (!e.finite()) throw DataError(where(path, n) + "non-finite embedding value", n);
        if (t.dim == 0)
            t.dim = e.dim();
        else if (e.dim() != t.dim)
            throw DataError(where(path, n) + "dim mismatch: " + std::to_string(e.dim()) + " values, expected " +
                                std::to_string(t.dim),
                            n);
        t.put(std::string(fields.front()), std::move(e), path, n);
    }
    if (t.dim == 0) throw DataError(path.string() + ": no embedding rows");
    return t;
}

inline RepTable read_representations(const fs::path& path, const std::optional<fs::path>& sidecar) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, embedding_magic, 4) == 0)
        return read_lkge(path, sidecar.value_or(default_sidecar(path)));
    in.clear();
    in.seekg(0);
    char c = 0;
    while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
    }
    if (c == '{') return read_sparse(path);
    return read_csv(path);
}

}  // namespace detail

/// Joins metadata rows with their representations by id.
inline Dataset load_dataset(const fs::path& metadata_path, const fs::path& representation_path,
                            const std::optional<fs::path>& sidecar = {}) {
    detail::RepTable reps = detail::read_representations(representation_path, sidecar);

    std::vector<Sample> samples;
    std::unordered_map<SampleId, std::size_t> seen;
    detail::for_each_jsonl(metadata_path, [&](const nlohmann::json& j, std::size_t line) {
        Sample s;
        s.id = detail::require_string(j, "id", metadata_path, line);
        if (s.id.empty()) throw DataError(detail::where(metadata_path, line) + "empty id", line);
        if (!seen.emplace(s.id, line).second)
            throw DataError(detail::where(metadata_path, line) + "duplicate id at line " + std::to_string(line) + ": " + s.id,
                            line);
        auto label_str = detail::require_string(j, "label", metadata_path, line);
        auto label = parse_label(label_str);
        if (!label)
            throw DataError(detail::where(metadata_path, line) + "label must be benign or malicious, got '" + label_str + "'",
                            line);
        s.label = *label;
        auto ts_str = detail::require_string(j, "timestamp", metadata_path, line);
        auto ts = Timestamp::parse(ts_str);
        if (!ts) throw DataError(detail::where(metadata_path, line) + "unparseable timestamp '" + ts_str + "'", line);
        s.timestamp = *ts;
        if (auto f = j.find("family"); f != j.end() && !f->is_null()) {
            if (!f->is_string()) throw DataError(detail::where(metadata_path, line) + "family must be a string", line);
            s.family = f->get<std::string>();
        }
        auto rep = reps.by_id.find(s.id);
        if (rep == reps.by_id.end())
            throw DataError(detail::where(metadata_path, line) + "missing representation for id " + s.id, line);
        s.representation = std::move(rep->second);
        reps.by_id.erase(rep);
        samples.push_back(std::move(s));
    });
    if (!reps.by_id.empty()) {
        for (const auto& id : reps.order)
            if (reps.by_id.count(id)) throw DataError(representation_path.string() + ": representation for unknown id " + id);
    }
    return Dataset::create(std::move(samples), Schema{reps.kind, reps.dim});
}

enum class EmbeddingFormat : std::uint8_t { lkge, csv };

inline void write_metadata(const Dataset& ds, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const Sample& s : ds) {
        nlohmann::ordered_json j{{"id", s.id}, {"label", to_string(s.label)}, {"timestamp", s.timestamp.to_string()}};
        if (s.family) j["family"] = *s.family;
        out << j.dump() << '\n';
    }
}

inline void write_representations(const Dataset& ds, const fs::path& path,
                                  EmbeddingFormat format = EmbeddingFormat::lkge) {
    if (ds.schema().kind == RepKind::binary) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << nlohmann::json{{"dim", ds.schema().dim}}.dump() << '\n';
        for (const Sample& s : ds) {
            nlohmann::ordered_json j{{"id", s.id},
                                     {"indices", std::get<BinaryFeatureVector>(s.representation).indices}};
            out << j.dump() << '\n';
        }
        return;
    }
    if (format == EmbeddingFormat::csv) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        char buf[32];
        for (const Sample& s : ds) {
            out << s.id;
            for (float v : std::get<DenseEmbedding>(s.representation).values) {
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
                out << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
            }
            out << '\n';
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(embedding_magic, 4);
    detail::write_u32_le(out, static_cast<std::uint32_t>(ds.size()));
    detail::write_u32_le(out, ds.schema().dim);
    detail::write_u32_le(out, 0);
    for (const Sample& s : ds)
        for (float v : std::get<DenseEmbedding>(s.representation).values)
            detail::write_u32_le(out, std::bit_cast<std::uint32_t>(v));
    std::ofstream side(default_sidecar(path));
    if (!side) throw DataError("cannot write " + default_sidecar(path).string());
    for (std::size_t i = 0; i < ds.size(); ++i)
        side << nlohmann::ordered_json{{"row", i}, {"id", ds[i].id}}.dump() << '\n';
}

inline void write_dataset(const Dataset& ds, const fs::path& metadata_path, const fs::path& representation_path,
                          EmbeddingFormat format = EmbeddingFormat::lkge) {
    write_metadata(ds, metadata_path);
    write_representations(ds, representation_path, format);
}

inline PredictionSet ingest_predictions(const fs::path& path) {
    PredictionSet ps;
    ps.model_name = path.stem().string();
    bool first = true;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        if (first && !j.contains("id") && j.contains("model_name")) {
            ps.model_name = detail::require_string(j, "model_name", path, line);
            first = false;
            return;
        }
        first = false;
        auto id = detail::require_string(j, "id", path, line);
        auto label_str = detail::require_string(j, "prediction", path, line);
        auto label = parse_label(label_str);
        if (!label) throw DataError(detail::where(path, line) + "unknown label '" + label_str + "'", line);
        if (!ps.predictions.emplace(id, *label).second)
            throw DataError(detail::where(path, line) + "duplicate id " + id, line);
    });
    return ps;
}

inline void write_predictions(const PredictionSet& ps, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << nlohmann::ordered_json{{"model_name", ps.model_name}}.dump() << '\n';
    std::map<SampleId, Label> sorted(ps.predictions.begin(), ps.predictions.end());
    for (const auto& [id, l] : sorted)
        out << nlohmann::ordered_json{{"id", id}, {"prediction", to_string(l)}}.dump() << '\n';
}

inline AdditionsSchedule load_schedule(const fs::path& path) {
    AdditionsSchedule sched;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        ScheduleEntry e;
        e.period = detail::require_string(j, "period", path, line);
        auto ids = j.find("add_ids");
        if (ids == j.end() || !ids->is_array()) throw DataError(detail::where(path, line) + "missing \"add_ids\"", line);
        for (const auto& x : *ids) {
            if (!x.is_string()) throw DataError(detail::where(path, line) + "add_ids must be strings", line);
            e.add_ids.push_back(x.get<std::string>());
        }
        auto b = j.find("budget");
        if (b != j.end() && !b->is_number_unsigned())
            throw DataError(detail::where(path, line) + "budget must be a non-negative integer", line);
        e.budget = b != j.end() ? b->get<std::size_t>() : e.add_ids.size();
        if (sched.find(e.period)) throw DataError(detail::where(path, line) + "period " + e.period + " listed twice", line);
        sched.entries.push_back(std::move(e));
    });
    return sched;
}

inline void write_schedule(const AdditionsSchedule& sched, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& e : sched.entries)
        out << nlohmann::ordered_json{{"period", e.period}, {"add_ids", e.add_ids}, {"budget", e.budget}}.dump() << '\n';
}

inline void write_ground_truth(std::span<const PlantedDuplicate> truth, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& d : truth)
        out << nlohmann::ordered_json{{"dup_id", d.dup_id}, {"source_id", d.source_id}, {"exact", d.exact}}.dump() << '\n';
}

inline std::vector<PlantedDuplicate> load_ground_truth(const fs::path& path) {
    std::vector<PlantedDuplicate> out;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        auto e = j.find("exact");
        if (e == j.end() || !e->is_boolean()) throw DataError(detail::where(path, line) + "missing \"exact\"", line);
        out.push_back({detail::require_string(j, "dup_id", path, line),
                       detail::require_string(j, "source_id", path, line), e->get<bool>()});
    });
    return out;
}

}  // namespace leakguard
