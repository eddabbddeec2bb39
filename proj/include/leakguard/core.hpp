#pragma once

// Domain types shared by every leakguard module: samples, representations,
// timestamps and the immutable Dataset container.

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

namespace leakguard {

/// Input data violates a documented invariant. `line()` is 1-based, 0 when
/// the error is not tied to a file line.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// An internal consistency check failed; indicates a bug, not bad input.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using SampleId = std::string;
using IdSet = std::set<SampleId>;

// Malicious is the positive class everywhere.
enum class Label : std::uint8_t { benign, malicious };

inline std::string_view to_string(Label l) { return l == Label::malicious ? "malicious" : "benign"; }

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "benign") return Label::benign;
    if (s == "malicious") return Label::malicious;
    return std::nullopt;
}

inline Label flip(Label l) { return l == Label::malicious ? Label::benign : Label::malicious; }

/// Calendar month ("YYYY-MM") or full date ("YYYY-MM-DD"). Ordering uses the
/// earliest day of the period, so "2019-03" == "2019-03-01" when compared.
class Timestamp {
public:
    Timestamp() = default;

    static Timestamp month(int year, unsigned month) { return from_parts(year, month, 0); }
    static Timestamp date(int year, unsigned month, unsigned day) { return from_parts(year, month, day); }

    static std::optional<Timestamp> parse(std::string_view s) {
        auto num = [](std::string_view part, int& out) {
            if (part.empty()) return false;
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
            return ec == std::errc{} && p == part.data() + part.size();
        };
        int y = 0, m = 0, d = 0;
        if (s.size() == 7 && s[4] == '-') {
            if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m)) return std::nullopt;
        } else if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
            if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) || !num(s.substr(8, 2), d)) return std::nullopt;
            if (d < 1) return std::nullopt;
        } else {
            return std::nullopt;
        }
        if (m < 1 || m > 12) return std::nullopt;
        if (d != 0) {
            std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                            std::chrono::day{static_cast<unsigned>(d)}};
            if (!ymd.ok()) return std::nullopt;
        }
        return from_parts(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    }

    int year() const { return year_; }
    unsigned month_of_year() const { return month_; }
    bool has_day() const { return day_ != 0; }

    /// Days since 1970-01-01 of the first instant of the period.
    std::int64_t ordinal() const { return ordinal_; }

    /// The month containing this timestamp, at month granularity.
    Timestamp month_period() const { return month(year_, month_); }

    Timestamp plus_months(int n) const {
        int total = year_ * 12 + static_cast<int>(month_) - 1 + n;
        int y = total >= 0 ? total / 12 : (total - 11) / 12;
        return month(y, static_cast<unsigned>(total - y * 12 + 1));
    }

    std::string to_string() const {
        char buf[32];
        if (day_ == 0)
            std::snprintf(buf, sizeof buf, "%04d-%02u", year_, month_);
        else
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year_, month_, day_);
        return buf;
    }

    friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.ordinal_ == b.ordinal_; }
    friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
        return a.ordinal_ <=> b.ordinal_;
    }

private:
    static Timestamp from_parts(int y, unsigned m, unsigned d) {
        Timestamp t;
        t.year_ = y;
        t.month_ = m;
        t.day_ = d;
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d == 0 ? 1u : d}};
        t.ordinal_ = std::chrono::sys_days{ymd}.time_since_epoch().count();
        return t;
    }

    int year_ = 1970;
    unsigned month_ = 1;
    unsigned day_ = 0;
    std::int64_t ordinal_ = 0;
};

/// Sparse binary feature vector: indices of the features that are present.
struct BinaryFeatureVector {
    std::uint32_t dim = 0;
    std::vector<std::uint32_t> indices;

    bool well_formed() const {
        if (dim == 0) return false;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] >= dim) return false;
            if (i > 0 && indices[i] <= indices[i - 1]) return false;
        }
        return true;
    }

    friend bool operator==(const BinaryFeatureVector&, const BinaryFeatureVector&) = default;
};

struct DenseEmbedding {
    std::vector<float> values;

    std::uint32_t dim() const { return static_cast<std::uint32_t>(values.size()); }

    bool finite() const {
        return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
    }

    // Bitwise value equality: -0.0f and 0.0f differ, identical NaN payloads match.
    friend bool operator==(const DenseEmbedding& a, const DenseEmbedding& b) {
        if (a.values.size() != b.values.size()) return false;
        return std::equal(a.values.begin(), a.values.end(), b.values.begin(),
                          [](float x, float y) { return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y); });
    }
};

enum class RepKind : std::uint8_t { binary, embedding };

inline std::string_view to_string(RepKind k) { return k == RepKind::binary ? "binary" : "embedding"; }

using Representation = std::variant<BinaryFeatureVector, DenseEmbedding>;

inline RepKind kind_of(const Representation& r) {
    return std::holds_alternative<BinaryFeatureVector>(r) ? RepKind::binary : RepKind::embedding;
}

inline std::uint32_t dim_of(const Representation& r) {
    if (auto* b = std::get_if<BinaryFeatureVector>(&r)) return b->dim;
    return std::get<DenseEmbedding>(r).dim();
}

struct Sample {
    SampleId id;
    Label label = Label::benign;
    Timestamp timestamp;
    Representation representation;
    std::optional<std::string> family;  // carried through I/O only

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Schema {
    RepKind kind = RepKind::binary;
    std::uint32_t dim = 0;

    friend bool operator==(const Schema&, const Schema&) = default;
};

struct Violation {
    std::string invariant;
    SampleId sample_id;  // empty for dataset-level violations
    std::string message;
};

inline bool sample_order(const Sample& a, const Sample& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.id < b.id;
}

/// Immutable, timestamp-ordered collection of samples sharing one schema.
class Dataset {
public:
    Dataset() = default;

    /// Sorts and validates; throws DataError on the first violated invariant.
    static Dataset create(std::vector<Sample> samples, Schema schema);

    /// Sorts without validating. Used to inspect malformed input with
    /// validate_dataset().
    static Dataset unchecked(std::vector<Sample> samples, Schema schema) {
        Dataset ds;
        ds.schema_ = schema;
        ds.samples_ = std::move(samples);
        std::stable_sort(ds.samples_.begin(), ds.samples_.end(), sample_order);
        ds.index_.reserve(ds.samples_.size());
        for (std::size_t i = 0; i < ds.samples_.size(); ++i) ds.index_.emplace(ds.samples_[i].id, i);
        return ds;
    }

    const Schema& schema() const { return schema_; }
    std::span<const Sample> samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    auto begin() const { return samples_.begin(); }
    auto end() const { return samples_.end(); }

    const Sample* find(std::string_view id) const {
        auto it = index_.find(SampleId(id));
        return it == index_.end() ? nullptr : &samples_[it->second];
    }
    bool contains(std::string_view id) const { return find(id) != nullptr; }

    std::size_t malicious_count() const {
        return static_cast<std::size_t>(std::count_if(samples_.begin(), samples_.end(),
                                                      [](const Sample& s) { return s.label == Label::malicious; }));
    }
    double malware_ratio() const {
        return samples_.empty() ? 0.0 : static_cast<double>(malicious_count()) / static_cast<double>(samples_.size());
    }

    IdSet ids() const {
        IdSet out;
        for (const auto& s : samples_) out.insert(s.id);
        return out;
    }

    std::unordered_map<SampleId, Label> labels() const {
        std::unordered_map<SampleId, Label> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.emplace(s.id, s.label);
        return out;
    }

    std::optional<Timestamp> earliest() const {
        if (samples_.empty()) return std::nullopt;
        return samples_.front().timestamp;
    }
    std::optional<Timestamp> latest() const {
        if (samples_.empty()) return std::nullopt;
        return samples_.back().timestamp;
    }

    /// Samples satisfying `pred`, same schema.
    template <class Pred>
    Dataset filter(Pred pred) const {
        std::vector<Sample> kept;
        for (const auto& s : samples_)
            if (pred(s)) kept.push_back(s);
        return unchecked(std::move(kept), schema_);
    }

    Dataset subset(const IdSet& ids) const {
        return filter([&](const Sample& s) { return ids.count(s.id) != 0; });
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.schema_ == b.schema_ && a.samples_ == b.samples_;
    }

private:
    Schema schema_;
    std::vector<Sample> samples_;
    std::unordered_map<SampleId, std::size_t> index_;
};

/// Every violated Dataset invariant; empty iff the dataset is well formed.
inline std::vector<Violation> validate_dataset(const Dataset& ds) {
    std::vector<Violation> out;
    const Schema& schema = ds.schema();
    if (schema.dim == 0) out.push_back({"schema", "", "schema dim must be positive"});

    std::unordered_set<std::string_view> seen;
    const Sample* prev = nullptr;
    for (const Sample& s : ds) {
        if (s.id.empty()) out.push_back({"id non-empty", s.id, "sample id is empty"});
        if (!seen.insert(s.id).second) out.push_back({"unique id", s.id, "duplicate id " + s.id});
        if (prev && sample_order(s, *prev))
            out.push_back({"order", s.id, "samples not in ascending (timestamp, id) order"});
        prev = &s;

        if (kind_of(s.representation) != schema.kind) {
            out.push_back({"schema kind mismatch", s.id,
                           "representation kind " + std::string(to_string(kind_of(s.representation))) +
                               " differs from schema kind " + std::string(to_string(schema.kind))});
            continue;
        }
        if (dim_of(s.representation) != schema.dim) {
            out.push_back({"schema dim mismatch", s.id,
                           "schema dim mismatch: sample dim " + std::to_string(dim_of(s.representation)) +
                               ", schema dim " + std::to_string(schema.dim)});
        }
        if (auto* b = std::get_if<BinaryFeatureVector>(&s.representation)) {
            if (!b->well_formed())
                out.push_back({"binary indices", s.id, "indices must be strictly increasing and below dim"});
        } else if (!std::get<DenseEmbedding>(s.representation).finite()) {
            out.push_back({"finite embedding", s.id, "embedding contains NaN or Inf"});
        }
    }
    return out;
}

inline Dataset Dataset::create(std::vector<Sample> samples, Schema schema) {
    Dataset ds = unchecked(std::move(samples), schema);
    auto violations = validate_dataset(ds);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw DataError(v.sample_id.empty() ? v.message : v.message + " (sample " + v.sample_id + ")");
    }
    return ds;
}

/// Union of two datasets with the same schema; ids must be disjoint.
inline Dataset concat(const Dataset& a, const Dataset& b) {
    if (!a.empty() && !b.empty() && a.schema() != b.schema()) throw DataError("schema mismatch in concat");
    std::vector<Sample> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return Dataset::create(std::move(all), a.empty() ? b.schema() : a.schema());
}

inline void require_same_schema(const Dataset& a, const Dataset& b, std::string_view what) {
    if (a.schema() != b.schema())
        throw DataError(std::string(what) + ": schema mismatch (" + std::string(to_string(a.schema().kind)) + "/" +
                        std::to_string(a.schema().dim) + " vs " + std::string(to_string(b.schema().kind)) + "/" +
                        std::to_string(b.schema().dim) + ")");
}

}  // namespace leakguard
