#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "leakguard/core.hpp"
#include "leakguard/rng.hpp"

namespace leakguard::testing {

inline Sample binary_sample(std::string id, std::vector<std::uint32_t> indices, std::uint32_t dim = 5,
                            Label label = Label::benign, Timestamp ts = Timestamp::month(2019, 1)) {
    return Sample{std::move(id), label, ts, BinaryFeatureVector{dim, std::move(indices)}, std::nullopt};
}

inline Sample embedding_sample(std::string id, std::vector<float> values, Label label = Label::benign,
                               Timestamp ts = Timestamp::month(2019, 1)) {
    return Sample{std::move(id), label, ts, DenseEmbedding{std::move(values)}, std::nullopt};
}

inline Dataset binary_dataset(std::vector<Sample> samples, std::uint32_t dim = 5) {
    return Dataset::create(std::move(samples), Schema{RepKind::binary, dim});
}

inline Dataset embedding_dataset(std::vector<Sample> samples, std::uint32_t dim) {
    return Dataset::create(std::move(samples), Schema{RepKind::embedding, dim});
}

/// Random train/test pair where roughly `dup_rate` of test samples copy a
/// training representation. Small feature spaces also produce accidental
/// collisions, which is the point for oracle checks.
inline std::pair<Dataset, Dataset> random_pair(Rng& rng, RepKind kind, std::size_t n_train, std::size_t n_test,
                                               std::uint32_t dim, double dup_rate) {
    auto fresh = [&]() -> Representation {
        if (kind == RepKind::binary) {
            BinaryFeatureVector v{dim, {}};
            for (std::uint32_t i = 0; i < dim; ++i)
                if (rng.bernoulli(0.3)) v.indices.push_back(i);
            return v;
        }
        DenseEmbedding e;
        for (std::uint32_t i = 0; i < dim; ++i) e.values.push_back(static_cast<float>(rng.below(3)));  // coarse values collide
        return e;
    };
    std::vector<Sample> train, test;
    for (std::size_t i = 0; i < n_train; ++i)
        train.push_back({"tr" + std::to_string(i), rng.bernoulli(0.1) ? Label::malicious : Label::benign,
                         Timestamp::month(2018, 1 + static_cast<unsigned>(i % 12)), fresh(), std::nullopt});
    for (std::size_t i = 0; i < n_test; ++i) {
        Representation r = (n_train > 0 && rng.bernoulli(dup_rate)) ? train[rng.below(n_train)].representation : fresh();
        test.push_back({"te" + std::to_string(i), rng.bernoulli(0.1) ? Label::malicious : Label::benign,
                        Timestamp::month(2019, 1 + static_cast<unsigned>(i % 12)), std::move(r), std::nullopt});
    }
    Schema schema{kind, dim};
    return {Dataset::create(std::move(train), schema), Dataset::create(std::move(test), schema)};
}

/// Random real-valued embeddings.
inline Dataset random_embeddings(Rng& rng, const std::string& prefix, std::size_t n, std::uint32_t dim) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        DenseEmbedding e;
        for (std::uint32_t d = 0; d < dim; ++d) e.values.push_back(static_cast<float>(rng.normal()));
        out.push_back({prefix + std::to_string(i), Label::benign, Timestamp::month(2019, 1), std::move(e), std::nullopt});
    }
    return Dataset::create(std::move(out), Schema{RepKind::embedding, dim});
}

struct CalibrationFixture {
    Dataset train;
    Dataset test;
    IdSet planted;  // test ids that are near copies of a training sample
};

/// Train embeddings plus a test set where planted near-copies sit at
/// cosine >= `leak_floor` (one of them in [leak_floor, leak_floor + 0.005])
/// and non-leak samples, including deliberate near misses, stay
/// <= `nonleak_ceiling` to every training sample.
inline CalibrationFixture calibration_fixture(std::uint64_t seed, std::size_t n_train = 300, std::size_t n_leak = 120,
                                              std::size_t n_clean = 180, std::uint32_t dim = 64,
                                              double leak_floor = 0.97, double nonleak_ceiling = 0.93) {
    Rng rng(seed);
    CalibrationFixture fx;
    fx.train = random_embeddings(rng, "tr", n_train, dim);

    auto at_similarity = [&](const std::vector<float>& src, double cos) {
        std::vector<double> u(src.begin(), src.end()), e(dim);
        double nu = 0;
        for (double x : u) nu += x * x;
        nu = std::sqrt(nu);
        for (auto& x : u) x /= nu;
        double proj = 0, ne = 0;
        for (auto& x : e) x = rng.normal();
        for (std::uint32_t d = 0; d < dim; ++d) proj += e[d] * u[d];
        for (std::uint32_t d = 0; d < dim; ++d) e[d] -= proj * u[d];
        for (double x : e) ne += x * x;
        ne = std::sqrt(ne);
        const double scale = 0.5 + rng.uniform() * 2.0;
        std::vector<float> out(dim);
        for (std::uint32_t d = 0; d < dim; ++d)
            out[d] = static_cast<float>(scale * (cos * u[d] + std::sqrt(1 - cos * cos) * e[d] / ne));
        return out;
    };

    std::vector<Sample> test;
    for (std::size_t i = 0; i < n_leak; ++i) {
        const auto& src = std::get<DenseEmbedding>(fx.train[rng.below(n_train)].representation).values;
        double cos = i == 0 ? leak_floor + 0.0025 : rng.uniform(leak_floor + 0.001, 0.9999);
        std::string id = "leak" + std::to_string(i);
        test.push_back({id, Label::benign, Timestamp::month(2019, 6), DenseEmbedding{at_similarity(src, cos)}, std::nullopt});
        fx.planted.insert(id);
    }
    for (std::size_t i = 0; i < n_clean; ++i) {
        std::vector<float> v;
        if (i % 3 == 0) {  // near miss
            const auto& src = std::get<DenseEmbedding>(fx.train[rng.below(n_train)].representation).values;
            v = at_similarity(src, rng.uniform(nonleak_ceiling - 0.08, nonleak_ceiling - 0.002));
        } else {
            for (std::uint32_t d = 0; d < dim; ++d) v.push_back(static_cast<float>(rng.normal()));
        }
        test.push_back({"clean" + std::to_string(i), Label::benign, Timestamp::month(2019, 6), DenseEmbedding{v},
                        std::nullopt});
    }
    fx.test = Dataset::create(std::move(test), Schema{RepKind::embedding, dim});
    return fx;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("leakguard_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& f) const { return path_ / f; }
    const std::filesystem::path& path() const { return path_; }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        std::ofstream(path_ / name) << content;
        return path_ / name;
    }

private:
    std::filesystem::path path_;
};

}  // namespace leakguard::testing
