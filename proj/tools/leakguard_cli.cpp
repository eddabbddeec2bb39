// leakguard command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data validation failure,
// 3 internal invariant violation.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "leakguard/leakguard.hpp"

namespace fs = std::filesystem;
using namespace leakguard;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- digests

std::string hex(const unsigned char* p, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < n; ++i) {
        s += digits[p[i] >> 4];
        s += digits[p[i] & 15];
    }
    return s;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw InvariantError("sha256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
    std::string hexdigest() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned len = 0;
        EVP_DigestFinal_ex(ctx_, md, &len);
        return hex(md, len);
    }

private:
    EVP_MD_CTX* ctx_;
};

std::string sha256_string(const std::string& s) {
    Sha256 h;
    h.update(s.data(), s.size());
    return h.hexdigest();
}

std::string sha256_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hexdigest();
}

// --------------------------------------------------------------- manifest

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Run {
    std::vector<std::string> argv;
    Json config = Json::object();
    std::vector<fs::path> inputs;
    std::optional<std::uint64_t> seed;

    void input(const fs::path& p) {
        inputs.push_back(p);
        fs::path side = default_sidecar(p);
        if (fs::exists(side)) inputs.push_back(side);
    }

    Json manifest() const {
        Json files = Json::array();
        for (const auto& p : inputs) files.push_back(Json{{"path", p.string()}, {"sha256", sha256_file(p)}});
        return Json{{"command_line", argv},
                    {"config_digest", sha256_string(config.dump())},
                    {"config", config},
                    {"inputs", std::move(files)},
                    {"version", version},
                    {"seed", seed ? Json(*seed) : Json(nullptr)},
                    {"generator", Rng::algorithm},
                    {"timestamp", utc_now()}};
    }
};

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write " + out);
    f << text;
}

void emit_json(const Run& run, const std::string& out, Json report) {
    Json doc{{"manifest", run.manifest()}, {"report", std::move(report)}};
    emit(out, doc.dump(2) + "\n");
}

// ------------------------------------------------------------ data inputs

std::string strip_jsonl(const std::string& meta) {
    const std::string ext = ".jsonl";
    if (meta.size() > ext.size() && meta.compare(meta.size() - ext.size(), ext.size(), ext) == 0)
        return meta.substr(0, meta.size() - ext.size());
    return meta;
}

// Representation file next to a metadata file: <stem>.vectors.jsonl,
// <stem>.emb.lkge or <stem>.emb.csv.
fs::path sibling(const std::string& meta, std::initializer_list<const char*> suffixes, const char* flag) {
    if (!fs::exists(meta)) throw DataError("cannot open " + meta);
    const std::string stem = strip_jsonl(meta);
    std::string tried;
    for (const char* s : suffixes) {
        fs::path p = stem + s;
        if (fs::exists(p)) return p;
        tried += (tried.empty() ? "" : ", ") + p.string();
    }
    throw UsageError("no representation file found for " + meta + " (tried " + tried + "); pass " + flag);
}

constexpr std::initializer_list<const char*> any_rep{".vectors.jsonl", ".emb.lkge", ".emb.csv"};
constexpr std::initializer_list<const char*> emb_rep{".emb.lkge", ".emb.csv"};

Dataset load(Run& run, const std::string& meta, const std::string& rep, const char* flag) {
    fs::path r = rep.empty() ? sibling(meta, any_rep, flag) : fs::path(rep);
    run.input(meta);
    run.input(r);
    return load_dataset(meta, r);
}

std::optional<Dataset> load_companion(Run& run, const std::string& meta, const std::string& emb) {
    fs::path r;
    if (!emb.empty()) {
        r = emb;
    } else {
        const std::string stem = strip_jsonl(meta);
        for (const char* s : emb_rep)
            if (fs::exists(stem + s)) {
                r = stem + s;
                break;
            }
        if (r.empty()) return std::nullopt;
    }
    run.input(r);
    return load_dataset(meta, r);
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Matcher parse_matcher(const std::string& s) {
    if (s == "exact") return Matcher::exact;
    if (s == "near") return Matcher::near;
    return Matcher::union_;
}

TieRule parse_tie(const std::string& s) {
    if (s == "malicious") return TieRule::predict_malicious;
    if (s == "benign") return TieRule::predict_benign;
    return TieRule::model_fallback;
}

LeakAwareConfig matcher_config(const std::string& mode, const std::optional<double>& threshold, const std::string& tie) {
    LeakAwareConfig cfg;
    cfg.matcher = parse_matcher(mode);
    cfg.tie_rule = parse_tie(tie);
    if (cfg.matcher != Matcher::exact) {
        if (!threshold) throw UsageError("--threshold is required for --mode " + mode);
        cfg.m = *threshold;
    }
    cfg.validate();
    return cfg;
}

std::pair<double, double> parse_range(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("--range must look like lo:hi, got " + s);
    try {
        std::size_t a = 0, b = 0;
        double lo = std::stod(s.substr(0, colon), &a);
        double hi = std::stod(s.substr(colon + 1), &b);
        if (a != colon || b != s.size() - colon - 1) throw std::invalid_argument(s);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw UsageError("--range must look like lo:hi, got " + s);
    }
}

// ---------------------------------------------------------- human tables

std::string pct(const Json& v) {
    if (v.is_null()) return "-";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v.get<double>());
    return buf;
}

struct TableRow {
    std::string name;
    Json before;  // MetricsReport JSON (complete test set)
    Json after;   // MetricsReport JSON (non-leak portion)
    std::optional<double> leak_ratio;
};

void print_before_after(const std::vector<TableRow>& rows) {
    std::size_t w = 8;
    for (const auto& r : rows) w = std::max(w, r.name.size());
    const char* metrics[] = {"f1", "ba", "fnr", "fpr"};
    std::printf("%-*s  %7s", static_cast<int>(w), "", "leak%");
    for (const char* m : metrics) std::printf("  %8s %8s", (std::string(m) + ":bef").c_str(), (std::string(m) + ":aft").c_str());
    std::printf("\n");
    for (const auto& r : rows) {
        std::printf("%-*s  %7s", static_cast<int>(w), r.name.c_str(),
                    r.leak_ratio ? pct(Json(*r.leak_ratio)).c_str() : "-");
        for (const char* m : metrics) std::printf("  %8s %8s", pct(r.before[m]).c_str(), pct(r.after[m]).c_str());
        std::printf("\n");
    }
}

void print_partitions(const std::string& name, const Json& part) {
    std::printf("%-10s %8s %8s %8s %8s %8s %8s %8s\n", name.c_str(), "n", "f1", "ba", "fnr", "fpr", "prec", "recall");
    for (const char* key : {"complete", "leak", "nonleak"}) {
        const Json& m = part[key];
        const Json& c = m["counts"];
        auto n = c["tp"].get<std::uint64_t>() + c["fn"].get<std::uint64_t>() + c["tn"].get<std::uint64_t>() +
                 c["fp"].get<std::uint64_t>();
        std::printf("%-10s %8llu %8s %8s %8s %8s %8s %8s\n", key, static_cast<unsigned long long>(n), pct(m["f1"]).c_str(),
                    pct(m["ba"]).c_str(), pct(m["fnr"]).c_str(), pct(m["fpr"]).c_str(), pct(m["precision"]).c_str(),
                    pct(m["recall"]).c_str());
    }
}

MetricsReport metrics_from_json(const Json& j) {
    MetricsReport r;
    const Json& c = j.at("counts");
    r.counts = {c.at("tp").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                c.at("fp").get<std::uint64_t>()};
    for (Metric m : all_metrics) {
        const Json& v = j.at(std::string(to_string(m)));
        if (!v.is_null()) field(r, m) = v.get<double>();
    }
    return r;
}

// ------------------------------------------------------------ subcommands

struct Common {
    std::string out;
    unsigned workers = default_workers();
};

struct DataFlags {
    std::string train, test, train_rep, test_rep, train_emb, test_emb;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out", c.out, "Write the JSON artifact here (default: standard output)");
    sub->add_option("--workers", c.workers, "Worker threads; results do not depend on this")->check(CLI::PositiveNumber);
}

void add_pair(CLI::App* sub, DataFlags& d, bool companions) {
    sub->add_option("--train", d.train, "Training metadata JSONL")->required();
    sub->add_option("--test", d.test, "Test metadata JSONL")->required();
    sub->add_option("--train-rep", d.train_rep, "Training representations (default: sibling of --train)");
    sub->add_option("--test-rep", d.test_rep, "Test representations (default: sibling of --test)");
    if (companions) {
        sub->add_option("--train-emb", d.train_emb, "Training embeddings for near matching on binary data");
        sub->add_option("--test-emb", d.test_emb, "Test embeddings for near matching on binary data");
    }
}

CompanionEmbeddings companions(Run& run, const DataFlags& d, const Dataset& train, std::optional<Dataset>& ctr,
                               std::optional<Dataset>& cte, Matcher matcher) {
    if (matcher == Matcher::exact || train.schema().kind == RepKind::embedding) return {};
    ctr = load_companion(run, d.train, d.train_emb);
    cte = load_companion(run, d.test, d.test_emb);
    if (!ctr || !cte) throw UsageError("near matching on binary data needs --train-emb and --test-emb");
    return {&*ctr, &*cte};
}

int cmd_audit(Run& run, const Common& c, const DataFlags& d, const std::string& mode,
              const std::optional<double>& threshold, bool groups) {
    run.config = Json{{"command", "audit"}, {"mode", mode}, {"threshold", threshold ? Json(*threshold) : Json(nullptr)},
                      {"groups", groups}};
    auto cfg = matcher_config(mode, threshold, "model");
    Dataset train = load(run, d.train, d.train_rep, "--train-rep");
    Dataset test = load(run, d.test, d.test_rep, "--test-rep");
    std::optional<Dataset> ctr, cte;
    auto comp = companions(run, d, train, ctr, cte, cfg.matcher);
    LeakageReport r = audit_leakage(train, test, cfg, c.workers, comp);

    Json report = to_json(r);
    if (groups) {
        Json g = Json::array();
        for (const auto& grp : duplicate_groups(train)) g.push_back(to_json(grp));
        report["train_duplicate_groups"] = std::move(g);
    }
    emit_json(run, c.out, std::move(report));
    if (!c.out.empty())
        std::printf("%s leakage: %zu of %zu test samples (%s%%)\n", std::string(to_string(r.kind)).c_str(),
                    r.leak_ids.size(), r.test_size, pct(Json(r.ratio)).c_str());
    return 0;
}

int cmd_calibrate(Run& run, const Common& c, const DataFlags& d, const std::string& range, double step) {
    auto [lo, hi] = parse_range(range);
    run.config = Json{{"command", "calibrate"}, {"range", {lo, hi}}, {"step", step}};
    auto binary_rep = [](const std::string& meta, const std::string& rep) {
        return rep.empty() ? sibling(meta, {".vectors.jsonl"}, "--train-rep/--test-rep") : fs::path(rep);
    };
    auto emb_path = [](const std::string& meta, const std::string& emb) {
        return emb.empty() ? sibling(meta, emb_rep, "--train-emb/--test-emb") : fs::path(emb);
    };
    Dataset train_fv = load(run, d.train, binary_rep(d.train, d.train_rep).string(), "--train-rep");
    Dataset test_fv = load(run, d.test, binary_rep(d.test, d.test_rep).string(), "--test-rep");
    Dataset train_emb = load(run, d.train, emb_path(d.train, d.train_emb).string(), "--train-emb");
    Dataset test_emb = load(run, d.test, emb_path(d.test, d.test_emb).string(), "--test-emb");
    if (train_fv.schema().kind != RepKind::binary) throw DataError("calibrate: feature vectors must be binary");
    if (train_fv.ids() != train_emb.ids() || test_fv.ids() != test_emb.ids())
        throw DataError("calibrate: feature vectors and embeddings cover different samples");

    LeakageReport fv = exact_leak_set(train_fv, test_fv);
    ThresholdCalibration cal = calibrate_threshold(fv.leak_ids, train_emb, test_emb, lo, hi, step, c.workers);
    Json report{{"leak_fv_count", fv.leak_ids.size()}, {"leak_fv_ratio", fv.ratio}, {"test_size", fv.test_size}};
    report["calibration"] = to_json(cal);
    emit_json(run, c.out, std::move(report));
    if (!c.out.empty()) {
        std::printf("%8s %8s %10s\n", "M", "IoU%", "|Leak_emb|");
        for (const auto& p : cal.iou_curve) std::printf("%8.4f %8s %10zu\n", p.m, pct(Json(p.iou)).c_str(), p.leak_emb_size);
        std::printf("chosen M = %.4f (IoU %s%%)\n", cal.chosen_m, pct(Json(cal.max_iou)).c_str());
    }
    return 0;
}

struct SplitFlags {
    std::string data, data_rep;
    BatchSpec batch;
    WindowSpec window;
    double target = 0.06, tolerance = 0.02;
};

int cmd_split(Run& run, const Common& c, SplitFlags& f) {
    run.config = Json{{"command", "split"},
                      {"malicious_per_batch", f.batch.malicious_per_batch},
                      {"benign_per_batch", f.batch.benign_per_batch},
                      {"strict", f.batch.strict},
                      {"window_len", f.window.window_len},
                      {"train_len", f.window.train_len},
                      {"val_len", f.window.val_len},
                      {"test_len", f.window.test_len},
                      {"stride", f.window.stride},
                      {"target_ratio", f.target},
                      {"tolerance", f.tolerance}};
    run.seed = f.batch.rng_seed;
    f.window.validate();
    Dataset ds = load(run, f.data, f.data_rep, "--data-rep");
    WindowPlan plan;
    plan.batches = build_batches(ds, f.batch);
    if (plan.batches.size() < f.window.window_len)
        throw DataError("only " + std::to_string(plan.batches.size()) + " batches; a window needs " +
                        std::to_string(f.window.window_len));
    plan.windows = build_sliding_windows(plan.batches, f.window);

    LintConfig lint{f.target, f.tolerance};
    Json lint_json = Json::array();
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < plan.windows.size(); ++k) {
        const auto& w = plan.windows[k];
        Dataset train = batches_dataset(ds, plan.batches, w.train);
        Dataset test = batches_dataset(ds, plan.batches, w.test);
        auto v = lint_split(train, test, lint);
        counts.push_back(v.size());
        lint_json.push_back(Json{{"window", k}, {"violations", to_json(std::span<const Violation>(v))}});
    }
    Json report = to_json(plan);
    report["lint"] = std::move(lint_json);
    emit_json(run, c.out, std::move(report));
    if (!c.out.empty()) {
        std::printf("%zu batches, %zu windows\n", plan.batches.size(), plan.windows.size());
        for (std::size_t k = 0; k < plan.windows.size(); ++k) {
            const auto& w = plan.windows[k];
            std::printf("window %zu: train %zu-%zu  val %zu-%zu  test %zu-%zu  lint violations %zu\n", k + 1,
                        w.train.front(), w.train.back(), w.validation.empty() ? 0 : w.validation.front(),
                        w.validation.empty() ? 0 : w.validation.back(), w.test.front(), w.test.back(), counts[k]);
        }
    }
    return 0;
}

struct EvalFlags {
    std::string predictions, leak_report, mode = "exact", tie = "model";
    std::optional<double> threshold;
};

int cmd_evaluate(Run& run, const Common& c, const DataFlags& d, const EvalFlags& e) {
    run.config = Json{{"command", "evaluate"},
                      {"mode", e.mode},
                      {"threshold", e.threshold ? Json(*e.threshold) : Json(nullptr)},
                      {"leak_report", !e.leak_report.empty()}};
    if (d.train.empty() == e.leak_report.empty()) throw UsageError("evaluate needs exactly one of --train or --leak-report");
    Dataset test = load(run, d.test, d.test_rep, "--test-rep");
    run.input(e.predictions);
    PredictionSet preds = ingest_predictions(e.predictions);

    IdSet leak_ids;
    if (!e.leak_report.empty()) {
        run.input(e.leak_report);
        std::ifstream in(e.leak_report);
        if (!in) throw DataError("cannot open " + e.leak_report);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(e.leak_report + ": " + ex.what());
        }
        leak_ids = leakage_report_from_json(j.contains("report") ? j["report"] : j).leak_ids;
    } else {
        auto cfg = matcher_config(e.mode, e.threshold, e.tie);
        Dataset train = load(run, d.train, d.train_rep, "--train-rep");
        std::optional<Dataset> ctr, cte;
        auto comp = companions(run, d, train, ctr, cte, cfg.matcher);
        leak_ids = audit_leakage(train, test, cfg, c.workers, comp).leak_ids;
    }
    PartitionedReport r = evaluate_partitions(test.labels(), preds.predictions, test.ids(), leak_ids);
    Json report{{"model", preds.model_name}};
    report.update(to_json(r));
    emit_json(run, c.out, std::move(report));
    if (!c.out.empty()) print_partitions(preds.model_name, to_json(r));
    return 0;
}

int cmd_leak_aware(Run& run, const Common& c, const DataFlags& d, const EvalFlags& e) {
    run.config = Json{{"command", "leak-aware"},
                      {"mode", e.mode},
                      {"threshold", e.threshold ? Json(*e.threshold) : Json(nullptr)},
                      {"tie_rule", e.tie}};
    auto cfg = matcher_config(e.mode, e.threshold, e.tie);
    Dataset train = load(run, d.train, d.train_rep, "--train-rep");
    Dataset test = load(run, d.test, d.test_rep, "--test-rep");
    run.input(e.predictions);
    PredictionSet preds = ingest_predictions(e.predictions);
    std::optional<Dataset> ctr, cte;
    auto comp = companions(run, d, train, ctr, cte, cfg.matcher);
    LeakAwareResult r = leak_aware_evaluate(train, test, cfg, preds, c.workers, comp);
    emit_json(run, c.out, to_json(r));
    if (!c.out.empty()) {
        print_partitions("standalone", to_json(r.standalone));
        print_partitions("leak-aware", to_json(r.leak_aware));
        std::printf("decisions: %zu memorized, %zu model, %zu tie fallback\n", r.provenance.memorized,
                    r.provenance.model, r.provenance.tie_fallback);
    }
    return 0;
}

struct ContinuousFlags {
    std::string schedule;
    std::vector<std::string> predictions;
    ContinuousOptions opts;
    bool leak_aware = false;
};

int cmd_continuous(Run& run, const Common& c, const DataFlags& d, const EvalFlags& e, ContinuousFlags& f) {
    run.config = Json{{"command", "continuous"},
                      {"mode", e.mode},
                      {"threshold", e.threshold ? Json(*e.threshold) : Json(nullptr)},
                      {"tie_rule", e.tie},
                      {"leak_aware", f.leak_aware},
                      {"validation_periods", f.opts.validation_periods},
                      {"validation_joins_pool", f.opts.validation_joins_pool}};
    auto cfg = matcher_config(e.mode, e.threshold, e.tie);
    if (cfg.matcher != Matcher::exact && !f.leak_aware)
        throw UsageError("continuous audits with exact matching unless --leak-aware is given");
    f.opts.workers = c.workers;
    Dataset initial = load(run, d.train, d.train_rep, "--train-rep");
    Dataset stream = load(run, d.test, d.test_rep, "--test-rep");
    std::vector<Period> periods = split_by_month(stream);
    AdditionsSchedule schedule;
    if (!f.schedule.empty()) {
        run.input(f.schedule);
        schedule = load_schedule(f.schedule);
    }
    std::vector<PredictionSet> preds;
    for (const auto& p : f.predictions) {
        run.input(p);
        preds.push_back(ingest_predictions(p));
    }
    std::optional<LeakAwareConfig> leak_cfg;
    if (f.leak_aware) leak_cfg = cfg;
    auto results = run_continuous_eval(initial, periods, schedule, preds, leak_cfg, f.opts);

    std::string text = Json{{"manifest", run.manifest()}}.dump() + "\n";
    for (const auto& r : results) text += to_json(r).dump() + "\n";
    emit(c.out, text);
    if (!c.out.empty()) {
        std::vector<TableRow> rows;
        for (const auto& r : results)
            rows.push_back({r.period, to_json(r.report.complete), to_json(r.report.nonleak_portion), r.leak_ratio});
        print_before_after(rows);
    }
    return 0;
}

struct SynthFlags {
    std::string out_dir, kind = "binary", fixture;
    SynthConfig cfg;
    std::size_t train_periods = 0;
};

std::string rep_suffix(RepKind k) { return k == RepKind::binary ? ".vectors.jsonl" : ".emb.lkge"; }

int cmd_synth(Run& run, SynthFlags& f) {
    f.cfg.representation.kind = f.kind == "embedding" ? RepKind::embedding : RepKind::binary;
    run.seed = f.cfg.seed;
    fs::create_directories(f.out_dir);
    const fs::path dir = f.out_dir;
    auto write = [&](const Dataset& ds, const std::string& name) {
        write_dataset(ds, dir / (name + ".jsonl"), dir / (name + rep_suffix(ds.schema().kind)));
    };
    Json summary;

    if (f.fixture == "flip") {
        run.config = Json{{"command", "synth"}, {"fixture", "flip"}};
        FlipFixture fx = flip_fixture(f.cfg.seed);
        write(fx.train, "train");
        write(fx.test, "test");
        write_predictions(fx.memo, dir / "memo.jsonl");
        write_predictions(fx.gen, dir / "gen.jsonl");
        write_ground_truth(fx.ground_truth, dir / "ground_truth.jsonl");
        summary = Json{{"leak_count", fx.leak_ids.size()},
                       {"test_size", fx.test.size()},
                       {"memo", to_json(fx.memo_report)},
                       {"gen", to_json(fx.gen_report)}};
    } else {
        const auto& s = f.cfg;
        run.config = Json{{"command", "synth"},
                          {"n_periods", s.n_periods},
                          {"samples_per_period", s.samples_per_period},
                          {"malware_ratio", s.malware_ratio},
                          {"leak_rate", s.leak_rate},
                          {"near_leak_jitter", s.near_leak_jitter},
                          {"drift_rate", s.drift_rate},
                          {"kind", f.kind},
                          {"dim", s.representation.dim},
                          {"density", s.representation.density},
                          {"duplicate_label_flip", s.duplicate_label_flip},
                          {"duplicate_window", s.duplicate_window},
                          {"start", s.start.to_string()},
                          {"train_periods", f.train_periods}};
        SynthResult r = gen_synthetic(f.cfg);
        if (f.train_periods > 0) {
            if (f.train_periods >= s.n_periods) throw UsageError("--train-periods must be below --periods");
            write(synth_periods(r.dataset, s, 0, f.train_periods), "train");
            write(synth_periods(r.dataset, s, f.train_periods, s.n_periods), "test");
        } else {
            write(r.dataset, "data");
        }
        write_ground_truth(r.ground_truth, dir / "ground_truth.jsonl");
        summary = Json{{"samples", r.dataset.size()},
                       {"malicious", r.dataset.malicious_count()},
                       {"planted_duplicates", r.ground_truth.size()}};
    }
    Json files = Json::array();
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().filename() != "manifest.json") files.push_back(entry.path().filename().string());
    std::sort(files.begin(), files.end());
    summary["files"] = std::move(files);
    emit_json(run, (dir / "manifest.json").string(), summary);
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_report(Run& run, const Common& c, const std::vector<std::string>& inputs) {
    run.config = Json{{"command", "report"}};
    std::vector<TableRow> rows;
    Json out_rows = Json::array();
    auto add = [&](const std::string& name, const Json& part, const Json& leak_ratio) {
        TableRow row{name, part.at("complete"), part.at("nonleak"), std::nullopt};
        if (leak_ratio.is_number()) row.leak_ratio = leak_ratio.get<double>();
        out_rows.push_back(Json{{"name", name}, {"leak_ratio", leak_ratio}, {"before", row.before}, {"after", row.after}});
        rows.push_back(std::move(row));
    };

    for (const auto& path : inputs) {
        run.input(path);
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path);
        std::vector<Json> docs;
        std::string line;
        std::size_t n = 0;
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            docs.push_back(Json::parse(all));
        } catch (const nlohmann::json::parse_error&) {
            std::istringstream lines(all);
            while (std::getline(lines, line)) {
                ++n;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    docs.push_back(Json::parse(line));
                } catch (const nlohmann::json::parse_error& e) {
                    throw DataError(path + ":" + std::to_string(n) + ": invalid JSON: " + e.what(), n);
                }
            }
        }
        const std::string label = fs::path(path).stem().string();
        std::vector<MetricsReport> complete, nonleak;
        for (const Json& doc : docs) {
            if (doc.contains("period")) {  // continuous record
                add(label + ":" + doc["period"].get<std::string>(), doc, doc["leak_ratio"]);
                complete.push_back(metrics_from_json(doc["complete"]));
                nonleak.push_back(metrics_from_json(doc["nonleak"]));
                continue;
            }
            if (!doc.contains("report")) continue;  // manifest line
            const Json& r = doc["report"];
            if (r.contains("standalone")) {
                add(label + ":standalone", r["standalone"], r["leak_ratio"]);
                add(label + ":leak-aware", r["leak_aware"], r["leak_ratio"]);
            } else if (r.contains("complete") && r.contains("nonleak")) {
                add(label, r, r["leak_ratio"]);
            } else {
                throw DataError(path + ": not an evaluate, leak-aware or continuous output");
            }
        }
        if (!complete.empty()) {
            auto before = average_over_periods(complete), after = average_over_periods(nonleak);
            Json part{{"complete", to_json(before.mean)}, {"nonleak", to_json(after.mean)}};
            add(label + ":average", part, nullptr);
            out_rows.back()["skipped_before"] = to_json(before)["skipped"];
            out_rows.back()["skipped_after"] = to_json(after)["skipped"];
        }
    }
    if (rows.empty()) throw DataError("report: no evaluation records in the inputs");
    emit_json(run, c.out, Json{{"rows", out_rows}});
    if (!c.out.empty()) print_before_after(rows);
    return 0;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_st("leakguard");
    logger->set_pattern("leakguard: [%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("LEAKGUARD_LOG")) {
        level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            level = spdlog::level::warn;
            spdlog::warn("unknown LEAKGUARD_LOG level '{}', using warn", env);
        }
    }
    spdlog::set_level(level);
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"leakguard: train/test leakage auditing and leakage-aware evaluation for malware detection"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    Common common;
    DataFlags data;
    EvalFlags eval;
    std::optional<double> threshold;

    auto matcher_opts = [&](CLI::App* sub) {
        sub->add_option("--mode", eval.mode, "Leak matcher")->check(CLI::IsMember({"exact", "near", "union"}));
        sub->add_option("--threshold", eval.threshold, "Cosine threshold M in (0, 1] for near and union");
    };

    auto* audit = app.add_subcommand("audit", "Leak set of a test set against a training set");
    add_pair(audit, data, true);
    add_common(audit, common);
    matcher_opts(audit);
    bool groups = false;
    audit->add_flag("--groups", groups, "Also list duplicate groups inside the training set");

    auto* calibrate = app.add_subcommand("calibrate", "Pick the near-duplicate threshold whose leak set best matches exact feature-vector leakage");
    add_pair(calibrate, data, true);
    add_common(calibrate, common);
    std::string range = "0.8:1.0";
    double step = 0.01;
    calibrate->add_option("--range", range, "Threshold search range lo:hi")->capture_default_str();
    calibrate->add_option("--step", step, "Grid increment")->capture_default_str();

    auto* split = app.add_subcommand("split", "Class-ratio batches, sliding windows and split lint");
    SplitFlags sf;
    split->add_option("--data", sf.data, "Metadata JSONL")->required();
    split->add_option("--data-rep", sf.data_rep, "Representations (default: sibling of --data)");
    split->add_option("--malicious-per-batch", sf.batch.malicious_per_batch)->capture_default_str();
    split->add_option("--benign-per-batch", sf.batch.benign_per_batch)->capture_default_str();
    split->add_option("--seed", sf.batch.rng_seed, "Benign sampling seed")->capture_default_str();
    split->add_flag("--strict", sf.batch.strict, "Fail when there are too few malicious samples for one batch");
    split->add_option("--window-len", sf.window.window_len)->capture_default_str();
    split->add_option("--train-len", sf.window.train_len)->capture_default_str();
    split->add_option("--val-len", sf.window.val_len)->capture_default_str();
    split->add_option("--test-len", sf.window.test_len)->capture_default_str();
    split->add_option("--stride", sf.window.stride)->capture_default_str();
    split->add_option("--target-ratio", sf.target, "Expected test malware ratio")->capture_default_str();
    split->add_option("--tolerance", sf.tolerance, "Allowed deviation from --target-ratio")->capture_default_str();
    add_common(split, common);

    auto* evaluate = app.add_subcommand("evaluate", "Metrics on the complete, leak and non-leak test partitions");
    evaluate->add_option("--test", data.test, "Test metadata JSONL")->required();
    evaluate->add_option("--test-rep", data.test_rep);
    evaluate->add_option("--train", data.train, "Training metadata JSONL (leak set computed here)");
    evaluate->add_option("--train-rep", data.train_rep);
    evaluate->add_option("--train-emb", data.train_emb);
    evaluate->add_option("--test-emb", data.test_emb);
    evaluate->add_option("--leak-report", eval.leak_report, "Leak set from a previous audit output");
    evaluate->add_option("--predictions", eval.predictions, "Predictions JSONL")->required();
    matcher_opts(evaluate);
    add_common(evaluate, common);

    auto* leak_aware = app.add_subcommand("leak-aware", "Stand-alone model versus the leak-aware detector");
    add_pair(leak_aware, data, true);
    leak_aware->add_option("--predictions", eval.predictions, "Predictions JSONL")->required();
    matcher_opts(leak_aware);
    leak_aware->add_option("--tie-rule", eval.tie, "Tied vote: fall back to the model, or predict a label")
        ->check(CLI::IsMember({"model", "malicious", "benign"}));
    add_common(leak_aware, common);

    auto* continuous = app.add_subcommand("continuous", "Period-by-period replay with a growing training pool");
    ContinuousFlags cf;
    continuous->add_option("--train", data.train, "Initial training metadata JSONL")->required();
    continuous->add_option("--train-rep", data.train_rep);
    continuous->add_option("--test", data.test, "Later data, split into calendar months")->required();
    continuous->add_option("--test-rep", data.test_rep);
    continuous->add_option("--schedule", cf.schedule, "Additions schedule JSONL");
    continuous->add_option("--predictions", cf.predictions, "One predictions file, or one per period")->required();
    continuous->add_option("--validation-periods", cf.opts.validation_periods)->capture_default_str();
    continuous->add_flag("--validation-joins-pool", cf.opts.validation_joins_pool,
                         "Validation months join the pool before testing");
    continuous->add_flag("--leak-aware", cf.leak_aware, "Also evaluate the leak-aware detector");
    matcher_opts(continuous);
    continuous->add_option("--tie-rule", eval.tie)->check(CLI::IsMember({"model", "malicious", "benign"}));
    add_common(continuous, common);

    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset with planted duplicates");
    SynthFlags syn;
    synth->add_option("--out-dir", syn.out_dir, "Output directory")->required();
    synth->add_option("--fixture", syn.fixture, "Canned fixture instead of a free configuration")
        ->check(CLI::IsMember({"flip"}));
    synth->add_option("--seed", syn.cfg.seed)->capture_default_str();
    synth->add_option("--periods", syn.cfg.n_periods)->capture_default_str();
    synth->add_option("--samples-per-period", syn.cfg.samples_per_period)->capture_default_str();
    synth->add_option("--malware-ratio", syn.cfg.malware_ratio)->capture_default_str();
    synth->add_option("--leak-rate", syn.cfg.leak_rate)->capture_default_str();
    synth->add_option("--jitter", syn.cfg.near_leak_jitter, "Near-duplicate jitter (embeddings)")->capture_default_str();
    synth->add_option("--drift", syn.cfg.drift_rate)->capture_default_str();
    synth->add_option("--kind", syn.kind)->check(CLI::IsMember({"binary", "embedding"}))->capture_default_str();
    synth->add_option("--dim", syn.cfg.representation.dim)->capture_default_str();
    synth->add_option("--density", syn.cfg.representation.density)->capture_default_str();
    synth->add_option("--label-flip", syn.cfg.duplicate_label_flip)->capture_default_str();
    synth->add_option("--duplicate-window", syn.cfg.duplicate_window, "0 = all earlier periods")->capture_default_str();
    synth->add_option("--train-periods", syn.train_periods, "Write train/test files split after this many periods");

    auto* report = app.add_subcommand("report", "Before/after leakage-removal table from evaluation outputs");
    std::vector<std::string> report_inputs;
    report->add_option("inputs", report_inputs, "evaluate, leak-aware or continuous outputs")->required();
    add_common(report, common);

    if (argc < 2) {
        std::cerr << app.help();
        return 1;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    Run run;
    run.argv.assign(argv, argv + argc);
    try {
        if (*audit) return cmd_audit(run, common, data, eval.mode, eval.threshold, groups);
        if (*calibrate) return cmd_calibrate(run, common, data, range, step);
        if (*split) return cmd_split(run, common, sf);
        if (*evaluate) return cmd_evaluate(run, common, data, eval);
        if (*leak_aware) return cmd_leak_aware(run, common, data, eval);
        if (*continuous) return cmd_continuous(run, common, data, eval, cf);
        if (*synth) return cmd_synth(run, syn);
        if (*report) return cmd_report(run, common, report_inputs);
    } catch (const UsageError& e) {
        std::cerr << "leakguard: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "leakguard: data error: " << e.what() << "\n";
        return 2;
    } catch (const FixtureError& e) {
        std::cerr << "leakguard: fixture error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "leakguard: data error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "leakguard: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "leakguard: internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
