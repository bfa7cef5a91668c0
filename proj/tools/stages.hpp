#pragma once

// Pipeline stages behind the contrasim command-line tool. Each stage reads its
// predecessors' artifacts from the output directory, writes its own under
// <out>/<stage>/ and records a manifest.

#include <contrasim/contrasim.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace contrasim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kVersion = "0.1.0";

// A required predecessor artifact is missing (exit status 2).
class DependencyError : public Error {
public:
    using Error::Error;
};

// Bad or missing command-line input (exit status 2).
class UsageError : public Error {
public:
    using Error::Error;
};

struct Context {
    PipelineConfig cfg;
    fs::path out;
    std::ostream* log = &std::cerr;
    std::ostream* report = &std::cout;

    fs::path stage_dir(std::string_view stage) const { return out / std::string(stage); }

    fs::path ensure_dir(const fs::path& d) const {
        fs::create_directories(d);
        return d;
    }

    void info(const std::string& msg) const { *log << msg << '\n'; }
    void warn(const std::string& msg) const { *log << "warning: " << msg << '\n'; }
};

// ---- artifacts ---------------------------------------------------------------

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, std::string_view body) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << body;
    if (!out) throw DataError("write failed on " + p.string());
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

inline void require(const fs::path& p, std::string_view predecessor) {
    if (!fs::exists(p))
        throw DependencyError("missing " + p.string() + "; run " + std::string(predecessor) + " first");
}

class Manifest {
public:
    Manifest(const Context& ctx, std::string command) : ctx_(ctx), command_(std::move(command)) {}

    void input(const fs::path& p) { inputs_[label(p)] = sha256_file(p); }
    void output(const fs::path& p) { outputs_[label(p)] = sha256_file(p); }
    void param(const std::string& key, json value) { params_[key] = std::move(value); }

    void write(const fs::path& dir) const {
        // Paths below are relative to the output directory, so its location
        // stays out of the manifest.
        json config = ctx_.cfg.to_json();
        config.erase("output_dir");
        json j{{"command", command_},
               {"versions", {{"contrasim", kVersion}, {"manifest", 1}}},
               {"seed", ctx_.cfg.seed},
               {"parameters", params_},
               {"config", config},
               {"inputs", inputs_},
               {"outputs", outputs_}};
        write_json(dir / "manifest.json", j);
    }

private:
    std::string label(const fs::path& p) const {
        const auto rel = p.lexically_relative(ctx_.out);
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
        return p.generic_string();
    }

    const Context& ctx_;
    std::string command_;
    json inputs_ = json::object(), outputs_ = json::object(), params_ = json::object();
};

// ---- providers ---------------------------------------------------------------

inline HttpOptions http_options(const PipelineConfig& cfg, const EndpointConfig& ep) {
    HttpOptions o;
    o.url = ep.url;
    o.api_key_env = ep.api_key_env;
    o.timeout = std::chrono::seconds(cfg.providers.timeout_s);
    o.retry.max_attempts = cfg.providers.retry_attempts;
    return o;
}

inline std::shared_ptr<EmbeddingProvider> base_embedder(const Context& ctx) {
    const auto& p = ctx.cfg.providers;
    switch (p.kind) {
        case ProviderKind::Mock: return std::make_shared<MockEmbedder>(derive_seed(ctx.cfg.seed, "mock-embed"), p.mock_dim);
        case ProviderKind::Http: return std::make_shared<HttpEmbedder>(http_options(ctx.cfg, p.embed), p.embed.model);
        case ProviderKind::File:
            return std::make_shared<StoreEmbedder>(std::make_shared<const EmbeddingStore>(EmbeddingStore::load(p.store)));
    }
    throw ArgumentError("unknown provider kind");
}

// Embeddings from the provider are only used by the mock/http kinds; the file
// kind serves text generation with the mocks as well.
inline std::unique_ptr<GenerationProvider> make_generator(const Context& ctx) {
    const auto& p = ctx.cfg.providers;
    if (p.kind == ProviderKind::Http) return std::make_unique<HttpGenerator>(http_options(ctx.cfg, p.generator), p.generator.model);
    return std::make_unique<MockGenerator>();
}

inline std::unique_ptr<DiscriminatorProvider> make_discriminator(const Context& ctx) {
    const auto& p = ctx.cfg.providers;
    if (p.kind == ProviderKind::Http) return std::make_unique<HttpDiscriminator>(http_options(ctx.cfg, p.discriminator));
    return std::make_unique<MockDiscriminator>(ctx.cfg.bands());
}

// ---- stage inputs --------------------------------------------------------------

inline fs::path split_file(const Context& ctx, std::string_view part) {
    return ctx.stage_dir("ingest") / (std::string(part) + ".jsonl");
}

inline CorpusSplit load_split(const Context& ctx, Manifest* m = nullptr) {
    CorpusSplit s;
    s.mode = ctx.cfg.split_mode();
    s.seed = ctx.cfg.seed;
    for (auto [name, part] : {std::pair{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
        const auto p = split_file(ctx, name);
        require(p, "ingest");
        *part = ingest_dataset(p);
        if (m) m->input(p);
    }
    return s;
}

inline fs::path augmented_file(const Context& ctx) { return ctx.stage_dir("augment") / "augmented.jsonl"; }

inline std::vector<AugmentedSet> load_augmentations(const Context& ctx, Manifest* m = nullptr) {
    const auto p = augmented_file(ctx);
    require(p, "augment");
    if (m) m->input(p);
    return load_augmented(p);
}

struct Embeddings {
    std::shared_ptr<const EmbeddingStore> store;
    TfIdfModel tfidf;
    std::shared_ptr<EmbeddingProvider> provider;  // store first, live provider for misses
};

inline Embeddings load_embeddings(const Context& ctx, Manifest* m = nullptr) {
    const auto dir = ctx.stage_dir("embed");
    require(dir / "store.jsonl", "embed");
    require(dir / "tfidf.json", "embed");
    if (m) {
        m->input(dir / "store.jsonl");
        m->input(dir / "tfidf.json");
    }
    Embeddings e;
    e.store = std::make_shared<const EmbeddingStore>(EmbeddingStore::load(dir / "store.jsonl"));
    e.tfidf = TfIdfModel::from_json(json::parse(read_file(dir / "tfidf.json")));
    e.provider = std::make_shared<CachedEmbedder>(e.store, base_embedder(ctx));
    return e;
}

// The exact string embedded for a day or augmented set.
template <TextSet Set>
std::string day_text(const Context& ctx, const TfIdfModel& tfidf, const Set& set) {
    const std::string text = set_text(set);
    if (!ctx.cfg.dataset.prune) return text;
    return tfidf_prune(text, tfidf, ctx.cfg.dataset.tfidf_threshold, ctx.cfg.dataset.max_words);
}

inline std::string loss_name(const Context& ctx) { return std::string(to_string(ctx.cfg.projection.loss)); }

inline fs::path projection_file(const Context& ctx, std::string_view loss) {
    return ctx.stage_dir("train-proj") / std::string(loss) / "checkpoint.json";
}

inline ProjectionParams load_projection_for(const Context& ctx, std::string_view loss, Manifest* m = nullptr) {
    const auto p = projection_file(ctx, loss);
    require(p, "train-proj --loss " + std::string(loss));
    if (m) m->input(p);
    return load_projection(p);
}

// Labeled days with their encoder embeddings.
struct LabeledDays {
    std::vector<const DailyNewsSet*> days;
    std::vector<UnitVector> enc;
    std::vector<int> labels;
};

inline LabeledDays labeled_days(const Context& ctx, const Embeddings& e, std::span<const DailyNewsSet> days) {
    LabeledDays out;
    for (const auto& d : days) {
        if (!d.label) continue;
        out.days.push_back(&d);
        out.enc.push_back(e.provider->embed(day_text(ctx, e.tfidf, d)));
        out.labels.push_back(static_cast<int>(*d.label));
    }
    return out;
}

inline std::vector<DailyNewsSet> select_split(const CorpusSplit& s, std::string_view which) {
    if (which == "train") return s.train;
    if (which == "valid") return s.valid;
    if (which == "test") return s.test;
    if (which == "all") return s.all();
    throw UsageError("unknown split '" + std::string(which) + "' (expected train, valid, test or all)");
}

// ---- stages ------------------------------------------------------------------

inline std::vector<std::string> read_reference_lines(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line) || line.front() == '#') continue;
        out.push_back(line);
    }
    return out;
}

inline int run_ingest(const Context& ctx, std::optional<fs::path> dataset_override) {
    const fs::path src = dataset_override ? *dataset_override : ctx.cfg.dataset.path;
    if (src.empty()) throw UsageError("no dataset given; set dataset.path in the config or pass --dataset");
    Manifest m(ctx, "ingest");
    auto data = ingest_dataset(src);
    m.input(src);
    m.param("dataset", src.generic_string());

    std::size_t dropped_headlines = 0, dropped_days = 0;
    if (!ctx.cfg.dataset.references.empty()) {
        const auto& ref_path = ctx.cfg.dataset.references;
        m.input(ref_path);
        const auto refs_text = read_reference_lines(ref_path);
        if (refs_text.empty()) throw DataError(ref_path.string() + ": no reference headlines");
        auto embedder = base_embedder(ctx);
        const auto refs = embedder->embed_batch(refs_text);
        std::vector<DailyNewsSet> kept;
        for (auto& d : data) {
            auto hs = relevance_filter(d.headlines, refs, *embedder, ctx.cfg.dataset.relevance_threshold);
            dropped_headlines += d.headlines.size() - hs.size();
            if (hs.empty()) {
                ++dropped_days;
                ctx.warn("dropping " + d.date.iso() + ": no headline passed the relevance filter");
                continue;
            }
            d.headlines = std::move(hs);
            kept.push_back(std::move(d));
        }
        data = std::move(kept);
    }
    const auto split = split_corpus(std::move(data), ctx.cfg.fractions(), ctx.cfg.split_mode(), ctx.cfg.seed);
    const auto dir = ctx.ensure_dir(ctx.stage_dir("ingest"));
    for (auto [name, part] : {std::pair{"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}}) {
        write_dataset(split_file(ctx, name), *part);
        m.output(split_file(ctx, name));
    }
    m.param("dropped_headlines", dropped_headlines);
    m.param("dropped_days", dropped_days);
    m.write(dir);
    *ctx.report << "ingest: " << split.train.size() << " train / " << split.valid.size() << " valid / "
                << split.test.size() << " test days";
    if (dropped_headlines) *ctx.report << " (" << dropped_headlines << " headlines filtered)";
    *ctx.report << '\n';
    return 0;
}

inline int run_augment(const Context& ctx) {
    Manifest m(ctx, "augment");
    const auto split = load_split(ctx, &m);
    auto gen = make_generator(ctx);
    auto disc = make_discriminator(ctx);
    const auto dir = ctx.ensure_dir(ctx.stage_dir("augment"));
    const auto stats = build_augmented_dataset(split, ctx.cfg.augment.per_anchor, ctx.cfg.distribution(), {*gen, *disc},
                                               ctx.cfg.augment_options(), derive_seed(ctx.cfg.seed, "augment"),
                                               augmented_file(ctx));
    if (stats.anchors_resumed) ctx.info("resumed " + std::to_string(stats.anchors_resumed) + " completed anchors");
    m.output(augmented_file(ctx));
    m.write(dir);
    const auto sets = load_augmented(augmented_file(ctx));
    std::size_t degraded = 0;
    for (const auto& s : sets)
        for (const auto& sl : s.slots) degraded += sl.degraded;
    *ctx.report << "augment: " << sets.size() << " augmented sets for " << split.train.size() << " anchors";
    if (degraded) *ctx.report << " (" << degraded << " slots fell back to random replacement)";
    *ctx.report << '\n';
    return 0;
}

inline int run_embed(const Context& ctx) {
    Manifest m(ctx, "embed");
    const auto split = load_split(ctx, &m);
    const auto aug = load_augmentations(ctx, &m);

    std::vector<std::string> train_docs;
    for (const auto& d : split.train) train_docs.push_back(set_text(d));
    const auto tfidf = TfIdfModel::fit(train_docs);

    std::set<std::string> seen;
    std::vector<std::string> texts;
    auto add = [&](std::string t) {
        if (seen.insert(t).second) texts.push_back(std::move(t));
    };
    for (const auto& d : split.all()) add(day_text(ctx, tfidf, d));
    for (const auto& a : aug) add(day_text(ctx, tfidf, a));

    auto provider = base_embedder(ctx);
    EmbeddingStore store;
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < texts.size(); start += kBatch) {
        const auto chunk = std::span<const std::string>(texts).subspan(start, std::min(kBatch, texts.size() - start));
        auto vecs = provider->embed_batch(chunk);
        for (std::size_t i = 0; i < chunk.size(); ++i) store.put(store_key(chunk[i]), std::move(vecs[i]));
    }
    const auto dir = ctx.ensure_dir(ctx.stage_dir("embed"));
    store.save(dir / "store.jsonl");
    write_json(dir / "tfidf.json", tfidf.to_json());
    m.output(dir / "store.jsonl");
    m.output(dir / "tfidf.json");
    m.write(dir);
    *ctx.report << "embed: " << store.size() << " texts, dim " << store.dim() << '\n';
    return 0;
}

inline int run_train_proj(const Context& ctx) {
    Manifest m(ctx, "train-proj");
    const auto split = load_split(ctx, &m);
    const auto aug = load_augmentations(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);

    std::map<Date, std::vector<const AugmentedSet*>> by_anchor;
    for (const auto& a : aug) by_anchor[a.base_date].push_back(&a);
    std::vector<TrainExample> examples;
    for (const auto& d : split.train) {
        TrainExample ex{d.date.iso(), emb.provider->embed(day_text(ctx, emb.tfidf, d)), {}};
        for (const auto* a : by_anchor[d.date]) ex.augs.push_back({emb.provider->embed(day_text(ctx, emb.tfidf, *a)), a->s});
        if (ex.augs.empty()) {
            ctx.warn("anchor " + ex.key + " has no augmentations; skipped");
            continue;
        }
        examples.push_back(std::move(ex));
    }
    if (examples.empty()) throw DataError("no training anchors with augmentations");

    const auto cfg = ctx.cfg.train_config();
    const auto dir = ctx.ensure_dir(ctx.stage_dir("train-proj") / loss_name(ctx));
    const auto ckpt = dir / "checkpoint.json";
    const auto result = train(examples, cfg, [&](std::size_t, const TrainState& st) {
        projection_checkpoint(st, cfg).save(ckpt);
    });

    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,step,lr,loss\n";
    for (const auto& e : result.log) csv << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.loss << '\n';
    write_file(dir / "train_log.csv", csv.str());
    m.param("loss", loss_name(ctx));
    m.param("anchors", examples.size());
    m.output(ckpt);
    m.output(dir / "train_log.csv");
    m.write(dir);
    *ctx.report << "train-proj (" << loss_name(ctx) << "): " << cfg.epochs << " epochs, " << result.log.size()
                << " steps, final epoch loss " << result.epoch_mean_loss.back() << '\n';
    return 0;
}

inline int run_audit_space(const Context& ctx, IndexSpace space, const std::string& which) {
    Manifest m(ctx, "audit-space");
    const auto split = load_split(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);
    std::optional<ProjectionParams> proj;
    std::string label = "encoder";
    if (space == IndexSpace::Projection) {
        proj = load_projection_for(ctx, loss_name(ctx), &m);
        label = "projection-" + loss_name(ctx);
    }
    const auto days = select_split(split, which);
    const auto ld = labeled_days(ctx, emb, days);
    const std::size_t k = ctx.cfg.metrics.k;
    if (ld.days.size() <= k)
        throw DataError("audit-space needs more than k = " + std::to_string(k) + " labeled days in split '" + which +
                        "', found " + std::to_string(ld.days.size()));
    std::vector<Eigen::VectorXd> vecs;
    for (const auto& e : ld.enc) vecs.push_back(to_index_space(e, space, proj ? &*proj : nullptr).values());
    const auto set = LabeledSet::from(std::move(vecs), ld.labels);
    const auto report = audit_space(set, k, ctx.cfg.metrics.baseline_repeats, derive_seed(ctx.cfg.seed, "audit"),
                                    ctx.cfg.metrics.eps, label);
    const auto dir = ctx.ensure_dir(ctx.stage_dir("audit-space") / (label + "-" + which));
    write_json(dir / "report.json", report.to_json());
    write_file(dir / "report.txt", report.to_table());
    m.param("space", label);
    m.param("split", which);
    m.output(dir / "report.json");
    m.output(dir / "report.txt");
    m.write(dir);
    *ctx.report << report.to_table();
    return 0;
}

inline Dataset features_for(const Context& ctx, const Embeddings& emb, std::span<const DailyNewsSet> days,
                            FeatureSource source, const ProjectionParams* proj) {
    Dataset d;
    for (const auto& day : days) {
        if (!day.label) continue;
        d.x.push_back(make_features(emb.provider->embed(day_text(ctx, emb.tfidf, day)), source, proj));
        d.y.push_back(static_cast<int>(*day.label));
    }
    return d;
}

inline constexpr std::array<FeatureSource, 3> kSources{FeatureSource::Proj, FeatureSource::Enc, FeatureSource::Both};

inline int run_train_heads(const Context& ctx) {
    Manifest m(ctx, "train-heads");
    const auto split = load_split(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);
    const auto proj = load_projection_for(ctx, loss_name(ctx), &m);
    const auto dir = ctx.ensure_dir(ctx.stage_dir("train-heads") / loss_name(ctx));
    const auto ccfg = ctx.cfg.classifier();
    for (auto source : kSources) {
        const auto train_set = features_for(ctx, emb, split.train, source, &proj);
        const auto valid_set = features_for(ctx, emb, split.valid, source, &proj);
        if (train_set.size() == 0) throw DataError("no labeled training days");
        const auto trained = train_classifier(train_set, valid_set.size() ? &valid_set : nullptr, kNumMarketLabels, source, ccfg);
        for (const auto& w : trained.warnings) ctx.warn(std::string(to_string(source)) + ": " + w);
        const auto path = dir / (std::string(to_string(source)) + ".json");
        classifier_checkpoint(trained.params, ccfg).save(path);
        m.output(path);
        *ctx.report << "train-heads " << to_string(source) << ": " << train_set.size() << " examples, "
                    << trained.epochs_run << " epochs\n";
    }
    m.param("loss", loss_name(ctx));
    m.write(dir);
    return 0;
}

struct HeadRow {
    std::string name;
    EvalResult result;
};

inline std::string rows_table(const std::vector<HeadRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "head" << std::right << std::setw(10) << "accuracy" << std::setw(10) << "macro_f1" << '\n';
    os << std::fixed << std::setprecision(4);
    for (const auto& r : rows)
        os << std::left << std::setw(14) << r.name << std::right << std::setw(10) << r.result.accuracy << std::setw(10)
           << r.result.macro_f1 << '\n';
    return os.str();
}

inline json rows_json(const std::vector<HeadRow>& rows, std::size_t n) {
    json arr = json::array();
    for (const auto& r : rows) {
        auto j = r.result.to_json();
        j["name"] = r.name;
        arr.push_back(j);
    }
    return {{"n_test", n}, {"rows", arr}};
}

// Test days, balanced across classes when configured.
inline std::vector<DailyNewsSet> eval_days(const Context& ctx, const CorpusSplit& split) {
    std::vector<DailyNewsSet> labeled;
    for (const auto& d : split.test)
        if (d.label) labeled.push_back(d);
    if (labeled.empty()) throw DataError("test split has no labeled days");
    if (!ctx.cfg.heads.balance) return labeled;
    std::vector<int> labels;
    for (const auto& d : labeled) labels.push_back(static_cast<int>(*d.label));
    std::vector<DailyNewsSet> out;
    for (std::size_t i : balance_subsample(labels, derive_seed(ctx.cfg.seed, "balance"))) out.push_back(labeled[i]);
    return out;
}

inline int run_eval_heads(const Context& ctx) {
    Manifest m(ctx, "eval-heads");
    const auto split = load_split(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);
    const auto heads_root = ctx.stage_dir("train-heads");
    std::vector<std::string> losses;
    for (std::string_view l : {"wscl", "cwcl"})
        if (fs::exists(heads_root / std::string(l) / "proj.json")) losses.emplace_back(l);
    if (losses.empty()) throw DependencyError("no trained heads under " + heads_root.string() + "; run train-heads first");

    const auto days = eval_days(ctx, split);
    std::vector<int> truth;
    for (const auto& d : days) truth.push_back(static_cast<int>(*d.label));

    std::vector<HeadRow> rows{{"baseline", random_baseline(truth, kNumMarketLabels, derive_seed(ctx.cfg.seed, "eval-baseline"))}};
    std::map<std::string, ProjectionParams> projs;
    for (const auto& l : losses) projs[l] = load_projection_for(ctx, l, &m);
    auto eval_head = [&](const std::string& loss, FeatureSource src) {
        const auto path = heads_root / loss / (std::string(to_string(src)) + ".json");
        m.input(path);
        const auto head = load_classifier(path);
        return evaluate(head, features_for(ctx, emb, days, src, &projs.at(loss)));
    };
    for (const auto& l : losses) rows.push_back({"proj-" + l, eval_head(l, FeatureSource::Proj)});
    rows.push_back({"enc", eval_head(losses.front(), FeatureSource::Enc)});
    for (const auto& l : losses) rows.push_back({"both-" + l, eval_head(l, FeatureSource::Both)});

    const auto dir = ctx.ensure_dir(ctx.stage_dir("eval-heads"));
    write_json(dir / "report.json", rows_json(rows, days.size()));
    write_file(dir / "report.txt", rows_table(rows));
    m.output(dir / "report.json");
    m.output(dir / "report.txt");
    m.write(dir);
    *ctx.report << rows_table(rows);
    return 0;
}

struct QueryRequest {
    std::optional<std::string> date;
    std::vector<std::string> texts;
    std::optional<fs::path> text_file;
    std::optional<std::size_t> k;
    IndexSpace space = IndexSpace::Projection;
    bool json_output = false;
};

inline int run_query_similar(const Context& ctx, const QueryRequest& q) {
    const int given = (q.date ? 1 : 0) + (!q.texts.empty() ? 1 : 0) + (q.text_file ? 1 : 0);
    if (given != 1) throw UsageError("query-similar needs exactly one of --date, --text or --text-file");
    Manifest m(ctx, "query-similar");
    const auto split = load_split(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);
    std::optional<ProjectionParams> proj;
    if (q.space == IndexSpace::Projection) proj = load_projection_for(ctx, loss_name(ctx), &m);
    const std::string label = q.space == IndexSpace::Projection ? "projection-" + loss_name(ctx) : "encoder";

    const auto days = split.all();
    auto index = build_index(days, *emb.provider, proj ? &*proj : nullptr, q.space,
                             [&](const DailyNewsSet& d) { return day_text(ctx, emb.tfidf, d); });
    for (const auto& w : index.warnings) ctx.warn(w);

    UnitVector qv;
    std::optional<Date> exclude;
    json query_echo;
    if (q.date) {
        const Date d = Date::parse(*q.date);
        const IndexEntry* e = index.find(d);
        if (!e) throw UsageError("date " + d.iso() + " is not in the corpus");
        qv = e->vector;
        exclude = d;
        query_echo = {{"date", d.iso()}};
    } else {
        std::vector<std::string> lines = q.texts;
        if (q.text_file) {
            std::istringstream in(read_file(*q.text_file));
            std::string line;
            while (std::getline(in, line))
                if (!is_blank(line)) lines.push_back(line);
        }
        if (lines.empty()) throw UsageError("query text is empty");
        struct Lines {
            std::vector<std::string> l;
            std::vector<std::string> texts() const { return l; }
        } set{lines};
        qv = to_index_space(emb.provider->embed(day_text(ctx, emb.tfidf, set)), q.space, proj ? &*proj : nullptr);
        query_echo = {{"text", lines}};
    }
    const std::size_t k = q.k.value_or(ctx.cfg.retrieval.k);
    const auto result = query(index, qv, k, exclude);
    if (result.truncated) ctx.warn("k = " + std::to_string(k) + " exceeds the " + std::to_string(result.hits.size()) + " candidates");

    const auto dir = ctx.ensure_dir(ctx.stage_dir("query-similar"));
    const auto index_path = dir / ("index-" + label + ".jsonl");
    index.save(index_path);
    auto out = result.to_json();
    out["query"] = query_echo;
    out["k"] = k;
    out["space"] = label;
    write_json(dir / "results.json", out);
    m.param("k", k);
    m.param("space", label);
    m.param("query", query_echo);
    m.output(index_path);
    m.output(dir / "results.json");
    m.write(dir);
    if (q.json_output) *ctx.report << out.dump(2) << '\n';
    else *ctx.report << result.to_table();
    return 0;
}

inline int run_baseline(const Context& ctx) {
    Manifest m(ctx, "baseline");
    const auto split = load_split(ctx, &m);
    const auto emb = load_embeddings(ctx, &m);
    const auto ld = labeled_days(ctx, emb, split.all());
    const std::size_t k = ctx.cfg.metrics.k;
    json out;
    std::ostringstream table;
    if (ld.days.size() > k) {
        std::vector<Eigen::VectorXd> vecs;
        for (const auto& e : ld.enc) vecs.push_back(e.values());
        const auto rep = audit_space(LabeledSet::from(std::move(vecs), ld.labels), k, ctx.cfg.metrics.baseline_repeats,
                                     derive_seed(ctx.cfg.seed, "audit"), ctx.cfg.metrics.eps, "encoder");
        out["shuffled_label"] = rep.to_json();
        table << rep.to_table() << '\n';
    } else {
        ctx.warn("too few labeled days for the shuffled-label baseline at k = " + std::to_string(k));
    }
    const auto days = eval_days(ctx, split);
    std::vector<int> truth;
    for (const auto& d : days) truth.push_back(static_cast<int>(*d.label));
    const std::vector<HeadRow> rows{{"baseline", random_baseline(truth, kNumMarketLabels, derive_seed(ctx.cfg.seed, "eval-baseline"))}};
    out["random_classifier"] = rows_json(rows, days.size());
    table << rows_table(rows);

    const auto dir = ctx.ensure_dir(ctx.stage_dir("baseline"));
    write_json(dir / "report.json", out);
    write_file(dir / "report.txt", table.str());
    m.output(dir / "report.json");
    m.output(dir / "report.txt");
    m.write(dir);
    *ctx.report << table.str();
    return 0;
}

inline int run_shift_analysis(const Context& ctx) {
    Manifest m(ctx, "shift-analysis");
    const auto split = load_split(ctx, &m);
    const auto aug = load_augmentations(ctx, &m);
    std::map<std::string, const Headline*> by_id;
    for (const auto& d : split.train)
        for (const auto& h : d.headlines) by_id[h.id] = &h;

    Rng rng(derive_seed(ctx.cfg.seed, "shift-control"));
    std::vector<ShiftPair> pairs;
    for (const auto& a : aug) {
        for (const auto& sl : a.slots) {
            if (sl.action == Action::Ra || sl.degraded || !sl.source_id) continue;
            auto it = by_id.find(*sl.source_id);
            if (it == by_id.end()) continue;
            const Headline* control = nullptr;
            if (split.train.size() < 2) throw DataError("shift-analysis needs at least two training days");
            while (!control) {
                const auto& day = split.train[rng.uniform_index(split.train.size())];
                if (day.date == it->second->date) continue;
                control = &day.headlines[rng.uniform_index(day.headlines.size())];
            }
            pairs.push_back({it->second->text, sl.text, std::string(to_string(sl.action)), control->text});
        }
    }
    if (pairs.empty()) throw DataError("no generated (Re/S/N) slots to analyse");
    auto embedder = base_embedder(ctx);
    const auto summary = action_shift_analysis(pairs, [&](const std::string& t) { return embedder->embed(t); });

    json out = json::object();
    std::ostringstream table;
    table << std::left << std::setw(8) << "action" << std::right << std::setw(12) << "mean_shift" << std::setw(8) << "count" << '\n';
    table << std::fixed << std::setprecision(4);
    for (const auto& [action, s] : summary) {
        out[action] = {{"mean_shift", s.mean}, {"count", s.count}};
        table << std::left << std::setw(8) << action << std::right << std::setw(12) << s.mean << std::setw(8) << s.count << '\n';
    }
    const auto dir = ctx.ensure_dir(ctx.stage_dir("shift-analysis"));
    write_json(dir / "report.json", out);
    m.output(dir / "report.json");
    m.write(dir);
    *ctx.report << table.str();
    return 0;
}

}  // namespace contrasim::cli
