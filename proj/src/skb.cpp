#include "ripple/skb.hpp"

#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/parallel.hpp"
#include "ripple/prompts.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace ripple::skb {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Rejection r) {
    switch (r) {
        case Rejection::rule_log_like: return "rule_log_like";
        case Rejection::rule_keyword: return "rule_keyword";
        case Rejection::llm_not_scenario: return "llm_not_scenario";
    }
    return "unknown";
}

namespace {

Rejection rejection_from_string(const std::string& s) {
    for (auto r : {Rejection::rule_log_like, Rejection::rule_keyword, Rejection::llm_not_scenario})
        if (to_string(r) == s) return r;
    throw ParseError("unknown rejection reason '" + s + "'");
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::string indexed_text(const HistoricalReport& r) {
    if (r.title.empty()) return r.body;
    if (r.body.empty()) return r.title;
    return r.title + "\n\n" + r.body;
}

std::vector<std::string> text_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const std::size_t start = i;
        while (i < n && is_space(text[i])) ++i;
        if (i == n) {
            // Trailing whitespace joins the previous token.
            if (!out.empty()) out.back().append(text.substr(start));
            break;
        }
        while (i < n && !is_space(text[i])) ++i;
        out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

std::vector<ChunkSpan> chunk_spans(int token_count, int chunk_tokens, int overlap_tokens) {
    if (chunk_tokens <= 0 || overlap_tokens < 0 || overlap_tokens >= chunk_tokens)
        throw ValidationError("chunk_tokens", "need chunk_tokens > overlap_tokens >= 0");
    std::vector<ChunkSpan> out;
    if (token_count <= 0) return out;
    const int stride = chunk_tokens - overlap_tokens;
    for (int offset = 0;; offset += stride) {
        out.push_back({offset, std::min(chunk_tokens, token_count - offset)});
        if (offset + chunk_tokens >= token_count) break;
    }
    return out;
}

std::vector<std::string> keyword_terms(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// ---------------------------------------------------------------------------

double timestamp_line_fraction(const std::string& text) {
    static const std::regex stamp(
        R"((\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2})|(\b\d{1,2}:\d{2}:\d{2}\b)|(^\s*\[\s*\d+\.\d+\]))");
    std::istringstream in(text);
    int lines = 0, stamped = 0;
    for (std::string line; std::getline(in, line);) {
        if (std::all_of(line.begin(), line.end(), is_space)) continue;
        ++lines;
        if (std::regex_search(line, stamp)) ++stamped;
    }
    return lines == 0 ? 0.0 : static_cast<double>(stamped) / lines;
}

std::optional<Rejection> rule_rejection(const HistoricalReport& report, const FilterOptions& options) {
    if (timestamp_line_fraction(report.body) > options.timestamp_line_ratio) return Rejection::rule_log_like;
    const std::string hay = lower(report.title) + "\n" + lower(report.body);
    for (const auto& kw : options.stop_keywords)
        if (!kw.empty() && hay.find(lower(kw)) != std::string::npos) return Rejection::rule_keyword;
    return std::nullopt;
}

namespace {

std::string label_safe(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    return out;
}

bool classify(const HistoricalReport& r, llm::Gateway& gateway) {
    llm::Session session = gateway.open_session(Role::classifier, "skb-classify-" + label_safe(r.source_id));
    const std::string prompt =
        prompts::render("user_classify_report", {{"source_id", r.source_id}, {"title", r.title}, {"body", r.body}});
    const json verdict = llm::extract_json(session.send(prompt).text());
    if (!verdict.is_object() || !verdict.contains("end_user_scenario") || !verdict["end_user_scenario"].is_boolean())
        throw LlmFormatError("classifier reply lacks a boolean end_user_scenario");
    return verdict["end_user_scenario"].get<bool>();
}

}  // namespace

std::vector<HistoricalReport> filter_reports(std::vector<HistoricalReport> raw, llm::Gateway& classifier,
                                             const FilterOptions& options) {
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& r = raw[i];
        r.rejection_reason = rule_rejection(r, options);
        r.kept = !r.rejection_reason;
        if (r.kept) survivors.push_back(i);
    }
    parallel_for(survivors.size(), options.workers, [&](std::size_t n) {
        auto& r = raw[survivors[n]];
        bool scenario = false;
        try {
            scenario = classify(r, classifier);
        } catch (const Error& e) {
            spdlog::warn("classifier failed on report {}: {}; rejecting it", r.source_id, e.what());
        } catch (const json::exception& e) {
            spdlog::warn("classifier failed on report {}: {}; rejecting it", r.source_id, e.what());
        }
        r.kept = scenario;
        if (!scenario) r.rejection_reason = Rejection::llm_not_scenario;
    });
    return raw;
}

// ---------------------------------------------------------------------------

BuildOptions build_options_from(const Config& config) {
    BuildOptions o;
    o.chunk_tokens = config.skb.chunk_tokens;
    o.overlap_tokens = config.skb.overlap_tokens;
    o.embed_attempts = config.skb.embed_attempts;
    o.backoff_initial_ms = config.llm.backoff_initial_ms;
    o.workers = config.run.workers;
    return o;
}

SkbIndex::SkbIndex(std::vector<SkbChunk> chunks, int chunk_tokens, int overlap_tokens)
    : chunks_(std::move(chunks)), chunk_tokens_(chunk_tokens), overlap_tokens_(overlap_tokens) {
    for (const auto& c : chunks_) {
        if (dimension_ == 0) dimension_ = static_cast<int>(c.embedding.size());
        if (c.embedding.size() != dimension_ || dimension_ == 0)
            throw EmbeddingError("chunk " + c.chunk_id + " has dimension " + std::to_string(c.embedding.size()));
    }
    build_keyword_index();
}

void SkbIndex::build_keyword_index() {
    postings_.clear();
    doc_lengths_.assign(chunks_.size(), 0);
    long total = 0;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        std::map<std::string, int> tf;
        const auto terms = keyword_terms(chunks_[i].text);
        for (const auto& t : terms) ++tf[t];
        doc_lengths_[i] = static_cast<int>(terms.size());
        total += static_cast<long>(terms.size());
        for (const auto& [t, f] : tf) postings_[t].emplace_back(i, f);
    }
    avg_length_ = chunks_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(chunks_.size());
}

namespace {
// Mathematically equal scores computed along different float paths must tie.
double snap(double x) { return std::round(x * 1e12) / 1e12; }
}  // namespace

double SkbIndex::bm25(std::size_t chunk, const std::vector<std::string>& query_terms) const {
    const std::set<std::string> unique(query_terms.begin(), query_terms.end());
    const double n = static_cast<double>(chunks_.size());
    double score = 0;
    for (const auto& t : unique) {
        const auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const auto& list = it->second;
        const auto hit = std::lower_bound(list.begin(), list.end(), std::make_pair(chunk, 0));
        if (hit == list.end() || hit->first != chunk) continue;
        const double df = static_cast<double>(list.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double f = hit->second;
        const double norm = avg_length_ > 0 ? doc_lengths_[chunk] / avg_length_ : 0.0;
        score += idf * f * (kBm25K1 + 1) / (f + kBm25K1 * (1 - kBm25B + kBm25B * norm));
    }
    return score;
}

std::vector<RetrievalResult> SkbIndex::query(const std::string& text, const Eigen::VectorXf& query_vector,
                                             Timestamp cutoff, int k) const {
    if (k < 1) throw ValidationError("k", "must be at least 1");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < chunks_.size(); ++i)
        if (chunks_[i].created_at < cutoff) eligible.push_back(i);
    if (eligible.empty()) return {};

    const bool semantic = query_vector.size() == dimension_ && dimension_ > 0 && query_vector.norm() > 0;
    const auto terms = keyword_terms(text);
    const Eigen::VectorXd q = semantic ? Eigen::VectorXd(query_vector.cast<double>()) : Eigen::VectorXd();
    std::map<std::size_t, RetrievalResult> rows;
    for (auto i : eligible) {
        RetrievalResult r;
        r.chunk = chunks_[i];
        if (semantic) {
            const Eigen::VectorXd e = chunks_[i].embedding.cast<double>();
            const double cos = q.dot(e) / (q.norm() * e.norm());
            r.semantic_score = snap(std::clamp((1.0 + cos) / 2.0, 0.0, 1.0));
        }
        r.keyword_score = snap(bm25(i, terms));
        rows.emplace(i, std::move(r));
    }

    auto rank_by = [&](auto score, bool include_zero) {
        std::vector<std::size_t> order;
        for (auto i : eligible)
            if (include_zero || score(rows.at(i)) > 0) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double sa = score(rows.at(a)), sb = score(rows.at(b));
            if (sa != sb) return sa > sb;
            return chunks_[a].chunk_id < chunks_[b].chunk_id;
        });
        return order;
    };
    if (semantic) {
        const auto order = rank_by([](const RetrievalResult& r) { return r.semantic_score; }, true);
        for (std::size_t rank = 0; rank < order.size(); ++rank)
            rows.at(order[rank]).fused_score += 1.0 / (kRrfConstant + static_cast<double>(rank + 1));
    }
    const auto kw_order = rank_by([](const RetrievalResult& r) { return r.keyword_score; }, false);
    for (std::size_t rank = 0; rank < kw_order.size(); ++rank)
        rows.at(kw_order[rank]).fused_score += 1.0 / (kRrfConstant + static_cast<double>(rank + 1));

    std::vector<RetrievalResult> out;
    for (auto& [i, r] : rows)
        if (semantic || r.keyword_score > 0) out.push_back(std::move(r));
    std::sort(out.begin(), out.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
        return a.chunk.chunk_id < b.chunk.chunk_id;
    });
    if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    return out;
}

std::vector<RetrievalResult> SkbIndex::query(const std::string& text, llm::Gateway& embedder, Timestamp cutoff,
                                             int k) const {
    Eigen::VectorXf qv;
    if (!chunks_.empty()) {
        try {
            qv = embedder.embed({text}).at(0);
        } catch (const Error& e) {
            spdlog::warn("query embedding failed ({}); ranking by keywords only", e.what());
        }
    }
    return query(text, qv, cutoff, k);
}

void assert_predates(const std::vector<RetrievalResult>& results, Timestamp cutoff) {
    for (const auto& r : results)
        if (!(r.chunk.created_at < cutoff))
            throw LeakageError("retrieved chunk " + r.chunk.chunk_id + " created " +
                               format_timestamp(r.chunk.created_at) + " is not older than the cutoff " +
                               format_timestamp(cutoff));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[] = "RIPPLESKB1\n";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw ParseError("truncated index record");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

void put_record(std::string& out, const std::string& payload) {
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out += payload;
}

std::string get_record(const std::string& in, std::size_t& pos) {
    const auto len = get_u32(in, pos);
    if (pos + len > in.size()) throw ParseError("truncated index record");
    std::string s = in.substr(pos, len);
    pos += len;
    return s;
}

}  // namespace

void SkbIndex::save(const fs::path& path) const {
    std::string out(kMagic);
    put_record(out, json{{"chunk_tokens", chunk_tokens_},
                         {"count", chunks_.size()},
                         {"dimension", dimension_},
                         {"overlap_tokens", overlap_tokens_}}
                        .dump());
    for (const auto& c : chunks_) {
        std::string rec;
        put_record(rec, json{{"chunk_id", c.chunk_id},
                             {"created_at", format_timestamp(c.created_at)},
                             {"offset_tokens", c.offset_tokens},
                             {"source_id", c.source_id},
                             {"text", c.text}}
                            .dump());
        for (Eigen::Index d = 0; d < c.embedding.size(); ++d) {
            std::uint32_t bits;
            const float f = c.embedding[d];
            std::memcpy(&bits, &f, sizeof bits);
            put_u32(rec, bits);
        }
        put_record(out, rec);
    }
    write_file_atomic(path, out);

    json postings = json::object();
    for (const auto& [term, list] : postings_) {
        json l = json::array();
        for (const auto& [i, tf] : list) l.push_back({i, tf});
        postings[term] = std::move(l);
    }
    const json kw = {{"avg_length", avg_length_}, {"doc_lengths", doc_lengths_}, {"postings", postings}};
    write_file_atomic(fs::path(path.string() + ".kw"), kw.dump());
}

SkbIndex SkbIndex::load(const fs::path& path) {
    const std::string in = read_file(path);
    if (in.compare(0, sizeof kMagic - 1, kMagic) != 0) throw ParseError(path.string() + " is not a ripple SKB index");
    std::size_t pos = sizeof kMagic - 1;
    SkbIndex index;
    try {
        const json header = json::parse(get_record(in, pos));
        index.chunk_tokens_ = header.at("chunk_tokens");
        index.overlap_tokens_ = header.at("overlap_tokens");
        index.dimension_ = header.at("dimension");
        const std::size_t count = header.at("count");
        for (std::size_t n = 0; n < count; ++n) {
            const std::string rec = get_record(in, pos);
            std::size_t rpos = 0;
            const json meta = json::parse(get_record(rec, rpos));
            SkbChunk c;
            c.chunk_id = meta.at("chunk_id");
            c.source_id = meta.at("source_id");
            c.offset_tokens = meta.at("offset_tokens");
            c.text = meta.at("text");
            c.created_at = parse_timestamp(meta.at("created_at").get<std::string>());
            if ((rec.size() - rpos) != static_cast<std::size_t>(index.dimension_) * 4)
                throw ParseError("chunk " + c.chunk_id + " embedding size does not match the index dimension");
            c.embedding.resize(index.dimension_);
            for (int d = 0; d < index.dimension_; ++d) {
                const std::uint32_t bits = get_u32(rec, rpos);
                float f;
                std::memcpy(&f, &bits, sizeof f);
                c.embedding[d] = f;
            }
            index.chunks_.push_back(std::move(c));
        }
        if (pos != in.size()) throw ParseError("trailing bytes after the last index record");
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    const fs::path kw_path(path.string() + ".kw");
    bool sidecar_ok = false;
    if (fs::exists(kw_path)) {
        try {
            const json kw = json::parse(read_file(kw_path));
            index.avg_length_ = kw.at("avg_length");
            index.doc_lengths_ = kw.at("doc_lengths").get<std::vector<int>>();
            for (const auto& [term, list] : kw.at("postings").items()) {
                auto& dst = index.postings_[term];
                for (const auto& p : list) dst.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<int>());
            }
            sidecar_ok = index.doc_lengths_.size() == index.chunks_.size();
        } catch (const json::exception& e) {
            spdlog::warn("{}: {}", kw_path.string(), e.what());
        }
    }
    if (!sidecar_ok) {
        spdlog::warn("keyword index {} missing or stale; rebuilding it", kw_path.string());
        index.build_keyword_index();
    }
    return index;
}

// ---------------------------------------------------------------------------
// Build

namespace {

struct Pending {
    SkbChunk chunk;
    bool done = false;
};

}  // namespace

SkbIndex build_index(const std::vector<HistoricalReport>& reports, llm::Gateway& embedder, const BuildOptions& options,
                     std::vector<std::string>* warnings) {
    (void)chunk_spans(0, options.chunk_tokens, options.overlap_tokens);  // validates the window
    std::vector<const HistoricalReport*> kept;
    std::set<std::string> seen;
    for (const auto& r : reports) {
        if (!r.kept) continue;
        if (!seen.insert(r.source_id).second) {
            if (warnings) warnings->push_back("duplicate report " + r.source_id + " ignored");
            continue;
        }
        kept.push_back(&r);
    }
    std::sort(kept.begin(), kept.end(), [](auto* a, auto* b) { return a->source_id < b->source_id; });

    std::vector<Pending> pending;
    for (const auto* r : kept) {
        const auto tokens = text_tokens(indexed_text(*r));
        for (const auto& span : chunk_spans(static_cast<int>(tokens.size()), options.chunk_tokens, options.overlap_tokens)) {
            SkbChunk c;
            c.source_id = r->source_id;
            c.offset_tokens = span.offset;
            c.chunk_id = r->source_id + "#" + std::to_string(span.offset);
            c.created_at = r->created_at;
            for (int t = span.offset; t < span.offset + span.length; ++t) c.text += tokens[static_cast<std::size_t>(t)];
            pending.push_back({std::move(c), false});
        }
    }

    auto sleep = options.sleeper ? options.sleeper
                                 : std::function<void(std::chrono::milliseconds)>(
                                       [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
    // Returns false once every attempt has failed.
    auto embed_with_retry = [&](std::size_t first, std::size_t count) {
        std::vector<std::string> texts;
        for (std::size_t i = first; i < first + count; ++i) texts.push_back(pending[i].chunk.text);
        const int attempts = std::max(1, options.embed_attempts);
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            try {
                auto vectors = embedder.embed(texts);
                for (std::size_t i = 0; i < count; ++i) {
                    pending[first + i].chunk.embedding = std::move(vectors[i]);
                    pending[first + i].done = true;
                }
                return true;
            } catch (const Error& e) {
                if (attempt == attempts) {
                    spdlog::warn("embedding failed for {} chunk(s) from {}: {}", count, pending[first].chunk.chunk_id,
                                 e.what());
                    break;
                }
                sleep(std::chrono::milliseconds(static_cast<long long>(options.backoff_initial_ms) << (attempt - 1)));
            }
        }
        return false;
    };

    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (pending.size() + batch - 1) / batch;
    parallel_for(batches, options.workers, [&](std::size_t b) {
        const std::size_t first = b * batch;
        const std::size_t count = std::min(batch, pending.size() - first);
        if (embed_with_retry(first, count) || count == 1) return;
        for (std::size_t i = first; i < first + count; ++i) embed_with_retry(i, 1);
    });

    std::vector<SkbChunk> chunks;
    int dimension = 0;
    for (auto& p : pending) {
        if (p.done && dimension == 0) dimension = static_cast<int>(p.chunk.embedding.size());
        if (!p.done || p.chunk.embedding.size() != dimension) {
            const std::string why = p.done ? "embedding dimension differs from the index" : "embedding failed";
            spdlog::warn("skipping chunk {}: {}", p.chunk.chunk_id, why);
            if (warnings) warnings->push_back("skipped chunk " + p.chunk.chunk_id + ": " + why);
            continue;
        }
        chunks.push_back(std::move(p.chunk));
    }
    return SkbIndex(std::move(chunks), options.chunk_tokens, options.overlap_tokens);
}

// ---------------------------------------------------------------------------
// Sources

void to_json(json& j, const HistoricalReport& r) {
    j = {{"source_id", r.source_id},
         {"title", r.title},
         {"body", r.body},
         {"created_at", format_timestamp(r.created_at)},
         {"kept", r.kept},
         {"rejection_reason", r.rejection_reason ? json(to_string(*r.rejection_reason)) : json(nullptr)}};
}

void from_json(const json& j, HistoricalReport& r) {
    auto str = [&](std::initializer_list<const char*> keys) -> std::string {
        for (const char* k : keys) {
            if (!j.contains(k) || j[k].is_null()) continue;
            const auto& v = j[k];
            return v.is_string() ? v.get<std::string>() : v.dump();
        }
        return {};
    };
    r.source_id = str({"source_id", "id"});
    if (r.source_id.empty()) throw ParseError("report without an id");
    r.title = str({"title", "summary"});
    r.body = str({"body", "description"});
    const std::string created = str({"created_at", "creation_time"});
    if (created.empty()) throw ParseError("report " + r.source_id + " has no created_at");
    r.created_at = parse_timestamp(created);
    r.kept = j.value("kept", true);
    r.rejection_reason.reset();
    if (j.contains("rejection_reason") && j["rejection_reason"].is_string())
        r.rejection_reason = rejection_from_string(j["rejection_reason"].get<std::string>());
}

json to_json(const RetrievalResult& r) {
    return {{"chunk_id", r.chunk.chunk_id},
            {"source_id", r.chunk.source_id},
            {"offset_tokens", r.chunk.offset_tokens},
            {"created_at", format_timestamp(r.chunk.created_at)},
            {"semantic_score", r.semantic_score},
            {"keyword_score", r.keyword_score},
            {"fused_score", r.fused_score},
            {"text", r.chunk.text}};
}

namespace {

void read_report_file(const fs::path& p, std::vector<HistoricalReport>& out) {
    json j;
    try {
        j = json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
    try {
        if (j.is_array()) {
            for (const auto& item : j) out.push_back(item.get<HistoricalReport>());
        } else if (j.is_object() && j.contains("reports")) {
            for (const auto& item : j["reports"]) out.push_back(item.get<HistoricalReport>());
        } else {
            out.push_back(j.get<HistoricalReport>());
        }
    } catch (const json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

void read_report_dir(const fs::path& dir, std::vector<HistoricalReport>& out) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) read_report_file(f, out);
}

}  // namespace

std::vector<HistoricalReport> load_reports(const fs::path& source) {
    std::vector<HistoricalReport> out;
    if (!fs::exists(source)) throw IoError("report source " + source.string() + " does not exist");
    if (fs::is_regular_file(source)) {
        read_report_file(source, out);
    } else if (fs::is_directory(source / "issues") || fs::is_directory(source / "prs")) {
        for (const char* sub : {"issues", "prs"})
            if (fs::is_directory(source / sub)) read_report_dir(source / sub, out);
    } else {
        read_report_dir(source, out);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const HistoricalReport& a, const HistoricalReport& b) { return a.source_id < b.source_id; });
    return out;
}

}  // namespace ripple::skb
