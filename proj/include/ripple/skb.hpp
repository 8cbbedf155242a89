#pragma once

#include "ripple/config.hpp"
#include "ripple/llm.hpp"
#include "ripple/timestamp.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ripple::skb {

enum class Rejection { rule_log_like, rule_keyword, llm_not_scenario };

std::string to_string(Rejection r);

struct HistoricalReport {
    std::string source_id;
    std::string title;
    std::string body;
    Timestamp created_at{};
    bool kept = true;
    std::optional<Rejection> rejection_reason;
    friend bool operator==(const HistoricalReport&, const HistoricalReport&) = default;
};

/// Title and body as embedded and chunked.
std::string indexed_text(const HistoricalReport& r);

struct SkbChunk {
    std::string chunk_id;  // "<source_id>#<offset_tokens>"
    std::string source_id;
    int offset_tokens = 0;
    std::string text;
    Eigen::VectorXf embedding;
    Timestamp created_at{};
    friend bool operator==(const SkbChunk& a, const SkbChunk& b) {
        return a.chunk_id == b.chunk_id && a.source_id == b.source_id && a.offset_tokens == b.offset_tokens &&
               a.text == b.text && a.created_at == b.created_at && a.embedding.size() == b.embedding.size() &&
               a.embedding == b.embedding;
    }
};

struct RetrievalResult {
    SkbChunk chunk;
    double semantic_score = 0;  // (1 + cosine) / 2
    double keyword_score = 0;   // BM25
    double fused_score = 0;
};

// ---------------------------------------------------------------------------
// Tokenization and chunking

/// Whitespace tokens that keep their leading whitespace; trailing whitespace
/// belongs to the last token. Concatenating the tokens reproduces the text.
std::vector<std::string> text_tokens(std::string_view text);

struct ChunkSpan {
    int offset = 0;
    int length = 0;
};

/// Windows of `chunk_tokens` advancing by chunk_tokens - overlap_tokens; the
/// last window ends at the final token. Empty for zero tokens.
std::vector<ChunkSpan> chunk_spans(int token_count, int chunk_tokens, int overlap_tokens);

/// Lower-cased alphanumeric runs, used by the keyword index.
std::vector<std::string> keyword_terms(std::string_view text);

// ---------------------------------------------------------------------------
// Filtering

struct FilterOptions {
    double timestamp_line_ratio = 0.30;
    std::vector<std::string> stop_keywords = {"intermittent"};
    int workers = 1;
};

/// Fraction of non-empty lines carrying a timestamp.
double timestamp_line_fraction(const std::string& text);

/// Applies the rule stage only; nullopt when the report survives.
std::optional<Rejection> rule_rejection(const HistoricalReport& report, const FilterOptions& options);

/// Rule stage, then the classifier role for survivors. A classifier failure
/// rejects the report (fail-closed).
std::vector<HistoricalReport> filter_reports(std::vector<HistoricalReport> raw, llm::Gateway& classifier,
                                             const FilterOptions& options);

// ---------------------------------------------------------------------------
// Index

struct BuildOptions {
    int chunk_tokens = 512;
    int overlap_tokens = 64;
    int embed_attempts = 3;
    int backoff_initial_ms = 500;
    std::size_t batch_size = 16;
    int workers = 1;
    std::function<void(std::chrono::milliseconds)> sleeper;
};

BuildOptions build_options_from(const Config& config);

/// In-memory index: chunks with embeddings plus an inverted keyword index.
/// Immutable after construction; safe for concurrent queries.
class SkbIndex {
public:
    SkbIndex() = default;
    SkbIndex(std::vector<SkbChunk> chunks, int chunk_tokens, int overlap_tokens);

    const std::vector<SkbChunk>& chunks() const { return chunks_; }
    int dimension() const { return dimension_; }
    int chunk_tokens() const { return chunk_tokens_; }
    int overlap_tokens() const { return overlap_tokens_; }
    bool empty() const { return chunks_.empty(); }

    /// Writes `<path>` (length-prefixed chunk records) and `<path>.kw`.
    void save(const std::filesystem::path& path) const;
    /// Throws IoError, ParseError.
    static SkbIndex load(const std::filesystem::path& path);

    /// Up to k chunks created strictly before `cutoff`, by reciprocal-rank
    /// fusion of the semantic and keyword rankings. A null query vector
    /// ranks by keywords alone.
    std::vector<RetrievalResult> query(const std::string& text, const Eigen::VectorXf& query_vector, Timestamp cutoff,
                                       int k) const;
    /// Embeds the query through the gateway first.
    std::vector<RetrievalResult> query(const std::string& text, llm::Gateway& embedder, Timestamp cutoff, int k) const;

    double bm25(std::size_t chunk, const std::vector<std::string>& query_terms) const;

    friend bool operator==(const SkbIndex& a, const SkbIndex& b) {
        return a.chunk_tokens_ == b.chunk_tokens_ && a.overlap_tokens_ == b.overlap_tokens_ && a.chunks_ == b.chunks_;
    }

private:
    void build_keyword_index();

    std::vector<SkbChunk> chunks_;
    int dimension_ = 0;
    int chunk_tokens_ = 512;
    int overlap_tokens_ = 64;
    // term -> (chunk position, term frequency), chunk positions ascending
    std::map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
    std::vector<int> doc_lengths_;
    double avg_length_ = 0;
};

inline constexpr double kRrfConstant = 60.0;
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

/// Chunks and embeds kept reports; rejected ones are ignored. A chunk whose
/// embedding keeps failing after `embed_attempts` is skipped with a warning.
SkbIndex build_index(const std::vector<HistoricalReport>& reports, llm::Gateway& embedder,
                     const BuildOptions& options, std::vector<std::string>* warnings = nullptr);

/// Throws LeakageError if any result is not strictly older than `cutoff`.
void assert_predates(const std::vector<RetrievalResult>& results, Timestamp cutoff);

// ---------------------------------------------------------------------------
// Sources

/// Reads *.json report files: a directory of single reports or arrays, or a
/// mock-tracker layout with issues/ and prs/ subdirectories. Accepts
/// {id|source_id, title, body|description, created_at}.
std::vector<HistoricalReport> load_reports(const std::filesystem::path& source);

void to_json(nlohmann::json& j, const HistoricalReport& r);
void from_json(const nlohmann::json& j, HistoricalReport& r);
nlohmann::json to_json(const RetrievalResult& r);

}  // namespace ripple::skb
