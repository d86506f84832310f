#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgnet/errors.hpp"

namespace pgnet {

// NFC-normalizes, strips control/zero-width characters (keeping ZWJ/ZWNJ
// immediately after a Bengali virama, where they select conjunct forms),
// collapses whitespace runs to single spaces, and trims the ends.
std::string normalize(std::string_view text);

// Whitespace split plus detachment of leading/trailing punctuation
// (danda, period, comma, quotes, brackets, dashes, ...) as separate
// tokens. Never produces empty tokens.
std::vector<std::string> tokenize(std::string_view text);

bool is_detachable_punct(char32_t cp);

// Token <-> id bijection. Ids 0-3 are PAD/UNK/START/STOP; corpus tokens
// start at 4 in frequency order.
struct Vocabulary {
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;
    static constexpr std::int32_t kStart = 2;
    static constexpr std::int32_t kStop = 3;
    static constexpr std::int32_t kReservedCount = 4;
    static const char* reserved_token(std::int32_t id);

    std::vector<std::string> id_to_token;
    std::vector<std::int64_t> counts;  // parallel to id_to_token, 0 for reserved ids
    std::unordered_map<std::string, std::int32_t> token_to_id;

    std::int32_t size() const { return static_cast<std::int32_t>(id_to_token.size()); }
    bool contains(std::string_view token) const;
    // UNK for unknown tokens.
    std::int32_t id_or_unk(std::string_view token) const;
    const std::string& token(std::int32_t id) const;
};

// Keeps the max_size - 4 most frequent tokens; ties break toward the
// lexicographically smaller token. Tokens that collide with a reserved
// token string are dropped.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::int32_t max_size = 50000);

// One "token<TAB>count" line per corpus token, in id order from id 4.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

struct EncodedSource {
    std::vector<std::int32_t> ids;      // UNK at OOV positions
    std::vector<std::int32_t> ext_ids;  // OOV w -> vocab.size() + index in oov_list
    std::vector<std::string> oov_list;  // distinct OOVs in first-occurrence order
};

EncodedSource encode_source(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::int64_t max_enc = 400);

struct EncodedTarget {
    std::vector<std::int32_t> dec_input;   // START + in-vocab ids (UNK for OOV)
    std::vector<std::int32_t> dec_target;  // extended ids + STOP
};

EncodedTarget encode_target(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::span<const std::string> oov_list, std::int64_t max_dec = 100);

struct EncodedExample {
    std::vector<std::int32_t> enc_ids;
    std::vector<std::int32_t> enc_ext_ids;
    std::vector<std::string> oov_list;
    std::vector<std::int32_t> dec_input;
    std::vector<std::int32_t> dec_target;
};

EncodedExample encode_example(std::span<const std::string> article_tokens,
                              std::span<const std::string> summary_tokens,
                              const Vocabulary& vocab, std::int64_t max_enc = 400,
                              std::int64_t max_dec = 100);

struct ArticlePair {
    std::string article;
    std::string summary;
};

struct Corpus {
    std::vector<ArticlePair> pairs;
    std::size_t skipped = 0;  // lines that failed JSONL validation
};

// JSON Lines with string fields "article" and "summary". Malformed lines
// are counted and skipped; blank lines are ignored.
Corpus read_corpus(const std::string& path);

// Padded example group. Row-major [batch_size x enc_len] / [batch_size x
// dec_len]; masks are 1 exactly on non-PAD positions.
struct Batch {
    std::int32_t batch_size = 0;
    std::int64_t enc_len = 0;
    std::int64_t dec_len = 0;
    std::int32_t max_oov = 0;

    std::vector<std::int32_t> enc_ids, enc_ext_ids;
    std::vector<std::uint8_t> enc_mask;
    std::vector<std::int32_t> dec_input, dec_target;
    std::vector<std::uint8_t> dec_mask;
    std::vector<std::vector<std::string>> oov_lists;

    std::span<const std::int32_t> enc_ids_row(std::int32_t b) const;
    std::span<const std::int32_t> enc_ext_ids_row(std::int32_t b) const;
    std::span<const std::uint8_t> enc_mask_row(std::int32_t b) const;
    std::span<const std::int32_t> dec_input_row(std::int32_t b) const;
    std::span<const std::int32_t> dec_target_row(std::int32_t b) const;
    std::span<const std::uint8_t> dec_mask_row(std::int32_t b) const;
    std::int64_t enc_true_len(std::int32_t b) const;
    std::int64_t dec_true_len(std::int32_t b) const;
};

Batch make_batch(std::span<const EncodedExample> examples);

// Deterministic shuffle under the seed, then fixed-size groups (the last
// one may be smaller).
std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples,
                                std::int32_t batch_size, std::uint64_t shuffle_seed);

}  // namespace pgnet
