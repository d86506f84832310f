#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pgnet {

struct RougeScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

// All contiguous n-grams with multiplicity; empty when the sequence is
// shorter than n.
std::map<std::vector<std::string>, std::int64_t> ngram_counts(std::span<const std::string> tokens,
                                                              int n);

// Clipped n-gram overlap: P over candidate n-grams, R over reference
// n-grams, F1 = 2PR/(P+R).
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
                   int n);

std::int64_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

struct CorpusRouge {
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
    std::size_t pairs = 0;
};

using TokenizedPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

// Arithmetic mean of per-example P/R/F1 (mean-of-F1, not F1-of-means).
CorpusRouge corpus_rouge(std::span<const TokenizedPair> pairs);

// True if any n-gram occurs at least twice; diagnostic for repetition.
bool has_duplicate_ngram(std::span<const std::string> tokens, int n);

}  // namespace pgnet
