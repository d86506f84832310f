#include "pgnet/rouge.hpp"

#include <algorithm>

#include "pgnet/errors.hpp"

namespace pgnet {

namespace {

double f1_of(double p, double r) { return (p + r > 0) ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

std::map<std::vector<std::string>, std::int64_t> ngram_counts(std::span<const std::string> tokens,
                                                              int n) {
    if (n < 1) throw ContractError("n-gram order must be at least 1");
    std::map<std::vector<std::string>, std::int64_t> counts;
    if (static_cast<std::size_t>(n) > tokens.size()) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::vector<std::string> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) + n);
        ++counts[std::move(gram)];
    }
    return counts;
}

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
                   int n) {
    if (reference.empty()) throw EmptyInputError("empty reference summary in ROUGE-N");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);

    std::int64_t overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [gram, count] : cand) {
        cand_total += count;
        const auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    for (const auto& [gram, count] : ref) ref_total += count;

    RougeScore s;
    s.precision = cand_total > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
    s.recall = ref_total > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_total) : 0.0;
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

std::int64_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::int64_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (reference.empty()) throw EmptyInputError("empty reference summary in ROUGE-L");
    const std::int64_t l = lcs_length(candidate, reference);
    RougeScore s;
    s.precision = candidate.empty() ? 0.0 : static_cast<double>(l) / static_cast<double>(candidate.size());
    s.recall = static_cast<double>(l) / static_cast<double>(reference.size());
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

CorpusRouge corpus_rouge(std::span<const TokenizedPair> pairs) {
    if (pairs.empty()) throw EmptyInputError("corpus_rouge over an empty pair list");
    CorpusRouge total;
    for (const auto& [cand, ref] : pairs) {
        const RougeScore r1 = rouge_n(cand, ref, 1);
        const RougeScore r2 = rouge_n(cand, ref, 2);
        const RougeScore rl = rouge_l(cand, ref);
        total.rouge1.precision += r1.precision;
        total.rouge1.recall += r1.recall;
        total.rouge1.f1 += r1.f1;
        total.rouge2.precision += r2.precision;
        total.rouge2.recall += r2.recall;
        total.rouge2.f1 += r2.f1;
        total.rougeL.precision += rl.precision;
        total.rougeL.recall += rl.recall;
        total.rougeL.f1 += rl.f1;
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (RougeScore* s : {&total.rouge1, &total.rouge2, &total.rougeL}) {
        s->precision *= inv;
        s->recall *= inv;
        s->f1 *= inv;
    }
    total.pairs = pairs.size();
    return total;
}

bool has_duplicate_ngram(std::span<const std::string> tokens, int n) {
    const auto counts = ngram_counts(tokens, n);
    for (const auto& [gram, count] : counts) {
        if (count >= 2) return true;
    }
    return false;
}

}  // namespace pgnet
