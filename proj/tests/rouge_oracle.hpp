#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace testutil {

// Brute-force ROUGE reimplementation, deliberately structured differently
// from the library: positional n-gram matching with consumption flags and
// a full LCS table.
struct NaiveScore {
    double p = 0, r = 0, f = 0;
};

using Tokens = std::vector<std::string>;

inline NaiveScore naive_rouge_n(const Tokens& cand, const Tokens& ref, int n) {
    const auto grams = [&](const Tokens& t) {
        std::vector<Tokens> out;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) {
            out.emplace_back(t.begin() + static_cast<std::ptrdiff_t>(i),
                             t.begin() + static_cast<std::ptrdiff_t>(i) + n);
        }
        return out;
    };
    const std::vector<Tokens> cg = grams(cand), rg = grams(ref);
    std::vector<bool> used(rg.size(), false);
    std::int64_t overlap = 0;
    for (const Tokens& g : cg) {
        for (std::size_t j = 0; j < rg.size(); ++j) {
            if (!used[j] && rg[j] == g) {
                used[j] = true;
                ++overlap;
                break;
            }
        }
    }
    NaiveScore s;
    s.p = cg.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(cg.size());
    s.r = rg.empty() ? 0.0 : static_cast<double>(overlap) / static_cast<double>(rg.size());
    s.f = (s.p + s.r > 0) ? 2 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

inline NaiveScore naive_rouge_l(const Tokens& cand, const Tokens& ref) {
    std::vector<std::vector<std::int64_t>> dp(cand.size() + 1,
                                              std::vector<std::int64_t>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            dp[i][j] = (cand[i - 1] == ref[j - 1]) ? dp[i - 1][j - 1] + 1
                                                   : std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }
    const double l = static_cast<double>(dp[cand.size()][ref.size()]);
    NaiveScore s;
    s.p = cand.empty() ? 0.0 : l / static_cast<double>(cand.size());
    s.r = ref.empty() ? 0.0 : l / static_cast<double>(ref.size());
    s.f = (s.p + s.r > 0) ? 2 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

}  // namespace testutil
