#include "pgnet/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pgnet/rng.hpp"
#include "pgnet/unicode.hpp"

namespace pgnet {

namespace {

constexpr char32_t kDanda = 0x0964;
constexpr char32_t kDoubleDanda = 0x0965;

constexpr char32_t kPunct[] = {
    kDanda, kDoubleDanda,
    U'.', U',', U'?', U'!', U';', U':',
    U'"', U'\'', 0x2018, 0x2019, 0x201C, 0x201D, 0x00AB, 0x00BB,
    U'(', U')', U'[', U']', U'{', U'}',
    U'-', 0x2013, 0x2014, 0x2026,
};

}  // namespace

bool is_detachable_punct(char32_t cp) {
    for (char32_t p : kPunct) {
        if (p == cp) return true;
    }
    return false;
}

std::string normalize(std::string_view text) {
    const std::u32string composed = uni::nfc(uni::decode_utf8(text));

    std::u32string kept;
    kept.reserve(composed.size());
    for (char32_t c : composed) {
        if (c == uni::kZwj || c == uni::kZwnj) {
            if (!kept.empty() && kept.back() == uni::kBengaliVirama) kept.push_back(c);
            continue;
        }
        if (uni::is_space(c)) {
            kept.push_back(c);
            continue;
        }
        if (uni::is_control(c) || uni::is_format_control(c)) continue;
        kept.push_back(c);
    }

    std::u32string out;
    out.reserve(kept.size());
    bool pending_space = false;
    for (char32_t c : kept) {
        if (uni::is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(U' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return uni::encode_utf8(out);
}

std::vector<std::string> tokenize(std::string_view text) {
    const std::u32string cps = uni::decode_utf8(text);
    std::vector<std::string> tokens;

    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && uni::is_space(cps[i])) ++i;
        std::size_t j = i;
        while (j < cps.size() && !uni::is_space(cps[j])) ++j;
        if (i == j) break;

        std::size_t lo = i, hi = j;
        while (lo < hi && is_detachable_punct(cps[lo])) {
            tokens.push_back(uni::encode_utf8(std::u32string_view(&cps[lo], 1)));
            ++lo;
        }
        std::vector<std::string> trailing;
        while (hi > lo && is_detachable_punct(cps[hi - 1])) {
            trailing.push_back(uni::encode_utf8(std::u32string_view(&cps[hi - 1], 1)));
            --hi;
        }
        if (lo < hi) {
            tokens.push_back(uni::encode_utf8(std::u32string_view(&cps[lo], hi - lo)));
        }
        tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
        i = j;
    }
    return tokens;
}

const char* Vocabulary::reserved_token(std::int32_t id) {
    static constexpr const char* kNames[kReservedCount] = {"[PAD]", "[UNK]", "[START]", "[STOP]"};
    if (id < 0 || id >= kReservedCount) throw IndexError("no reserved token with id " + std::to_string(id));
    return kNames[id];
}

bool Vocabulary::contains(std::string_view token) const {
    return token_to_id.find(std::string(token)) != token_to_id.end();
}

std::int32_t Vocabulary::id_or_unk(std::string_view token) const {
    const auto it = token_to_id.find(std::string(token));
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
    if (id < 0 || id >= size()) {
        throw IndexError("vocabulary id " + std::to_string(id) + " out of range [0," +
                         std::to_string(size()) + ")");
    }
    return id_to_token[static_cast<std::size_t>(id)];
}

namespace {

Vocabulary empty_vocab() {
    Vocabulary v;
    for (std::int32_t i = 0; i < Vocabulary::kReservedCount; ++i) {
        v.id_to_token.emplace_back(Vocabulary::reserved_token(i));
        v.counts.push_back(0);
        v.token_to_id.emplace(Vocabulary::reserved_token(i), i);
    }
    return v;
}

bool is_reserved_token_string(const std::string& token) {
    for (std::int32_t i = 0; i < Vocabulary::kReservedCount; ++i) {
        if (token == Vocabulary::reserved_token(i)) return true;
    }
    return false;
}

}  // namespace

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::int32_t max_size) {
    if (max_size <= Vocabulary::kReservedCount) {
        throw ContractError("vocabulary size must exceed the " +
                            std::to_string(Vocabulary::kReservedCount) + " reserved tokens");
    }
    std::map<std::string, std::int64_t> freq;  // ordered: determinism independent of hashing
    std::int64_t total = 0;
    for (const auto& seq : corpus) {
        for (const auto& tok : seq) {
            if (tok.empty() || is_reserved_token_string(tok)) continue;
            ++freq[tok];
            ++total;
        }
    }
    if (total == 0) throw EmptyInputError("empty corpus: no tokens to build a vocabulary from");

    std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v = empty_vocab();
    const std::size_t keep = static_cast<std::size_t>(max_size - Vocabulary::kReservedCount);
    for (std::size_t i = 0; i < ranked.size() && i < keep; ++i) {
        const std::int32_t id = v.size();
        v.token_to_id.emplace(ranked[i].first, id);
        v.id_to_token.push_back(ranked[i].first);
        v.counts.push_back(ranked[i].second);
    }
    return v;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
    for (std::int32_t id = Vocabulary::kReservedCount; id < vocab.size(); ++id) {
        out << vocab.id_to_token[static_cast<std::size_t>(id)] << '\t'
            << vocab.counts[static_cast<std::size_t>(id)] << '\n';
    }
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary v = empty_vocab();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw CorruptionError("vocabulary file " + path + " line " + std::to_string(lineno) +
                                  ": expected token<TAB>count");
        }
        std::string token = line.substr(0, tab);
        std::int64_t count = 0;
        try {
            count = std::stoll(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw CorruptionError("vocabulary file " + path + " line " + std::to_string(lineno) +
                                  ": bad count field");
        }
        if (is_reserved_token_string(token) || v.contains(token)) {
            throw CorruptionError("vocabulary file " + path + " line " + std::to_string(lineno) +
                                  ": duplicate or reserved token '" + token + "'");
        }
        const std::int32_t id = v.size();
        v.token_to_id.emplace(token, id);
        v.id_to_token.push_back(std::move(token));
        v.counts.push_back(count);
    }
    return v;
}

EncodedSource encode_source(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::int64_t max_enc) {
    if (tokens.empty()) throw EmptyInputError("empty article: nothing to encode");
    const std::size_t n = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_enc));
    EncodedSource out;
    out.ids.reserve(n);
    out.ext_ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t id = vocab.id_or_unk(tokens[i]);
        out.ids.push_back(id);
        if (id != Vocabulary::kUnk) {
            out.ext_ids.push_back(id);
            continue;
        }
        std::int32_t oov_index = -1;
        for (std::size_t k = 0; k < out.oov_list.size(); ++k) {
            if (out.oov_list[k] == tokens[i]) {
                oov_index = static_cast<std::int32_t>(k);
                break;
            }
        }
        if (oov_index < 0) {
            oov_index = static_cast<std::int32_t>(out.oov_list.size());
            out.oov_list.push_back(tokens[i]);
        }
        out.ext_ids.push_back(vocab.size() + oov_index);
    }
    return out;
}

EncodedTarget encode_target(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::span<const std::string> oov_list, std::int64_t max_dec) {
    if (tokens.empty()) throw EmptyInputError("empty summary: nothing to encode");
    const std::size_t n = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(max_dec));
    EncodedTarget out;
    out.dec_input.reserve(n + 1);
    out.dec_target.reserve(n + 1);
    out.dec_input.push_back(Vocabulary::kStart);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t id = vocab.id_or_unk(tokens[i]);
        out.dec_input.push_back(id);
        if (id != Vocabulary::kUnk) {
            out.dec_target.push_back(id);
            continue;
        }
        std::int32_t ext = Vocabulary::kUnk;
        for (std::size_t k = 0; k < oov_list.size(); ++k) {
            if (oov_list[k] == tokens[i]) {
                ext = vocab.size() + static_cast<std::int32_t>(k);
                break;
            }
        }
        out.dec_target.push_back(ext);
    }
    out.dec_target.push_back(Vocabulary::kStop);
    return out;
}

EncodedExample encode_example(std::span<const std::string> article_tokens,
                              std::span<const std::string> summary_tokens,
                              const Vocabulary& vocab, std::int64_t max_enc,
                              std::int64_t max_dec) {
    EncodedExample ex;
    EncodedSource src = encode_source(article_tokens, vocab, max_enc);
    EncodedTarget tgt = encode_target(summary_tokens, vocab, src.oov_list, max_dec);
    ex.enc_ids = std::move(src.ids);
    ex.enc_ext_ids = std::move(src.ext_ids);
    ex.oov_list = std::move(src.oov_list);
    ex.dec_input = std::move(tgt.dec_input);
    ex.dec_target = std::move(tgt.dec_target);
    return ex;
}

Corpus read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            ++corpus.skipped;
            continue;
        }
        if (!obj.is_object() || !obj.contains("article") || !obj.contains("summary") ||
            !obj["article"].is_string() || !obj["summary"].is_string()) {
            ++corpus.skipped;
            continue;
        }
        corpus.pairs.push_back({obj["article"].get<std::string>(), obj["summary"].get<std::string>()});
    }
    if (in.bad()) throw IoError("I/O error while reading corpus file: " + path);
    return corpus;
}

std::span<const std::int32_t> Batch::enc_ids_row(std::int32_t b) const {
    return {enc_ids.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(enc_len),
            static_cast<std::size_t>(enc_len)};
}
std::span<const std::int32_t> Batch::enc_ext_ids_row(std::int32_t b) const {
    return {enc_ext_ids.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(enc_len),
            static_cast<std::size_t>(enc_len)};
}
std::span<const std::uint8_t> Batch::enc_mask_row(std::int32_t b) const {
    return {enc_mask.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(enc_len),
            static_cast<std::size_t>(enc_len)};
}
std::span<const std::int32_t> Batch::dec_input_row(std::int32_t b) const {
    return {dec_input.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(dec_len),
            static_cast<std::size_t>(dec_len)};
}
std::span<const std::int32_t> Batch::dec_target_row(std::int32_t b) const {
    return {dec_target.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(dec_len),
            static_cast<std::size_t>(dec_len)};
}
std::span<const std::uint8_t> Batch::dec_mask_row(std::int32_t b) const {
    return {dec_mask.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(dec_len),
            static_cast<std::size_t>(dec_len)};
}

std::int64_t Batch::enc_true_len(std::int32_t b) const {
    const auto row = enc_mask_row(b);
    std::int64_t n = 0;
    for (std::uint8_t m : row) n += m;
    return n;
}

std::int64_t Batch::dec_true_len(std::int32_t b) const {
    const auto row = dec_mask_row(b);
    std::int64_t n = 0;
    for (std::uint8_t m : row) n += m;
    return n;
}

Batch make_batch(std::span<const EncodedExample> examples) {
    if (examples.empty()) throw ContractError("make_batch of zero examples");
    Batch batch;
    batch.batch_size = static_cast<std::int32_t>(examples.size());
    for (const EncodedExample& ex : examples) {
        batch.enc_len = std::max<std::int64_t>(batch.enc_len,
                                               static_cast<std::int64_t>(ex.enc_ids.size()));
        batch.dec_len = std::max<std::int64_t>(batch.dec_len,
                                               static_cast<std::int64_t>(ex.dec_input.size()));
        batch.max_oov = std::max<std::int32_t>(batch.max_oov,
                                               static_cast<std::int32_t>(ex.oov_list.size()));
    }
    const std::size_t enc_total = static_cast<std::size_t>(batch.batch_size) *
                                  static_cast<std::size_t>(batch.enc_len);
    const std::size_t dec_total = static_cast<std::size_t>(batch.batch_size) *
                                  static_cast<std::size_t>(batch.dec_len);
    batch.enc_ids.assign(enc_total, Vocabulary::kPad);
    batch.enc_ext_ids.assign(enc_total, Vocabulary::kPad);
    batch.enc_mask.assign(enc_total, 0);
    batch.dec_input.assign(dec_total, Vocabulary::kPad);
    batch.dec_target.assign(dec_total, Vocabulary::kPad);
    batch.dec_mask.assign(dec_total, 0);

    for (std::size_t b = 0; b < examples.size(); ++b) {
        const EncodedExample& ex = examples[b];
        const std::size_t enc_off = b * static_cast<std::size_t>(batch.enc_len);
        for (std::size_t i = 0; i < ex.enc_ids.size(); ++i) {
            batch.enc_ids[enc_off + i] = ex.enc_ids[i];
            batch.enc_ext_ids[enc_off + i] = ex.enc_ext_ids[i];
            batch.enc_mask[enc_off + i] = 1;
        }
        const std::size_t dec_off = b * static_cast<std::size_t>(batch.dec_len);
        for (std::size_t i = 0; i < ex.dec_input.size(); ++i) {
            batch.dec_input[dec_off + i] = ex.dec_input[i];
            batch.dec_target[dec_off + i] = ex.dec_target[i];
            batch.dec_mask[dec_off + i] = 1;
        }
        batch.oov_lists.push_back(ex.oov_list);
    }
    return batch;
}

std::vector<Batch> make_batches(const std::vector<EncodedExample>& examples,
                                std::int32_t batch_size, std::uint64_t shuffle_seed) {
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(shuffle_seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    std::vector<EncodedExample> group;
    for (std::size_t i = 0; i < order.size(); ++i) {
        group.push_back(examples[order[i]]);
        if (static_cast<std::int32_t>(group.size()) == batch_size || i + 1 == order.size()) {
            batches.push_back(make_batch(group));
            group.clear();
        }
    }
    return batches;
}

}  // namespace pgnet
