#include "uqac/runtime/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uqac/errors.hpp"

namespace uqac::runtime {

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) out += token_bytes(id);
    return out;
}

// --- PieceTokenizer -------------------------------------------------------

PieceTokenizer::PieceTokenizer(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (pieces_[i].empty()) throw ConfigError("empty piece in vocabulary");
        index_.emplace(pieces_[i], static_cast<TokenId>(i));
        longest_ = std::max(longest_, pieces_[i].size());
    }
}

std::vector<TokenId> PieceTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t i = 0;
    while (i < text.size()) {
        bool matched = false;
        for (std::size_t len = std::min(longest_, text.size() - i); len > 0; --len) {
            auto it = index_.find(text.substr(i, len));
            if (it != index_.end()) {
                out.push_back(it->second);
                i += len;
                matched = true;
                break;
            }
        }
        if (!matched) {
            throw FormatError("text not representable with piece vocabulary at byte " + std::to_string(i));
        }
    }
    return out;
}

std::string PieceTokenizer::token_bytes(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) throw PositionError("token id out of range");
    return pieces_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> PieceTokenizer::find_token(std::string_view piece) const {
    auto it = index_.find(piece);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// --- pre-tokenization -----------------------------------------------------

namespace {

enum class CharClass { letter, digit, space, other };

struct CodePoint {
    char32_t cp;
    std::size_t len;
};

CodePoint decode_utf8(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) return {b0, 1};
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
        }
    }
    return {b0, 1};  // invalid sequence: treat the byte on its own
}

CharClass classify(char32_t cp) {
    if (cp < 0x80) {
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return CharClass::letter;
        if (cp >= '0' && cp <= '9') return CharClass::digit;
        if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return CharClass::space;
        return CharClass::other;
    }
    switch (cp) {
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return CharClass::space;
        case 0xAA: case 0xB5: case 0xBA:
            return CharClass::letter;
        case 0xB2: case 0xB3: case 0xB9: case 0xBC: case 0xBD: case 0xBE:
            return CharClass::digit;
        case 0xD7: case 0xF7:
            return CharClass::other;
        default:
            break;
    }
    if (cp >= 0x2000 && cp <= 0x200A) return CharClass::space;
    if (cp >= 0xA1 && cp <= 0xBF) return CharClass::other;
    if (cp >= 0x2010 && cp <= 0x2BFF) return CharClass::other;  // punctuation, arrows, math symbols
    if (cp >= 0x3001 && cp <= 0x303F) return CharClass::other;
    if (cp >= 0xFF01 && cp <= 0xFF0F) return CharClass::other;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return CharClass::other;  // emoji
    return CharClass::letter;
}

bool is_newline(char32_t cp) { return cp == '\r' || cp == '\n'; }

class Splitter {
public:
    Splitter(std::string_view text, SplitPattern pattern) : text_(text), pattern_(pattern) {}

    std::vector<std::string_view> run() {
        std::vector<std::string_view> out;
        std::size_t i = 0;
        while (i < text_.size()) {
            const std::size_t end = match_at(i);
            out.push_back(text_.substr(i, end - i));
            i = end;
        }
        return out;
    }

private:
    CodePoint at(std::size_t i) const { return decode_utf8(text_, i); }
    CharClass cls(std::size_t i) const { return i < text_.size() ? classify(at(i).cp) : CharClass::other; }
    bool valid(std::size_t i) const { return i < text_.size(); }

    std::size_t consume(std::size_t i, CharClass c, std::size_t max_count = std::numeric_limits<std::size_t>::max()) const {
        std::size_t n = 0;
        while (valid(i) && n < max_count && classify(at(i).cp) == c) {
            i += at(i).len;
            ++n;
        }
        return i;
    }

    std::size_t contraction(std::size_t i, bool case_insensitive) const {
        if (text_[i] != '\'') return i;
        auto lower = [&](std::size_t k) -> char {
            if (!valid(k)) return '\0';
            char c = text_[k];
            if (case_insensitive && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            return c;
        };
        const char a = lower(i + 1), b = lower(i + 2);
        if (a == 's' || a == 't' || a == 'm' || a == 'd') return i + 2;
        if ((a == 'r' && b == 'e') || (a == 'v' && b == 'e') || (a == 'l' && b == 'l')) return i + 3;
        return i;
    }

    // Longest whitespace run starting at i; returns its end.
    std::size_t space_run(std::size_t i) const { return consume(i, CharClass::space); }

    // \s+(?!\S) | \s+
    std::size_t trailing_space(std::size_t i) const {
        const std::size_t end = space_run(i);
        if (end == text_.size()) return end;
        // back off one code point so the last space joins the following token
        std::size_t last = i;
        for (std::size_t k = i; k < end; k += at(k).len) last = k;
        return last > i ? last : end;
    }

    std::size_t match_gpt2(std::size_t i) const {
        if (std::size_t e = contraction(i, false); e != i) return e;
        const CharClass c0 = cls(i);
        const bool lead_space = text_[i] == ' ';
        const std::size_t j = lead_space ? i + 1 : i;
        const CharClass c1 = lead_space ? cls(j) : c0;
        if (valid(j) && c1 == CharClass::letter) return consume(j, CharClass::letter);
        if (valid(j) && c1 == CharClass::digit) return consume(j, CharClass::digit);
        if (valid(j) && c1 == CharClass::other) return consume(j, CharClass::other);
        if (c0 == CharClass::space) return trailing_space(i);
        return i + at(i).len;
    }

    std::size_t match_llama(std::size_t i) const {
        if (std::size_t e = contraction(i, true); e != i) return e;
        const CodePoint first = at(i);
        const CharClass c0 = classify(first.cp);
        // [^\r\n\p{L}\p{N}]?\p{L}+
        if (c0 == CharClass::letter) return consume(i, CharClass::letter);
        if (!is_newline(first.cp) && c0 != CharClass::digit && cls(i + first.len) == CharClass::letter &&
            valid(i + first.len)) {
            return consume(i + first.len, CharClass::letter);
        }
        // \p{N}{1,3} or \p{N}
        if (c0 == CharClass::digit) return consume(i, CharClass::digit, pattern_ == SplitPattern::llama3 ? 3 : 1);
        // ' ?[^\s\p{L}\p{N}]+[\r\n]*'
        {
            const bool lead_space = first.cp == ' ';
            const std::size_t j = lead_space ? i + 1 : i;
            if (valid(j) && cls(j) == CharClass::other) {
                std::size_t e = consume(j, CharClass::other);
                while (valid(e) && is_newline(at(e).cp)) ++e;
                return e;
            }
        }
        if (c0 == CharClass::space) {
            // \s*[\r\n]+ : up to and including the last newline of the run
            const std::size_t end = space_run(i);
            std::size_t last_nl = std::string_view::npos;
            for (std::size_t k = i; k < end; k += at(k).len) {
                if (is_newline(at(k).cp)) last_nl = k;
            }
            if (last_nl != std::string_view::npos) return last_nl + 1;
            return trailing_space(i);
        }
        return i + first.len;
    }

    std::size_t match_at(std::size_t i) const {
        return pattern_ == SplitPattern::gpt2 ? match_gpt2(i) : match_llama(i);
    }

    std::string_view text_;
    SplitPattern pattern_;
};

// GPT-2 byte <-> printable code point table.
struct ByteMap {
    std::array<std::string, 256> to_mapped;
    std::array<int, 512> from_cp{};

    ByteMap() {
        from_cp.fill(-1);
        int extra = 0;
        for (int b = 0; b < 256; ++b) {
            const bool printable = (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174 && b <= 255);
            const int cp = printable ? b : 256 + extra++;
            from_cp[static_cast<std::size_t>(cp)] = b;
            std::string s;
            if (cp < 0x80) {
                s.push_back(static_cast<char>(cp));
            } else {
                s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
                s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
            }
            to_mapped[static_cast<std::size_t>(b)] = std::move(s);
        }
    }
};

const ByteMap& byte_map() {
    static const ByteMap map;
    return map;
}

SplitPattern pattern_from_regex(const std::string& regex) {
    if (regex.find("\\p{N}{1,3}") != std::string::npos) return SplitPattern::llama3;
    if (regex.find("[^\\r\\n\\p{L}\\p{N}]?\\p{L}+") != std::string::npos) return SplitPattern::qwen2;
    if (regex.find(" ?\\p{L}+") != std::string::npos) return SplitPattern::gpt2;
    throw FormatError("unsupported pre-tokenizer split pattern: " + regex);
}

}  // namespace

std::vector<std::string_view> pre_tokenize(std::string_view text, SplitPattern pattern) {
    return Splitter(text, pattern).run();
}

// --- BpeTokenizer ---------------------------------------------------------

std::unique_ptr<BpeTokenizer> BpeTokenizer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open tokenizer file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return from_json_text(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("malformed tokenizer file " + path.string() + ": " + e.what());
    }
}

std::unique_ptr<BpeTokenizer> BpeTokenizer::from_json_text(std::string_view json_text) {
    const auto doc = nlohmann::json::parse(json_text);
    std::unique_ptr<BpeTokenizer> tok(new BpeTokenizer());

    const auto& model = doc.at("model");
    if (model.value("type", std::string("BPE")) != "BPE") throw FormatError("only BPE tokenizer models are supported");
    if (model.value("byte_fallback", false)) throw FormatError("byte_fallback BPE is not supported");
    tok->ignore_merges_ = model.value("ignore_merges", false);

    std::size_t max_id = 0;
    for (const auto& [piece, id] : model.at("vocab").items()) max_id = std::max(max_id, id.get<std::size_t>());
    if (doc.contains("added_tokens")) {
        for (const auto& t : doc.at("added_tokens")) max_id = std::max(max_id, t.at("id").get<std::size_t>());
    }
    tok->id_to_token_.assign(max_id + 1, std::string());
    tok->is_added_.assign(max_id + 1, false);
    for (const auto& [piece, id] : model.at("vocab").items()) {
        const auto tid = id.get<TokenId>();
        tok->vocab_.emplace(piece, tid);
        tok->id_to_token_[static_cast<std::size_t>(tid)] = piece;
    }

    int rank = 0;
    for (const auto& m : model.at("merges")) {
        std::string key;
        if (m.is_string()) {
            key = m.get<std::string>();
        } else {
            key = m.at(0).get<std::string>() + " " + m.at(1).get<std::string>();
        }
        tok->merge_rank_.emplace(std::move(key), rank++);
    }

    if (doc.contains("added_tokens")) {
        for (const auto& t : doc.at("added_tokens")) {
            const auto id = t.at("id").get<TokenId>();
            auto content = t.at("content").get<std::string>();
            tok->id_to_token_[static_cast<std::size_t>(id)] = content;
            tok->is_added_[static_cast<std::size_t>(id)] = true;
            tok->vocab_[content] = id;
            tok->added_.emplace_back(std::move(content), id);
        }
        std::stable_sort(tok->added_.begin(), tok->added_.end(),
                         [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    }

    if (doc.contains("normalizer") && !doc.at("normalizer").is_null()) {
        const auto type = doc.at("normalizer").value("type", std::string());
        if (type != "NFC") throw FormatError("unsupported normalizer: " + type);
    }

    // Pre-tokenizer: ByteLevel, optionally preceded by Digits and/or a Split regex.
    bool saw_byte_level = false;
    bool saw_split = false;
    auto handle = [&](const nlohmann::json& pt) {
        const auto type = pt.at("type").get<std::string>();
        if (type == "ByteLevel") {
            saw_byte_level = true;
            tok->add_prefix_space_ = pt.value("add_prefix_space", false);
            tok->use_regex_ = pt.value("use_regex", true);
        } else if (type == "Digits") {
            if (!pt.value("individual_digits", false)) throw FormatError("Digits pre-tokenizer needs individual_digits");
            tok->split_digits_ = true;
        } else if (type == "Split") {
            saw_split = true;
            tok->pattern_ = pattern_from_regex(pt.at("pattern").at("Regex").get<std::string>());
        } else {
            throw FormatError("unsupported pre-tokenizer: " + type);
        }
    };
    const auto& pre = doc.at("pre_tokenizer");
    if (pre.is_null()) throw FormatError("tokenizer has no pre-tokenizer");
    if (pre.at("type") == "Sequence") {
        for (const auto& pt : pre.at("pretokenizers")) handle(pt);
    } else {
        handle(pre);
    }
    if (!saw_byte_level) throw FormatError("only byte-level BPE tokenizers are supported");
    if (saw_split && tok->use_regex_) throw FormatError("Split followed by regex ByteLevel is not supported");
    if (!saw_split && !tok->use_regex_) throw FormatError("ByteLevel without regex needs a Split pre-tokenizer");
    return tok;
}

void BpeTokenizer::encode_word(std::string_view word, std::vector<TokenId>& out) const {
    const auto& bm = byte_map();
    std::vector<std::string> symbols;
    symbols.reserve(word.size());
    std::string whole;
    for (char c : word) {
        symbols.push_back(bm.to_mapped[static_cast<unsigned char>(c)]);
        whole += symbols.back();
    }
    if (ignore_merges_) {
        if (auto it = vocab_.find(whole); it != vocab_.end()) {
            out.push_back(it->second);
            return;
        }
    }
    while (symbols.size() > 1) {
        int best = std::numeric_limits<int>::max();
        std::size_t best_at = 0;
        for (std::size_t k = 0; k + 1 < symbols.size(); ++k) {
            auto it = merge_rank_.find(symbols[k] + " " + symbols[k + 1]);
            if (it != merge_rank_.end() && it->second < best) {
                best = it->second;
                best_at = k;
            }
        }
        if (best == std::numeric_limits<int>::max()) break;
        const std::string left = symbols[best_at];
        const std::string right = symbols[best_at + 1];
        std::vector<std::string> merged;
        merged.reserve(symbols.size());
        for (std::size_t k = 0; k < symbols.size(); ++k) {
            if (k + 1 < symbols.size() && symbols[k] == left && symbols[k + 1] == right) {
                merged.push_back(left + right);
                ++k;
            } else {
                merged.push_back(symbols[k]);
            }
        }
        symbols = std::move(merged);
    }
    for (const auto& s : symbols) {
        auto it = vocab_.find(s);
        if (it == vocab_.end()) throw FormatError("byte-level symbol missing from vocabulary");
        out.push_back(it->second);
    }
}

void BpeTokenizer::encode_ordinary(std::string_view text, std::vector<TokenId>& out) const {
    if (text.empty()) return;
    std::string prefixed;
    if (add_prefix_space_ && text.front() != ' ') {
        prefixed = " " + std::string(text);
        text = prefixed;
    }
    std::vector<std::string_view> chunks;
    if (split_digits_) {
        std::size_t i = 0;
        while (i < text.size()) {
            if (text[i] >= '0' && text[i] <= '9') {
                chunks.push_back(text.substr(i, 1));
                ++i;
            } else {
                std::size_t j = i;
                while (j < text.size() && !(text[j] >= '0' && text[j] <= '9')) ++j;
                chunks.push_back(text.substr(i, j - i));
                i = j;
            }
        }
    } else {
        chunks.push_back(text);
    }
    for (auto chunk : chunks) {
        for (auto word : pre_tokenize(chunk, pattern_)) encode_word(word, out);
    }
}

std::vector<TokenId> BpeTokenizer::encode(std::string_view text) const {
    std::vector<TokenId> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        bool hit = false;
        for (const auto& [content, id] : added_) {
            if (!content.empty() && text.compare(i, content.size(), content) == 0) {
                encode_ordinary(text.substr(start, i - start), out);
                out.push_back(id);
                i += content.size();
                start = i;
                hit = true;
                break;
            }
        }
        if (!hit) ++i;
    }
    encode_ordinary(text.substr(start), out);
    return out;
}

std::string BpeTokenizer::token_bytes(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) throw PositionError("token id out of range");
    const auto& piece = id_to_token_[static_cast<std::size_t>(id)];
    if (is_added_[static_cast<std::size_t>(id)]) return piece;
    const auto& bm = byte_map();
    std::string out;
    std::size_t i = 0;
    while (i < piece.size()) {
        const auto cp = decode_utf8(piece, i);
        const int b = cp.cp < 512 ? bm.from_cp[cp.cp] : -1;
        if (b >= 0) {
            out.push_back(static_cast<char>(b));
        } else {
            out.append(piece, i, cp.len);
        }
        i += cp.len;
    }
    return out;
}

std::optional<TokenId> BpeTokenizer::find_token(std::string_view piece) const {
    auto it = vocab_.find(std::string(piece));
    if (it == vocab_.end()) return std::nullopt;
    return it->second;
}

}  // namespace uqac::runtime
