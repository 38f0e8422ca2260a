#include "uqac/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "uqac/errors.hpp"

namespace uqac::datasets {

extern const char* const kEmbeddedProfiles;  // generated from config/profiles.json

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view tag_name(DatasetTag tag) noexcept {
    switch (tag) {
        case DatasetTag::gsm8k: return "gsm8k";
        case DatasetTag::math: return "math";
        case DatasetTag::bbh: return "bbh";
    }
    return "?";
}

DatasetTag parse_tag(std::string_view name) {
    std::string s(name);
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "gsm8k") return DatasetTag::gsm8k;
    if (s == "math") return DatasetTag::math;
    if (s == "bbh") return DatasetTag::bbh;
    throw ConfigError("unknown dataset tag '" + std::string(name) + "' (expected gsm8k, math or bbh)");
}

std::size_t published_size(DatasetTag tag) noexcept {
    switch (tag) {
        case DatasetTag::gsm8k: return 1319;
        case DatasetTag::math: return 5000;
        case DatasetTag::bbh: return 6511;
    }
    return 0;
}

std::string_view method_name(ExtractionMethod m) noexcept {
    switch (m) {
        case ExtractionMethod::none: return "none";
        case ExtractionMethod::boxed: return "boxed";
        case ExtractionMethod::last_number: return "last-number";
        case ExtractionMethod::choice_letter: return "choice-letter";
        case ExtractionMethod::answer_phrase: return "answer-phrase";
    }
    return "?";
}

// --- text helpers ----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    if (from.empty()) return;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Index one past the brace group opening at `open` (s[open] == '{'), or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;  // escaped character, including \{ and \}
            continue;
        }
        if (s[i] == '{') ++depth;
        if (s[i] == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

// A LaTeX macro argument starting at i: a brace group (returned without
// braces) or a single character. Sets `next` past the argument.
std::optional<std::string> macro_arg(const std::string& s, std::size_t i, std::size_t& next) {
    while (i < s.size() && s[i] == ' ') ++i;
    if (i >= s.size()) return std::nullopt;
    if (s[i] == '{') {
        const std::size_t close = match_brace(s, i);
        if (close == std::string::npos) return std::nullopt;
        next = close;
        return s.substr(i + 1, close - i - 2);
    }
    if (s[i] == '\\') {
        std::size_t j = i + 1;
        while (j < s.size() && is_alpha(s[j])) ++j;
        next = j;
        return s.substr(i, j - i);
    }
    next = i + 1;
    return s.substr(i, 1);
}

// Replaces every `\name{arg}` by fn(arg), innermost-safe by rescanning.
template <typename Fn>
void rewrite_macro(std::string& s, std::string_view name, std::size_t n_args, Fn fn) {
    std::size_t pos = 0;
    const std::string tag = "\\" + std::string(name);
    while ((pos = s.find(tag, pos)) != std::string::npos) {
        const std::size_t after = pos + tag.size();
        if (after < s.size() && is_alpha(s[after])) {  // a longer macro name
            pos = after;
            continue;
        }
        std::vector<std::string> args;
        std::size_t cur = after;
        bool ok = true;
        for (std::size_t a = 0; a < n_args; ++a) {
            std::size_t next = cur;
            auto arg = macro_arg(s, cur, next);
            if (!arg) {
                ok = false;
                break;
            }
            args.push_back(*arg);
            cur = next;
        }
        if (!ok) {
            pos = after;
            continue;
        }
        const std::string repl = fn(args);
        s.replace(pos, cur - pos, repl);
    }
}

bool simple_atom(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
        if (!std::isalnum(static_cast<unsigned char>(s[i])) && s[i] != '.') return false;
    }
    return true;
}

std::string paren(const std::string& s) { return simple_atom(s) ? s : "(" + s + ")"; }

// Exact rational with 64-bit parts.
struct Rational {
    long long num = 0;
    long long den = 1;
};

std::optional<Rational> make_rational(__int128 num, __int128 den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 a = num < 0 ? -num : num, b = den;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    constexpr __int128 lim = static_cast<__int128>(1) << 62;
    if (num >= lim || num <= -lim || den >= lim) return std::nullopt;
    return Rational{static_cast<long long>(num), static_cast<long long>(den)};
}

// "[-]digits[.digits]" with optional thousands commas.
std::optional<Rational> parse_decimal(std::string_view s) {
    static const std::regex re(R"(^(-?)(\d{1,3}(?:,\d{3})+|\d+)?(?:\.(\d+))?$)");
    std::string str(s);
    std::smatch m;
    if (!std::regex_match(str, m, re)) return std::nullopt;
    std::string int_part = m[2].str();
    const std::string frac = m[3].str();
    if (int_part.empty() && frac.empty()) return std::nullopt;
    int_part.erase(std::remove(int_part.begin(), int_part.end(), ','), int_part.end());
    if (int_part.size() + frac.size() > 18) return std::nullopt;
    __int128 num = 0;
    for (char c : int_part) num = num * 10 + (c - '0');
    __int128 den = 1;
    for (char c : frac) {
        num = num * 10 + (c - '0');
        den *= 10;
    }
    if (m[1].matched && !m[1].str().empty()) num = -num;
    return make_rational(num, den);
}

std::optional<Rational> parse_rational(std::string_view s) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return parse_decimal(s);
    auto strip = [](std::string_view p) {
        if (p.size() >= 2 && p.front() == '(' && p.back() == ')') p = p.substr(1, p.size() - 2);
        return p;
    };
    const auto a = parse_decimal(strip(s.substr(0, slash)));
    const auto b = parse_decimal(strip(s.substr(slash + 1)));
    if (!a || !b || b->num == 0) return std::nullopt;
    return make_rational(static_cast<__int128>(a->num) * b->den, static_cast<__int128>(a->den) * b->num);
}

std::string format_rational(const Rational& r) {
    return r.den == 1 ? std::to_string(r.num) : std::to_string(r.num) + "/" + std::to_string(r.den);
}

}  // namespace

// --- canonicalization ------------------------------------------------------

std::string canonical_math(std::string_view expr) {
    std::string s = trim(expr);
    // unit text after a value ("5\text{ cm}") is dropped; a bare \text{} is unwrapped
    for (const char* unit_macro : {"\\text{", "\\mbox{", "\\mathrm{"}) {
        const auto pos = s.find(unit_macro);
        if (pos != std::string::npos && pos > 0) {
            const std::string head = trim(s.substr(0, pos));
            if (!head.empty() && (is_digit(head.back()) || head.back() == '}')) {
                const auto close = match_brace(s, pos + std::string_view(unit_macro).size() - 1);
                if (close != std::string::npos && trim(s.substr(close)).empty()) s = head;
            }
        }
    }
    for (const char* m : {"text", "textbf", "mathrm", "mathbf", "mbox", "boxed", "fbox"}) {
        rewrite_macro(s, m, 1, [](const std::vector<std::string>& a) { return a[0]; });
    }
    for (const char* w : {"\\left", "\\right", "\\displaystyle", "\\!", "\\,", "\\;", "\\:", "\\ ", "~"}) {
        replace_all(s, w, "");
    }
    replace_all(s, "^{\\circ}", "");
    replace_all(s, "^\\circ", "");
    replace_all(s, "\\%", "");
    replace_all(s, "%", "");
    replace_all(s, "\\$", "");
    replace_all(s, "$", "");
    replace_all(s, "\\dfrac", "\\frac");
    replace_all(s, "\\tfrac", "\\frac");
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());

    rewrite_macro(s, "sqrt", 1, [](const std::vector<std::string>& a) { return "sqrt(" + a[0] + ")"; });
    rewrite_macro(s, "frac", 2,
                  [](const std::vector<std::string>& a) { return paren(a[0]) + "/" + paren(a[1]); });
    replace_all(s, "\\pi", "pi");
    replace_all(s, "\\infty", "inf");
    replace_all(s, "\\cdot", "*");
    replace_all(s, "\\times", "*");

    // "x=5" -> "5"
    if (s.size() > 2 && is_alpha(s[0]) && s[1] == '=') s = s.substr(2);
    while (!s.empty() && s.back() == '.') s.pop_back();
    if (auto r = parse_rational(s)) return format_rational(*r);
    if (s.size() > 1 && s[0] == '-') {
        if (auto r = parse_rational(s.substr(1))) return format_rational({-r->num, r->den});
    }
    return s;
}

std::string canonical_number(std::string_view text) {
    std::string s = canonical_math(text);
    if (parse_rational(s)) return s;
    // fall back to the first number in the text ("18 dollars", "$18.00")
    static const std::regex num(R"(-?\d+(?:,\d{3})*(?:\.\d+)?)");
    std::smatch m;
    if (std::regex_search(s, m, num)) {
        if (auto r = parse_decimal(m.str())) return format_rational(*r);
    }
    return {};
}

std::string canonical_label(std::string_view text) {
    std::string s(text);
    rewrite_macro(s, "text", 1, [](const std::vector<std::string>& a) { return a[0]; });
    rewrite_macro(s, "textbf", 1, [](const std::vector<std::string>& a) { return a[0]; });
    replace_all(s, "$", "");
    s = trim(s);
    while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
    static const std::regex letter(R"(^\(?([A-Ra-r])\)$|^\(([A-Ra-r])\)?$|^([A-Ra-r])$)");
    std::smatch m;
    if (std::regex_match(s, m, letter)) {
        for (int g = 1; g <= 3; ++g) {
            if (m[g].matched) return lower(m[g].str());
        }
    }
    // collapse internal whitespace
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return lower(out);
}

std::string canonicalize(std::string_view raw, DatasetTag tag) {
    switch (tag) {
        case DatasetTag::gsm8k: return canonical_number(raw);
        case DatasetTag::math: return canonical_math(raw);
        case DatasetTag::bbh: return canonical_label(raw);
    }
    return {};
}

bool judge(std::string_view extracted, std::string_view gold, DatasetTag tag) {
    if (extracted.empty() || gold.empty()) return false;
    switch (tag) {
        case DatasetTag::gsm8k: {
            const auto a = parse_rational(canonical_number(extracted));
            const auto b = parse_rational(canonical_number(gold));
            if (!a || !b) return false;
            if (a->den == 1 && b->den == 1) return a->num == b->num;
            const double x = static_cast<double>(a->num) / static_cast<double>(a->den);
            const double y = static_cast<double>(b->num) / static_cast<double>(b->den);
            return std::fabs(x - y) <= 1e-6 * std::max(std::fabs(x), std::fabs(y));
        }
        case DatasetTag::math: return canonical_math(extracted) == canonical_math(gold);
        case DatasetTag::bbh: return canonical_label(extracted) == canonical_label(gold);
    }
    return false;
}

// --- extraction -------------------------------------------------------------

std::optional<BoxedSpan> find_last_boxed(std::string_view text) {
    std::size_t best = std::string_view::npos;
    std::size_t tag_len = 0;
    for (std::string_view tag : {std::string_view("\\boxed"), std::string_view("\\fbox")}) {
        const auto p = text.rfind(tag);
        if (p != std::string_view::npos && (best == std::string_view::npos || p > best)) {
            best = p;
            tag_len = tag.size();
        }
    }
    if (best == std::string_view::npos) return std::nullopt;
    std::size_t i = best + tag_len;
    while (i < text.size() && text[i] == ' ') ++i;
    if (i < text.size() && text[i] == '{') {
        const auto close = match_brace(text, i);
        if (close == std::string_view::npos) return std::nullopt;
        return BoxedSpan{i + 1, close - 1};
    }
    // "\boxed 5"
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '$') ++i;
    if (i == b) return std::nullopt;
    return BoxedSpan{b, i};
}

namespace {

ExtractionResult make_result(std::string_view response, std::size_t b, std::size_t e, ExtractionMethod m,
                             DatasetTag tag) {
    ExtractionResult r;
    r.raw = std::string(response.substr(b, e - b));
    r.canonical = canonicalize(r.raw, tag);
    r.method = m;
    r.begin = b;
    r.end = e;
    r.success = !r.canonical.empty();
    return r;
}

}  // namespace

ExtractionResult extract_answer(std::string_view response, DatasetTag tag) {
    if (auto box = find_last_boxed(response)) {
        auto r = make_result(response, box->begin, box->end, ExtractionMethod::boxed, tag);
        if (r.success) return r;
    }
    const std::string text(response);
    if (tag == DatasetTag::gsm8k) {
        static const std::regex num(R"(-?\d+(?:,\d{3})*(?:\.\d+)?)");
        std::optional<std::pair<std::size_t, std::size_t>> last;
        for (auto it = std::sregex_iterator(text.begin(), text.end(), num); it != std::sregex_iterator(); ++it) {
            const auto b = static_cast<std::size_t>(it->position());
            const auto e = b + static_cast<std::size_t>(it->length());
            const bool left_ok = b == 0 || !std::isalnum(static_cast<unsigned char>(text[b - 1]));
            const bool right_ok = e == text.size() || !is_alpha(text[e]);
            if (left_ok && right_ok) last = {b, e};
        }
        if (last) return make_result(response, last->first, last->second, ExtractionMethod::last_number, tag);
    } else if (tag == DatasetTag::bbh) {
        static const std::regex opt(R"(\(([A-R])\))");
        std::optional<std::pair<std::size_t, std::size_t>> last;
        for (auto it = std::sregex_iterator(text.begin(), text.end(), opt); it != std::sregex_iterator(); ++it) {
            const auto b = static_cast<std::size_t>(it->position());
            last = {b, b + static_cast<std::size_t>(it->length())};
        }
        if (last) return make_result(response, last->first, last->second, ExtractionMethod::choice_letter, tag);
        const auto p = lower(text).rfind("answer is");
        if (p != std::string::npos) {
            std::size_t b = p + 9;
            while (b < text.size() && (text[b] == ' ' || text[b] == ':')) ++b;
            std::size_t e = text.find('\n', b);
            if (e == std::string::npos) e = text.size();
            while (e > b && (text[e - 1] == '.' || std::isspace(static_cast<unsigned char>(text[e - 1])))) --e;
            if (e > b) return make_result(response, b, e, ExtractionMethod::answer_phrase, tag);
        }
    }
    return {};
}

std::optional<AnswerSpan> answer_span_from_bytes(const runtime::Tokenizer& tokenizer, std::span<const TokenId> tokens,
                                                 std::size_t n_instr, std::size_t begin, std::size_t end) {
    if (begin >= end) return std::nullopt;
    std::size_t offset = 0;
    std::optional<std::size_t> first, last;
    for (std::size_t p = n_instr; p < tokens.size(); ++p) {
        const std::size_t len = tokenizer.token_bytes(tokens[p]).size();
        const std::size_t tb = offset, te = offset + len;
        if (len > 0 && tb < end && te > begin) {
            if (!first) first = p;
            last = p;
        }
        offset = te;
        if (offset >= end) break;
    }
    if (!first) return std::nullopt;
    return AnswerSpan{*first, *last + 1};
}

// --- loading ----------------------------------------------------------------

namespace {

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

std::string field(const json& obj, const char* key, const fs::path& path) {
    if (!obj.contains(key) || !obj[key].is_string()) {
        throw LoadError(path.string() + ": record without string field '" + key + "'");
    }
    return obj[key].get<std::string>();
}

std::string make_id(DatasetTag tag, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%05zu", std::string(tag_name(tag)).c_str(), i);
    return buf;
}

std::vector<TaskInstance> load_gsm8k(const fs::path& path) {
    std::vector<TaskInstance> out;
    for (const auto& rec : read_jsonl(path)) {
        TaskInstance t;
        t.dataset = DatasetTag::gsm8k;
        t.instance_id = make_id(t.dataset, out.size());
        t.question = field(rec, "question", path);
        const std::string ans = field(rec, "answer", path);
        const auto mark = ans.rfind("####");
        if (mark == std::string::npos) throw LoadError(path.string() + ": GSM8k answer without '####'");
        t.gold = canonical_number(ans.substr(mark + 4));
        if (t.gold.empty()) throw LoadError(path.string() + ": unparseable GSM8k gold '" + ans.substr(mark) + "'");
        t.template_id = "zero-shot";
        out.push_back(std::move(t));
    }
    return out;
}

TaskInstance math_instance(const json& rec, const fs::path& path, std::size_t index) {
    TaskInstance t;
    t.dataset = DatasetTag::math;
    t.instance_id = make_id(t.dataset, index);
    t.question = field(rec, "problem", path);
    if (rec.contains("type") && rec["type"].is_string()) t.subtask = rec["type"].get<std::string>();
    std::string gold_raw;
    if (rec.contains("answer") && rec["answer"].is_string()) {
        gold_raw = rec["answer"].get<std::string>();
    } else {
        const std::string sol = field(rec, "solution", path);
        const auto box = find_last_boxed(sol);
        if (!box) throw LoadError(path.string() + ": MATH solution without \\boxed{}");
        gold_raw = sol.substr(box->begin, box->end - box->begin);
    }
    t.gold = canonical_math(gold_raw);
    if (t.gold.empty()) throw LoadError(path.string() + ": empty MATH gold answer");
    t.template_id = "zero-shot";
    return t;
}

std::vector<TaskInstance> load_math(const fs::path& path) {
    std::vector<TaskInstance> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(math_instance(read_json(f), f, out.size()));
    } else {
        for (const auto& rec : read_jsonl(path)) out.push_back(math_instance(rec, path, out.size()));
    }
    return out;
}

// cot-prompts/<task>.txt: a description, a "-----" line, then exemplars
// "Q: ...\nA: ..." separated by blank lines.
std::vector<Exemplar> parse_bbh_exemplars(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("missing BBH exemplar file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (const auto dash = text.find("-----"); dash != std::string::npos) {
        const auto nl = text.find('\n', dash);
        text = nl == std::string::npos ? std::string() : text.substr(nl + 1);
    }
    std::vector<Exemplar> out;
    std::size_t pos = text.find("Q:");
    while (pos != std::string::npos) {
        const std::size_t next = text.find("\n\nQ:", pos);
        const std::string block = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        const auto a = block.find("\nA:");
        if (a == std::string::npos) throw LoadError(path.string() + ": exemplar without 'A:'");
        out.push_back({trim(block.substr(2, a - 2)), trim(block.substr(a + 3))});
        pos = next == std::string::npos ? next : next + 2;
    }
    return out;
}

std::vector<TaskInstance> load_bbh(const fs::path& path) {
    if (!fs::is_directory(path)) throw LoadError("BBH path must be a directory: " + path.string());
    fs::path task_dir = path;
    if (fs::is_directory(path / "bbh")) task_dir = path / "bbh";
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(task_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw LoadError("no BBH task files under " + task_dir.string());
    std::vector<TaskInstance> out;
    for (const auto& f : files) {
        const std::string task = f.stem().string();
        const auto shots = parse_bbh_exemplars(path / "cot-prompts" / (task + ".txt"));
        if (shots.size() != 3) {
            throw LoadError(task + ": expected 3 exemplars, found " + std::to_string(shots.size()));
        }
        const json doc = read_json(f);
        if (!doc.contains("examples") || !doc["examples"].is_array()) {
            throw LoadError(f.string() + ": missing 'examples' array");
        }
        for (const auto& ex : doc["examples"]) {
            TaskInstance t;
            t.dataset = DatasetTag::bbh;
            t.instance_id = make_id(t.dataset, out.size());
            t.subtask = task;
            t.question = field(ex, "input", f);
            t.gold = canonical_label(field(ex, "target", f));
            if (t.gold.empty()) throw LoadError(f.string() + ": empty BBH target");
            t.few_shot = shots;
            t.template_id = "three-shot";
            out.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace

std::vector<TaskInstance> load(DatasetTag tag, const fs::path& path, const LoadOptions& options) {
    if (!fs::exists(path)) throw LoadError("dataset path does not exist: " + path.string());
    std::vector<TaskInstance> out;
    switch (tag) {
        case DatasetTag::gsm8k: out = load_gsm8k(path); break;
        case DatasetTag::math: out = load_math(path); break;
        case DatasetTag::bbh: out = load_bbh(path); break;
    }
    if (out.size() != published_size(tag)) {
        const std::string msg = std::string(tag_name(tag)) + ": loaded " + std::to_string(out.size()) +
                                " instances, the published test split has " + std::to_string(published_size(tag));
        if (options.strict_counts) throw LoadError(msg);
        spdlog::warn("{}", msg);
    }
    return out;
}

fs::path default_path(DatasetTag tag, const fs::path& data_root) {
    switch (tag) {
        case DatasetTag::gsm8k: return data_root / "gsm8k" / "test.jsonl";
        case DatasetTag::math: {
            const auto jsonl = data_root / "math" / "test.jsonl";
            return fs::exists(jsonl) ? jsonl : data_root / "math" / "test";
        }
        case DatasetTag::bbh: return data_root / "bbh";
    }
    return data_root;
}

// --- prompts ----------------------------------------------------------------

const ModelProfile& PromptAssets::profile_for(std::string_view model_name) const {
    const std::string name = lower(std::string(model_name));
    for (const auto& p : profiles) {
        for (const auto& m : p.match) {
            if (!m.empty() && name.find(lower(m)) != std::string::npos) return p;
        }
    }
    return profile_named("default");
}

const ModelProfile& PromptAssets::profile_named(std::string_view name) const {
    for (const auto& p : profiles) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown model profile '" + std::string(name) + "'");
}

PromptAssets PromptAssets::from_json(const json& doc) {
    PromptAssets a;
    try {
        a.boxed_instruction = doc.at("boxed_instruction").get<std::string>();
        a.bbh_instruction = doc.at("bbh_instruction").get<std::string>();
        for (const auto& [name, p] : doc.at("profiles").items()) {
            ModelProfile m;
            m.name = name;
            m.match = p.value("match", std::vector<std::string>{});
            m.boxed_instruction = p.value("boxed_instruction", false);
            m.deep_thinking = p.value("deep_thinking", false);
            m.prompt_prefix = p.value("prompt_prefix", std::string());
            m.prompt_suffix = p.value("prompt_suffix", std::string());
            a.profiles.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed prompt profiles: ") + e.what());
    }
    if (std::none_of(a.profiles.begin(), a.profiles.end(), [](const ModelProfile& p) { return p.name == "default"; })) {
        a.profiles.push_back(ModelProfile{});
    }
    return a;
}

PromptAssets PromptAssets::from_file(const fs::path& path) {
    try {
        return from_json(read_json(path));
    } catch (const LoadError& e) {
        throw ConfigError(e.what());
    }
}

const PromptAssets& PromptAssets::builtin() {
    static const PromptAssets assets = from_json(json::parse(kEmbeddedProfiles));
    return assets;
}

std::string build_prompt(const TaskInstance& instance, const ModelProfile& profile, const PromptAssets& assets) {
    if (instance.dataset == DatasetTag::bbh) {
        std::string out;
        for (const auto& ex : instance.few_shot) out += "Q: " + ex.question + "\nA: " + ex.answer + "\n\n";
        out += "Q: " + instance.question + "\n\n" + assets.bbh_instruction;
        return out;
    }
    std::string out = instance.question;
    if (profile.boxed_instruction) out += "\n\n" + assets.boxed_instruction;
    return out;
}

std::string apply_chat_template(const ModelProfile& profile, std::string_view user_text) {
    return profile.prompt_prefix + std::string(user_text) + profile.prompt_suffix;
}

std::size_t max_new_tokens_for(DatasetTag tag, const ModelProfile& profile) noexcept {
    const std::size_t base = tag == DatasetTag::bbh ? 1536 : 1024;
    return base + (profile.deep_thinking ? 512 : 0);
}

}  // namespace uqac::datasets
