#include "mmra/text_scores.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mmra {

namespace {

// Kept identical to resources/stopwords.txt and resources/jargon.txt.
constexpr std::string_view kStopwords =
    "a an the and or of to in on at is are was were be been being it its this that these those "
    "with for as by from has have had which so but there their than then also into very";

constexpr std::string_view kJargon =
    "maybe perhaps possibly somewhat basically stuff things thing kind sort various etc unclear "
    "ambiguous arguably roughly seemingly presumably apparently synergy leverage paradigm holistic "
    "whatever literally vibe guess sorta kinda";

Lexicon from_words(std::string_view words) {
    Lexicon lex;
    for (auto& t : tokenize(words)) lex.words.insert(std::move(t));
    return lex;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Lexicon Lexicon::parse(std::string_view text) {
    Lexicon lex;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (auto& t : tokenize(line)) lex.words.insert(std::move(t));
    }
    return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read lexicon " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const Lexicon& Lexicon::default_stopwords() {
    static const Lexicon lex = from_words(kStopwords);
    return lex;
}

const Lexicon& Lexicon::default_jargon() {
    static const Lexicon lex = from_words(kJargon);
    return lex;
}

double clarity_score(std::string_view text, const Lexicon& stopwords) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return 1.0;
    std::unordered_set<std::string> seen;
    std::size_t redundant = 0;
    for (const auto& t : tokens) {
        const bool repeat = !seen.insert(t).second;
        if (repeat || stopwords.contains(t)) ++redundant;
    }
    return 1.0 - static_cast<double>(redundant) / static_cast<double>(tokens.size());
}

double jargon_score(std::string_view text, const Lexicon& jargon) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return 1.0;
    const auto hits = std::count_if(tokens.begin(), tokens.end(), [&](const std::string& t) { return jargon.contains(t); });
    return 1.0 - static_cast<double>(hits) / static_cast<double>(tokens.size());
}

std::uint32_t token_hash(std::string_view token) {
    std::uint32_t h = 2166136261u;
    for (char c : token) {
        h ^= static_cast<unsigned char>(c);
        h *= 16777619u;
    }
    return h;
}

Vector rationale_embed(std::string_view text) {
    Vector v = Vector::Zero(kRationaleDim);
    for (const auto& t : tokenize(text)) v(static_cast<Index>(token_hash(t) % kRationaleDim)) += 1.0;
    const double n = v.norm();
    if (n > 0) v /= n;
    return v;
}

double rationale_cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw ShapeError("rationale_cosine: length mismatch");
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 && nv == 0.0) return 1.0;
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

double composite_score(double macro_f1, double jargon, double cosine) {
    return 0.5 * macro_f1 + 0.3 * jargon + 0.2 * std::clamp(cosine, 0.0, 1.0);
}

double composite_score(double macro_f1, double jargon, const Vector& rationale_now, const Vector* rationale_prev) {
    const double cosine = rationale_prev ? rationale_cosine(rationale_now, *rationale_prev) : 1.0;
    return composite_score(macro_f1, jargon, cosine);
}

}  // namespace mmra
