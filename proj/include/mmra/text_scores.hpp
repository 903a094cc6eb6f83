#ifndef MMRA_TEXT_SCORES_HPP
#define MMRA_TEXT_SCORES_HPP

// Dialogue-quality scores for agent messages.
//
// Tokenisation everywhere: lowercase, split on non-alphanumeric characters,
// drop empty tokens.

#include "mmra/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mmra {

std::vector<std::string> tokenize(std::string_view text);

struct Lexicon {
    std::unordered_set<std::string> words;

    bool contains(const std::string& token) const { return words.count(token) != 0; }

    /// One token per line; blank lines and text after '#' are ignored.
    static Lexicon parse(std::string_view text);
    static Lexicon load(const std::filesystem::path& path);

    static const Lexicon& default_stopwords();
    static const Lexicon& default_jargon();
};

/// 1 - redundant / total. A token is redundant when it is a stopword or an
/// exact repeat of an earlier token in the same text. Empty text scores 1.
double clarity_score(std::string_view text, const Lexicon& stopwords = Lexicon::default_stopwords());

/// 1 - jargon tokens / total. Empty text scores 1.
double jargon_score(std::string_view text, const Lexicon& jargon = Lexicon::default_jargon());

inline constexpr Index kRationaleDim = 256;

/// 32-bit FNV-1a of the token bytes.
std::uint32_t token_hash(std::string_view token);

/// Term-frequency vector over token_hash(t) mod 256, L2-normalised. Text with
/// no tokens maps to the zero vector.
Vector rationale_embed(std::string_view text);

/// Cosine similarity. Two zero vectors score 1; a zero vector against any
/// other vector scores 0.
double rationale_cosine(const Vector& u, const Vector& v);

/// 0.5 * F1 + 0.3 * jargon + 0.2 * clamp(cos, 0, 1).
double composite_score(double macro_f1, double jargon, double cosine);
double composite_score(double macro_f1, double jargon, const Vector& rationale_now, const Vector* rationale_prev);

}  // namespace mmra

#endif
