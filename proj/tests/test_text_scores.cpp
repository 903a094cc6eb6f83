#include <doctest.h>

#include "mmra/text_scores.hpp"

using namespace mmra;
using doctest::Approx;

TEST_SUITE("text_scores") {

TEST_CASE("tokenizer") {
    CHECK(tokenize("Ryuk, WannaCry-2 ok!") == std::vector<std::string>{"ryuk", "wannacry", "2", "ok"});
    CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("clarity") {
    CHECK(clarity_score("entropy imports sections registry mutex beacon payload dropper packer loader") == 1.0);
    CHECK(clarity_score("entropy imports sections registry mutex beacon payload dropper the entropy") ==
          Approx(0.8));
    CHECK(clarity_score("the the the") == 0.0);
    CHECK(clarity_score("") == 1.0);
}

TEST_CASE("jargon") {
    CHECK(jargon_score("maybe the loader perhaps writes stuff into registry keys under run hive") ==
          Approx(0.75));
    CHECK(jargon_score("registry mutex beacon") == 1.0);
    CHECK(jargon_score("maybe perhaps stuff") == 0.0);
    CHECK(jargon_score("") == 1.0);
}

TEST_CASE("composite score") {
    CHECK(composite_score(1.0, 1.0, 1.0) == Approx(1.0));
    CHECK(composite_score(0.9, 0.8, 0.5) == Approx(0.79));
    CHECK(composite_score(0.0, 0.0, 0.0) == 0.0);
    CHECK(composite_score(0.0, 0.0, -0.5) == 0.0);
    CHECK(composite_score(0.0, 0.0, 1.5) == Approx(0.2));
    const Vector u = rationale_embed("alpha beta");
    CHECK(composite_score(0.5, 1.0, u, nullptr) == Approx(0.25 + 0.3 + 0.2));
}

TEST_CASE("rationale cosine") {
    const Vector a = rationale_embed("ransomware encrypts files");
    CHECK(rationale_cosine(a, rationale_embed("Ransomware, encrypts FILES")) == Approx(1.0));
    CHECK(a.norm() == Approx(1.0));

    REQUIRE(token_hash("a") % kRationaleDim != token_hash("b") % kRationaleDim);
    REQUIRE(token_hash("a") % kRationaleDim != token_hash("c") % kRationaleDim);
    REQUIRE(token_hash("b") % kRationaleDim != token_hash("c") % kRationaleDim);
    CHECK(rationale_cosine(rationale_embed("a"), rationale_embed("b")) == 0.0);
    CHECK(rationale_cosine(rationale_embed("a b"), rationale_embed("a c")) == Approx(0.5));

    const Vector zero = Vector::Zero(kRationaleDim);
    CHECK(rationale_cosine(zero, zero) == 1.0);
    CHECK(rationale_cosine(zero, a) == 0.0);
    CHECK(rationale_embed("!!").isZero());
    CHECK_THROWS_AS(rationale_cosine(a, Vector::Zero(3)), ShapeError);
    CHECK(token_hash("") == 2166136261u);
    CHECK(token_hash("a") == 0xe40c292cu);
}

TEST_CASE("lexicons") {
    const auto lex = Lexicon::parse("alpha\n# comment\n\nbeta # trailing\n");
    CHECK(lex.words.size() == 2);
    CHECK(lex.contains("beta"));

    const std::filesystem::path dir = MMRA_RESOURCE_DIR;
    CHECK(Lexicon::load(dir / "stopwords.txt").words == Lexicon::default_stopwords().words);
    CHECK(Lexicon::load(dir / "jargon.txt").words == Lexicon::default_jargon().words);
    CHECK_THROWS_AS(Lexicon::load(dir / "missing.txt"), ConfigError);
}

}  // TEST_SUITE
