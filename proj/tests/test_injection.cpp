#include <catch2/catch_amalgamated.hpp>

#include <cctype>

#include "gseo/injection.hpp"
#include "helpers.hpp"

using namespace gseo;

TEST_CASE("a clean single insertion validates at the right position", "[injection]") {
  InjectionCheck c = validate_injection("A. B. C.", "A. X. B. C.", "X.");
  CHECK(c.valid);
  CHECK(c.position_char == 3);  // after "A. "
  CHECK(c.matched_insert == "X.");
}

TEST_CASE("unchanged candidate means no insertion", "[injection]") {
  InjectionCheck c = validate_injection("A. B. C.", "A. B. C.", "X.");
  CHECK_FALSE(c.valid);
  CHECK(c.reason == "NoInsertion");
}

TEST_CASE("dropped original content invalidates", "[injection]") {
  // "C." was lost; the candidate is not original + insert.
  InjectionCheck c = validate_injection("A. B. C.", "A. X. B.", "X.");
  CHECK_FALSE(c.valid);
}

TEST_CASE("edits outside the insert invalidate", "[injection]") {
  InjectionCheck c = validate_injection("Alpha beta. Gamma delta.",
                                        "Alpha betq. New thing here. Gamma delta.",
                                        "New thing here.");
  CHECK_FALSE(c.valid);
}

TEST_CASE("whitespace-only differences outside the insert are tolerated", "[injection]") {
  InjectionCheck c = validate_injection("A.  B.   C.", "A. X. B. C.", "X.");
  CHECK(c.valid);
  CHECK(c.matched_insert == "X.");
}

TEST_CASE("a reworded insert within the edit budget validates", "[injection]") {
  // Casing and final punctuation are canonical, so only real edits count.
  InjectionCheck c = validate_injection("One two. Three four.",
                                        "One two. SHINY NEW CAPTION. Three four.",
                                        "shiny new caption");
  CHECK(c.valid);
  CHECK(c.matched_insert == "SHINY NEW CAPTION.");
}

TEST_CASE("an insert too far from the caption invalidates", "[injection]") {
  InjectionCheck c = validate_injection("One two. Three four.",
                                        "One two. Totally unrelated words appear. Three four.",
                                        "shiny new caption");
  CHECK_FALSE(c.valid);
  CHECK(c.reason == "InsertMismatch");
}

TEST_CASE("insert at the very start and very end validates", "[injection]") {
  InjectionCheck front = validate_injection("B. C.", "X. B. C.", "X.");
  CHECK(front.valid);
  CHECK(front.position_char == 0);

  InjectionCheck back = validate_injection("B. C.", "B. C. X.", "X.");
  CHECK(back.valid);
  CHECK(back.matched_insert == "X.");
}

TEST_CASE("fallback insert lands after the most similar sentence", "[injection]") {
  FallbackInsert fb = deterministic_fallback_insert(
      "Cats sleep. Dogs bark loudly. Fish swim.", "Loud barking dogs wake neighbors");
  CHECK(fb.optimized ==
        "Cats sleep. Dogs bark loudly. Loud barking dogs wake neighbors. Fish swim.");
  CHECK(fb.inserted_text == "Loud barking dogs wake neighbors.");
  CHECK(fb.position_char == 30);
  CHECK(fb.optimized.substr(fb.position_char, fb.inserted_text.size()) == fb.inserted_text);

  InjectionCheck c =
      validate_injection("Cats sleep. Dogs bark loudly. Fish swim.", fb.optimized,
                         "Loud barking dogs wake neighbors");
  CHECK(c.valid);
}

TEST_CASE("fallback keeps an existing terminator", "[injection]") {
  FallbackInsert fb = deterministic_fallback_insert("Only sentence.", "Already punctuated!");
  CHECK(fb.optimized == "Only sentence. Already punctuated!");
  CHECK(fb.inserted_text == "Already punctuated!");
}

TEST_CASE("fallback similarity ties go to the earliest sentence", "[injection]") {
  FallbackInsert fb = deterministic_fallback_insert("About apples. About pears.", "About fruit");
  CHECK(fb.optimized == "About apples. About fruit. About pears.");
}

TEST_CASE("fallback rejects empty inputs", "[injection]") {
  CHECK_THROWS_AS(deterministic_fallback_insert("Some text.", "   "), Error);
  CHECK_THROWS_AS(deterministic_fallback_insert("   ", "caption"), Error);
}

TEST_CASE("fallback output always validates on randomized inputs", "[injection]") {
  static const char* words[] = {"river",  "stone",  "market", "signal", "harbor", "violet",
                                "copper", "meadow", "lantern", "summit", "timber", "falcon"};
  SplitMix64 rng(2024);
  for (int iter = 0; iter < 200; ++iter) {
    std::string original;
    int sentences = 1 + static_cast<int>(rng.bounded(5));
    for (int s = 0; s < sentences; ++s) {
      int len = 2 + static_cast<int>(rng.bounded(6));
      std::string sentence;
      for (int w = 0; w < len; ++w) {
        std::string word = words[rng.bounded(12)];
        if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        if (!sentence.empty()) sentence += ' ';
        sentence += word;
      }
      sentence += (rng.bounded(3) == 0) ? '!' : '.';
      if (!original.empty()) original += ' ';
      original += sentence;
    }
    std::string caption;
    int cap_len = 2 + static_cast<int>(rng.bounded(6));
    for (int w = 0; w < cap_len; ++w) {
      if (!caption.empty()) caption += ' ';
      caption += words[rng.bounded(12)];
    }
    caption[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(caption[0])));

    FallbackInsert fb = deterministic_fallback_insert(original, caption);
    InjectionCheck c = validate_injection(original, fb.optimized, caption);
    INFO("original: " << original << "\ncaption: " << caption << "\noptimized: " << fb.optimized
                      << "\nreason: " << c.reason);
    CHECK(c.valid);
  }
}
