#include <catch2/catch_amalgamated.hpp>

#include "gseo/prompts.hpp"
#include "helpers.hpp"

using namespace gseo;

TEST_CASE("builtin catalog carries every pipeline template", "[prompts]") {
  PromptCatalog c = PromptCatalog::builtin();
  for (const char* name :
       {"system_default", "structural_caption", "refine_caption", "inject_caption",
        "baseline_tran_seo", "baseline_flue_expr", "baseline_quat_addi", "baseline_stat_addi",
        "gse_system", "gse_user", "judge_system", "judge_relevance", "judge_fluency",
        "judge_diversity", "judge_uniqueness", "judge_click_follow", "judge_positional_salience",
        "judge_content_volume", "reminder_refine", "reminder_source", "reminder_score"}) {
    INFO(name);
    CHECK(c.has(name));
    CHECK_FALSE(c.text(name).empty());
  }
}

TEST_CASE("unknown template name raises", "[prompts]") {
  PromptCatalog c = PromptCatalog::builtin();
  try {
    c.text("nope");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("render substitutes exact placeholders once", "[prompts]") {
  PromptCatalog c = PromptCatalog::builtin();
  std::string out = c.render("refine_caption",
                             {{"source", "SRC"}, {"caption_original", "CAP"}});
  CHECK(out.find("SRC") != std::string::npos);
  CHECK(out.find("CAP") != std::string::npos);
  CHECK(out.find("{source}") == std::string::npos);
  CHECK(out.find("{caption_original}") == std::string::npos);
}

TEST_CASE("render leaves unknown tokens and never rescans values", "[prompts]") {
  testutil::TempDir tmp;
  write_file_atomic(tmp.path / "t.txt", "x {a} {missing}\n");
  PromptCatalog c = PromptCatalog::builtin();
  c.load_dir(tmp.path);
  std::string out = c.render("t", {{"a", "{missing}"}});
  // Both occurrences survive: the substituted value verbatim, the unknown token untouched.
  CHECK(out == "x {missing} {missing}");
}

TEST_CASE("export then load round-trips every template byte-exact", "[prompts]") {
  testutil::TempDir tmp;
  PromptCatalog c = PromptCatalog::builtin();
  c.export_dir(tmp.path);
  PromptCatalog loaded = PromptCatalog::builtin();
  loaded.load_dir(tmp.path);
  for (const auto& name : c.names()) {
    INFO(name);
    CHECK(loaded.text(name) == c.text(name));
  }
}

TEST_CASE("repository prompt files match the builtin catalog", "[prompts]") {
  PromptCatalog builtin = PromptCatalog::builtin();
  fs::path dir = testutil::repo_dir() / "prompts";
  REQUIRE(fs::is_directory(dir));
  PromptCatalog fromdir = PromptCatalog::builtin();
  fromdir.load_dir(dir);
  for (const auto& name : builtin.names()) {
    INFO(name);
    REQUIRE(fs::exists(dir / (name + ".txt")));
    CHECK(fromdir.text(name) == builtin.text(name));
  }
}

TEST_CASE("stage templates keep their anchor phrases", "[prompts]") {
  PromptCatalog c = PromptCatalog::builtin();
  CHECK(c.text("structural_caption").find("concise and objective caption") != std::string::npos);
  CHECK(c.text("refine_caption").find("more expressive and attention-grabbing") !=
        std::string::npos);
  CHECK(c.text("inject_caption").find("Insert the text only at these positions") !=
        std::string::npos);
  CHECK(c.text("refine_caption").find("Rewritten Caption:") != std::string::npos);
  CHECK(c.text("inject_caption").find("[Optimized Source]") != std::string::npos);
}
