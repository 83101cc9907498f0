#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gseo/common.hpp"
#include "gseo/text.hpp"

namespace gseo {

// Versioned prompt catalog. Builtins are the reference texts; a directory of
// <name>.txt files can override them so reviewers can edit prompts without
// recompiling. Placeholders are {key} tokens replaced in a single pass over
// the template; unknown tokens pass through untouched and substituted values
// are never rescanned.
class PromptCatalog {
 public:
  static PromptCatalog builtin() {
    PromptCatalog c;
    for (const auto& [name, text] : builtin_entries()) c.texts_[name] = text;
    return c;
  }

  // Overrides entries from <dir>/<name>.txt. A single trailing newline is
  // stripped so exported files round-trip byte-exact.
  void load_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) raise(ErrorCode::UnreadablePath, dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      std::string body = read_file(entry.path());
      if (!body.empty() && body.back() == '\n') body.pop_back();
      texts_[entry.path().stem().string()] = body;
    }
  }

  void export_dir(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, text] : texts_) {
      write_file_atomic(dir / (name + ".txt"), text + "\n");
    }
  }

  bool has(const std::string& name) const { return texts_.count(name) != 0; }

  const std::string& text(const std::string& name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) raise(ErrorCode::ConfigError, "unknown prompt: " + name);
    return it->second;
  }

  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const {
    const std::string& tpl = text(name);
    std::string out;
    out.reserve(tpl.size());
    size_t i = 0, n = tpl.size();
    while (i < n) {
      if (tpl[i] == '{') {
        size_t close = tpl.find('}', i + 1);
        if (close != std::string::npos) {
          std::string key = tpl.substr(i + 1, close - i - 1);
          auto it = values.find(key);
          if (it != values.end()) {
            out += it->second;
            i = close + 1;
            continue;
          }
        }
      }
      out.push_back(tpl[i]);
      ++i;
    }
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : texts_) out.push_back(name);
    return out;
  }

 private:
  static const std::map<std::string, std::string>& builtin_entries();

  std::map<std::string, std::string> texts_;
};

inline const std::map<std::string, std::string>& PromptCatalog::builtin_entries() {
  static const std::map<std::string, std::string> entries = {
      // One system message shared by every optimization stage.
      {"system_default",
       "You are a careful text editing assistant. Follow the task instructions exactly and "
       "produce output in the requested format."},

      // Stage 1: structural caption generation (sent verbatim with the image).
      {"structural_caption",
       "Generate a concise and objective caption for this image, describing the main objects, "
       "actions, and scene present."},

      // Stage 2: caption refinement against the source text.
      {"refine_caption",
       "### Your task\n"
       "Carefully read the source, and then rewrite the caption to make it more expressive and "
       "attention-grabbing. Requirements are as follows:\n"
       "- Retain the core subject, action, and scene of the original caption "
       "(who/what/when/where/how).\n"
       "- Enrich the caption only with the most relevant information from the source, ignoring "
       "unrelated details.\n"
       "\n"
       "### Input\n"
       "Source: {source}\n"
       "Original Caption: {caption_original}\n"
       "\n"
       "### Output\n"
       "Rewritten Caption: [caption_rewritten]"},

      // Stage 3: caption injection into the source.
      {"inject_caption",
       "### Your task\n"
       "1. Insert the text only at these positions, ensuring smooth and coherent context.\n"
       "2. Do not delete or modify any other part of the given source or the text, and do not "
       "add anything other than the given text.\n"
       "\n"
       "### Input\n"
       "Source: {source}\n"
       "Text: {text}\n"
       "\n"
       "### Output\n"
       "Source: [Optimized Source]"},

      // Text-only baseline rewrites. Texts authored here; each preserves the
      // source meaning and answers with a single "Source:" payload.
      {"baseline_tran_seo",
       "### Your task\n"
       "Rewrite the source so that it explicitly incorporates keywords highly relevant to the "
       "query, following classical search engine optimization practice. Requirements are as "
       "follows:\n"
       "- Weave the keywords naturally into existing sentences; do not emit keyword lists.\n"
       "- Preserve the original meaning of the source; do not invent facts.\n"
       "\n"
       "### Input\n"
       "Query: {query}\n"
       "Source: {source}\n"
       "\n"
       "### Output\n"
       "Source: [Optimized Source]"},

      {"baseline_flue_expr",
       "### Your task\n"
       "Rewrite the source to improve its fluency and naturalness without altering the original "
       "semantic meaning. Requirements are as follows:\n"
       "- Smooth awkward phrasing and improve readability and stylistic quality.\n"
       "- Keep every fact, name, and number unchanged; do not add or remove information.\n"
       "\n"
       "### Input\n"
       "Query: {query}\n"
       "Source: {source}\n"
       "\n"
       "### Output\n"
       "Source: [Optimized Source]"},

      {"baseline_quat_addi",
       "### Your task\n"
       "Enrich the source by selectively inserting short quotations attributed to authoritative "
       "voices, increasing its persuasive strength. Requirements are as follows:\n"
       "- Insert at most two quotations at contextually fitting positions.\n"
       "- Keep the rest of the source intact; do not alter its meaning.\n"
       "\n"
       "### Input\n"
       "Query: {query}\n"
       "Source: {source}\n"
       "\n"
       "### Output\n"
       "Source: [Optimized Source]"},

      {"baseline_stat_addi",
       "### Your task\n"
       "Enrich the source by selectively inserting factual statistics that support its claims, "
       "increasing its informativeness. Requirements are as follows:\n"
       "- Insert at most two concise statistics at contextually fitting positions.\n"
       "- Keep the rest of the source intact; do not alter its meaning.\n"
       "\n"
       "### Input\n"
       "Query: {query}\n"
       "Source: {source}\n"
       "\n"
       "### Output\n"
       "Source: [Optimized Source]"},

      // Generative search engine simulation.
      {"gse_system",
       "You are the response generator of a generative search engine. You synthesize a single "
       "cited answer from the numbered sources you are given."},

      {"gse_user",
       "Answer the question using only the numbered sources below. Requirements are as "
       "follows:\n"
       "- Write a concise, well-organized answer in complete sentences.\n"
       "- Cite at least one source for every sentence by appending bracketed source numbers "
       "such as [1] or [2].\n"
       "- Use only information found in the sources; do not invent facts.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "{sources}"},

      // Judge prompts: one rubric per dimension, step-by-step, terminal
      // "Score: <0-5>" line.
      {"judge_system",
       "You are a meticulous evaluator of generative search engine responses. You follow the "
       "evaluation steps exactly and end with a single score line."},

      {"judge_relevance",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: relevance. How relevant is the content cited from the target source to the "
       "question?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Collect the response sentences that cite Source [{target_ordinal}].\n"
       "2. Judge how directly that content addresses the question.\n"
       "3. Assign an integer score from 0 (no relevant contribution) to 5 (central, fully "
       "relevant contribution).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_fluency",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: fluency. How fluent and natural are the response sentences that cite the "
       "target source?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Collect the response sentences that cite Source [{target_ordinal}].\n"
       "2. Judge their grammar, flow, and naturalness in context.\n"
       "3. Assign an integer score from 0 (unreadable) to 5 (perfectly fluent).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_diversity",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: diversity. How varied are the aspects and details the response draws from "
       "the target source?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Collect the response sentences that cite Source [{target_ordinal}].\n"
       "2. Count the distinct aspects, facts, or angles they contribute.\n"
       "3. Assign an integer score from 0 (nothing or one repeated point) to 5 (many distinct "
       "aspects).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_uniqueness",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: uniqueness. How much information in the response comes only from the target "
       "source and from no other source?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Identify content cited to Source [{target_ordinal}] alone.\n"
       "2. Judge how substantial and distinctive that exclusive content is.\n"
       "3. Assign an integer score from 0 (fully redundant) to 5 (substantial exclusive "
       "content).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_click_follow",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: click-follow likelihood. How likely is a reader of this response to click "
       "through to the target source for more detail?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Judge how enticing and authoritative the content cited from Source "
       "[{target_ordinal}] appears.\n"
       "2. Consider whether the response leaves questions the target source seems able to "
       "answer.\n"
       "3. Assign an integer score from 0 (no reason to click) to 5 (strong pull to click).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_positional_salience",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: positional salience. How prominent are the target source's citations within "
       "the response layout?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Locate every sentence citing Source [{target_ordinal}] and note its position.\n"
       "2. Judge how early and how centrally those sentences appear.\n"
       "3. Assign an integer score from 0 (absent or buried at the end) to 5 (leads the "
       "response).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      {"judge_content_volume",
       "You will evaluate how one source contributes to a generative search engine response.\n"
       "\n"
       "Question: {query}\n"
       "\n"
       "Response (sentences cite sources by bracketed numbers):\n"
       "{response}\n"
       "\n"
       "Target: Source [{target_ordinal}]\n"
       "\n"
       "Dimension: content volume. How large a share of the response is built on the target "
       "source?\n"
       "\n"
       "Evaluation steps:\n"
       "1. Measure the fraction of sentences citing Source [{target_ordinal}].\n"
       "2. Weigh the length and substance of those sentences against the rest.\n"
       "3. Assign an integer score from 0 (no share) to 5 (dominates the response).\n"
       "\n"
       "End your reply with a final line in the exact format:\n"
       "Score: <0-5>"},

      // Format reminders appended on parse-retry attempts.
      {"reminder_refine",
       "Reminder: reply with exactly one line beginning with \"Rewritten Caption:\" followed by "
       "the rewritten caption."},

      {"reminder_source",
       "Reminder: reply with a line beginning with \"Source:\" followed by the complete "
       "optimized source."},

      {"reminder_score",
       "Reminder: end your reply with a final line in the exact format \"Score: <k>\" where <k> "
       "is an integer from 0 to 5."},
  };
  return entries;
}

}  // namespace gseo
