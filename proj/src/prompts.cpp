#include "cqs/prompts.hpp"

#include <utility>

namespace cqs::prompts {
namespace {

std::string fill(std::string_view tmpl,
                 std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  // Single pass over the template; substituted values are never rescanned.
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [marker, value] : slots) {
        if (tmpl.substr(i, marker.size()) == marker) {
          out += value;
          i += marker.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

std::string chomp(std::string_view s) {
  while (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

std::string issue_blocks(const std::vector<Issue>& issues) {
  std::string out;
  for (const auto& i : issues) {
    out += serialize_issue_titlecase(i);
    out += '\n';
  }
  return out;
}

constexpr std::string_view kCollector = R"(=== Raw Source Control Code Changes BEGIN ===
{{diff}}
=== Raw Source Control Code Changes END ===

=== Context for the Code Change BEGIN ===
The following additional information from the author may provide context about the code changes and their purpose:
Title: {{title}}
Summary: {{summary}}
=== Context for the Code Change END ===

Your task is to provide constructive and concise feedback for the code changes based on the following criteria (each goes with a tag name in the beginning):
{{tags}}
In case none of the provided tags are appropriate, you may come up with your own tag.

Code lines are prefixed with the line number, followed by symbols ('+', '-', ' '). The '+' symbol indicates new code added, the '-' symbol indicates code removed, and the ' ' symbol indicates unchanged code. The review should address new code added (lines starting with '+').

Pay attention to what part of the code has changed, you should only grade the code that has changed, and ignore the rest.

Example output:

{
  "function": "[exact function name from code]",
  "rationale": "[clear explanation of the issue and suggested
  improvement]",
  "file": "[file path where the function is located]",
  "line": [numeric line number],
  "tag": "[one of the tags as described above]"
}

Note you should not be overly critic and generate many bullet points. Please pin-point the 'problematic_function' with issues, and don't forget to include line numbers. The output field 'problematic_function' is mandatory in the response if the problem is inside a function. The output field 'relevant_file' should include full path of the file (including directory and filename). In your response, do not describe what the code changes is about because the code author already knows about it. Pay attention to the code change.

The output field 'rationale' would be shown to the author of code changes. Please use a polite and suggestive tone for the 'rationale' field, provide a reasoning and give suggestions using a question instead of a command.
)";

constexpr std::string_view kRewriteHuman = R"(You are given a code change and a corresponding code review.

Here are the code changes:
=== Raw Source Control Code Change BEGIN ===
{{diff}}
=== Raw Source Control Code Change END ===

Here is the code review in yaml format:
=== Code Review (YAML FORMAT) BEGIN ===
```yaml
{{review}}
=== Code Review (YAML FORMAT) END ===

Please  reason and understand the code review and carefully follow the instructions below.

First, please do an initial assessment of the code review to try to roughly understand what the reviewer's objective. Then, try to explain if the rationale in reviewer's comments is logical. You may or may not have a clear understanding of what the rationale might be, so you can propose multiple hypothesis. For example:

"Hypothesis: In file xyz.py, at line 100, the reviewer is referring to an issue in the definition of  'ProblematicFunction', and if the reviewer's comment is not addressed, it could cause X/Y/Z"

After you propose hypothesis, reflect on them and answer the following questions:
1. Is the provided rationale addressing the issue in the give code change or it's referring to some context outside of the given code change?
2. Is the rationale linking to external references/links?
3. Is the rationale explicitly pointing out issues? Or is it just an inquiry because the review is not sure either?
4. Is the reviewer's suggestion actionable? Or is it just some general suggestions that does not have clear action items?
5. Is the reviewer nitpicking? For example, saying something like "nit...."

After you have answered these questions, you should have a clear judgment of the "quality" of the review. Typically, bad quality reviews have the following characteristics:
- Out of context: reviews which link to external references or refer to something outside of the given code change.
- Nitpicking.
- Not actionable.
- Reviews which do not detect SPECIFIC issues but are more general suggestions or free discussions.

If the review quality is good, please rewrite the rationale from an AI Assistant's perspective. Here are the hints to derive a good rationale:
- Try to VERIFY each hypothesis you proposed, using facts in the code change content.
- Summarize the verified hypothesis
- Try to refine the summary to a concise form, the final derived rationale should be specific, helpful and actionable.

Finally, please output a <conclusion> in the following format. Note, if it's a bad quality review, you can set `review_rewrite` field as null.

{
<conclusion>
   review_quality: {good/bad}
   review_rewrite: {human comment rewritten by an AI assistant}
</conclusion>
}

Please stop after writing the <conclusion> and don't output anything else.
)";

constexpr std::string_view kFeedbackCritique = R"(You are given a code review and a corresponding feedback to the review from developers. Your task is to analyze the developer feedback and grade it, in context of the code changes and code review.

Here are the code changes:
=== Raw Source Control Diff BEGIN ===
{{diff}}
=== Raw Source Control Diff END ===

Here are the code review comments for code changes above
{{review}}

And here is the human feedback to the code review.
{
  "human sentiment": {{sentiment}}
  "human feedback comments": {{comment}}
}
Note that "human feedback comments" could be empty if the user did not provide any. The "human sentiment" is positive if they agree with the review and negative otherwise.

Please make sure you understand the code change, code review and the human feedback. Then, come up the following:
1. human_feedback_quality: a score from 0-5 about the quality of human feedback. A good feedback should specifically point out the problem in the code review. Output a score of 0 if you did not understand the feedback at all.
2. critique: rewrite the human feedback to one sentence critique by using your knowledge of software engineering. If the feedback is of low quality or not available, please write your own based on the positive or negative sentiment.

Write your thoughts, and then respond with the following yaml format:
```yaml
"human_feedback_quality": {0-5, 0 means you did not understand
    the human feedback at all}
"critique": {one sentence critique to the code review}
```
)";

constexpr std::string_view kJudgeScoring = R"(You are a language model that specializes in evaluating reviews for a code change. You are given details of a code change as input and a list of corresponding issues/code suggestions identified. Your goal is to inspect and review the issues/code suggestions, and score.

Be aware - the issues/suggestions may not always be correct or accurate, and you should evaluate them in relation to the actual code changes presented.

Carefully review both the suggestion content, and the related code change. Mistakes in the suggestions can occur. Make sure the suggestions are correct, and properly derived from the code changes. Mark each issue/suggestion as valid or invalid.

Score the suggestions: high scores (8 to 10) should be given to correct suggestions that address major bugs and issues, or security concerns. Lower scores (3 to 7) should be for correct suggestions addressing minor issues, code style, code readability, maintainability, etc. Don't give high scores to suggestions that are not crucial, and bring only small improvement or optimization.
Order the feedback the same way the suggestions are ordered in the input.
Response should be a valid YAML and nothing else.

Here are the code changes and the corresponding code review suggestions.

=== Raw Source Control Code Change BEGIN ===
{{diff}}
=== Raw Source Control Code Change END ===

=== Suggestions (YAML Format) BEGIN ===
```yaml
{{suggestions}}=== Suggestions (YAML Format) END ===

Here is an example of the expected output format for reference. Please review and score each suggestion above.
=== Example Output Format ===
```yaml
{
"Suggestion_content": {rationale}
"Status": {valid/invalid}
"Sentiment": {positive if the suggestion is complimenting the
             code changes, negative if the suggestion is
             criticizing the code changes or neutral if uncear)}
"Line_matching": {yes/no, to check if the line number in the
               issue description is matching the pre-pending
               line number shown in the code change}
"Suggested score": {between 0-10}
"Score reason" : the code review suggestion is correct and
               actionable because ...
}
```

Note: you should pay attention to the line number in the issue/code suggestion description, and judge if it is matching the pre-pending line number shown in the diff format. If the code suggestions are empty, just return an empty YAML string.

Now begin. Please format your output according to the "Example Output Format" as shown above. Remember to do the review and score each code suggestion.
)";

constexpr std::string_view kValidatorSystem = R"(Your input is a difference view of code changes, and a list of code issues for it.
Your goal is to inspect, review the issues and score each of them.
Be aware - the issues may not always be correct or accurate, and you should evaluate them in relation to the actual code changes presented.

Review issues. Carefully review both the issue content, and the related code changes. Mistakes in the issue can occur. Make sure the issues are correct and properly derived from the code changes. Mark each issue as valid or invalid.

Score issues. High scores (8 to 10) should be given to correct issues that address major bugs, or security concerns. Lower scores (3 to 7) should be for issues that address minor concerns for example code style, code readability, maintainability, etc. Don't give high scores to suggestions that are not crucial, and bring only small improvement or optimization to the code. Incorrect issues should be scored as 0. Order the feedback the same way the issues are ordered in the input.

When reviewing issues, pay special attention to the following common mistakes:
- When reviewing documentation issues, verify the presence of existing docstrings. If a docstring is already present in any form (e.g., as a comment, a description, or a formal docstring), without nitpicking about its quality or completeness, mark the issue as invalid.
- When reviewing division by zero issues, carefully examine the code to verify that the variable in question is indeed used as a divisor in a division operation. If the variable is not involved in a division or if zero validation has already been performed, mark the issue as invalid.
Record verbosely your thought process in the output field "motivation".
)";

constexpr std::string_view kValidatorUser = R"(=== Raw Source Control Code Change BEGIN ===
{{diff}}
=== Raw Source Control Code Change END ===

=== Suggestions (YAML Format) BEGIN ===
```yaml
{{suggestions}}=== Suggestions (YAML Format) END ===
)";

constexpr std::string_view kEquivalence = R"(Decide whether the two code review rationales below describe the same underlying issue.

=== Rationale A ===
{{a}}
=== Rationale B ===
{{b}}
=== End ===

Answer with exactly one word: equivalent or different.
)";

}  // namespace

std::string collector(std::string_view numbered_diff, const DiffMeta& meta,
                      const std::vector<IssueTag>& tags) {
  std::string menu;
  for (const auto& info : canonical_tags()) {
    for (const auto& t : tags) {
      if (t.canonical() == info.tag) {
        menu += "- ";
        menu += info.name;
        menu += ": ";
        menu += info.criterion;
        menu += '\n';
        break;
      }
    }
  }
  for (const auto& t : tags) {
    if (t.is_canonical()) continue;
    menu += "- ";
    menu += t.name();
    menu += '\n';
  }
  menu += '\n';
  return fill(kCollector, {{"{{diff}}", chomp(numbered_diff)},
                           {"{{title}}", meta.title},
                           {"{{summary}}", meta.summary},
                           {"{{tags}}\n", menu}});
}

std::string judge_scoring(std::string_view numbered_diff, const std::vector<Issue>& issues) {
  return fill(kJudgeScoring,
              {{"{{diff}}", chomp(numbered_diff)}, {"{{suggestions}}", issue_blocks(issues)}});
}

std::string validator_system() { return std::string(kValidatorSystem); }

std::string validator_user(std::string_view numbered_diff, const std::vector<Issue>& issues) {
  return fill(kValidatorUser,
              {{"{{diff}}", chomp(numbered_diff)}, {"{{suggestions}}", issue_blocks(issues)}});
}

std::string rewrite_human_review(std::string_view numbered_diff, const Issue& issue) {
  return fill(kRewriteHuman,
              {{"{{diff}}", chomp(numbered_diff)}, {"{{review}}", serialize_issue_titlecase(issue)}});
}

std::string feedback_critique(std::string_view numbered_diff, const Issue& issue, bool thumbs_up,
                              std::string_view comment) {
  const std::string sentiment =
      Json(thumbs_up ? "positive (thumbs up)" : "negative (thumbs down)").dump();
  const std::string quoted_comment = Json(std::string(comment)).dump();
  return fill(kFeedbackCritique, {{"{{diff}}", chomp(numbered_diff)},
                                  {"{{review}}", serialize_issue_titlecase(issue)},
                                  {"{{sentiment}}", sentiment},
                                  {"{{comment}}", quoted_comment}});
}

std::string equivalence(std::string_view rationale_a, std::string_view rationale_b) {
  return fill(kEquivalence, {{"{{a}}", chomp(rationale_a)}, {"{{b}}", chomp(rationale_b)}});
}

std::string section(std::string_view text, std::string_view begin, std::string_view end) {
  auto line_start = [&](std::string_view needle, std::size_t from) -> std::size_t {
    std::size_t pos = from;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
      const bool at_start = pos == 0 || text[pos - 1] == '\n';
      const std::size_t after = pos + needle.size();
      const bool at_end = after == text.size() || text[after] == '\n';
      if (at_start && at_end) return pos;
      pos = after;
    }
    return std::string_view::npos;
  };
  const std::size_t b = line_start(begin, 0);
  if (b == std::string_view::npos) return {};
  std::size_t body = b + begin.size();
  if (body < text.size() && text[body] == '\n') ++body;
  const std::size_t e = line_start(end, body);
  if (e == std::string_view::npos) return {};
  return std::string(text.substr(body, e - body));
}

}  // namespace cqs::prompts
