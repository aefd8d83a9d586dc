#pragma once

#include <string>
#include <string_view>

namespace car::prompts {

// Judge prompt templates, kept verbatim. Placeholders are substituted by
// render_prompt in evaluation.hpp.

/// Two-score template: the judge answers with "s1 s2" on its first line.
inline constexpr std::string_view kScoreTemplate = R"([Question]

{Instruction}

[The Start of Assistant 1's Answer]

{Response 1}

[The End of Assistant 1's Answer]

[The Start of Assistant 2's Answer]

{Response 2}

[The End of Assistant 2's Answer]

[System]

We would like to request your feedback on the performance of two AI assistants in response to the user question displayed above. Please rate the helpfulness, relevance, accuracy, level of details of their responses. Each assistant receives an overall score on a scale of 1 to 10, where a higher score indicates better overall performance. Please first output a single line containing only two values indicating the scores for Assistant 1 and 2, respectively. The two scores are separated by a space. In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential bias and ensuring that the order in which the responses were presented does not affect your judgment.)";

/// Bracket-verdict template: the judge ends with [[A]], [[B]] or [[C]].
/// Each "{Instruction pair N}" slot receives the instruction followed by
/// response N.
inline constexpr std::string_view kBracketTemplate = R"([The Start of Assistant A’s Instruction and Answer]

{Instruction pair 1}

[The End of Assistant A’s Instruction and Answer]

[The Start of Assistant B’s Instruction and Answer]

{Instruction pair 2}

[The End of Assistant B’s Instruction and Answer]

[System]

Please act as an impartial judge and evaluate the quality of the responses provided by two AI assistants to the user question displayed below. You should choose the assistant that follows the user’s instructions and answers the user’s question better. Your evaluation should consider factors such as the helpfulness, relevance, accuracy, depth, creativity, and level of detail of their responses. Begin your evaluation by comparing the two responses and provide a short explanation. Avoid any positional biases and ensure that the order in which the responses were presented does not influence your decision. Do not allow the length of the responses to influence your evaluation. Do not favor certain names of the assistants. Be as objective as possible. After providing your explanation, output your final verdict by strictly following this format: “[[A]]” if assistant A is better, “[[B]]” if assistant B is better, and “[[C]]” for a tie.)";

}  // namespace car::prompts
