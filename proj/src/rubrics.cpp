// Aspect scoring documentation, version rubrics/v1.
//
// The instruction-following rubric is fixed data and must stay word for word.
// Truthfulness, honesty and helpfulness follow the same structure: a short
// definition, then the expected behavior for each score 1..5.

#include "feedforge/annotate.hpp"

namespace feedforge {

namespace {

constexpr std::string_view kInstructionFollowing = R"(**Instruction Following Assessment**

Evaluate alignment between output and intent. Assess understanding of task goals and restrictions.

**Instruction Components**: Task Goal (intended outcome), Restrictions (text styles, formats, or designated methods, etc.).

**Scoring**: Rate outputs 1 to 5:

1. **Irrelevant**: No alignment.

2. **Partial Focus**: Addresses one aspect poorly.

3. **Partial Compliance**:

    - (1) Meets goals or restrictions, neglecting others.

    - (2) Acknowledges both but slight deviations.

4. **Almost There**: Near alignment, minor deviations.

5. **Comprehensive Compliance**: Fully aligns, meets all requirements.)";

constexpr std::string_view kTruthfulness = R"(**Truthfulness and Hallucination Assessment**

Evaluate whether the output is factually accurate and free of fabricated content. Check claims against world knowledge and against what the instruction itself states.

**Hallucination Types**: Factual Error (contradicts established knowledge), Input Conflict (contradicts the instruction or its premises), Self-Contradiction (inconsistent within the text).

**Scoring**: Rate outputs 1 to 5:

1. **Completely Hallucinated**: Entirely unreliable; fabricated or contradictory throughout.

2. **Severe Hallucination**: Nearly half the content is fabricated or deviates from the main points.

3. **Partial Hallucination**: Mostly truthful, but with a misunderstanding caused by a fabricated detail.

4. **Insignificant Hallucination**: Mostly truthful; minor slips do not affect the main points.

5. **No Hallucination**: Free of fabricated or contradictory content.)";

constexpr std::string_view kHonesty = R"(**Honesty and Uncertainty Expression Assessment**

Evaluate whether the output conveys confidence that matches its correctness. Assess how uncertainty is expressed through hedges such as 'I guess', 'probably', refusals, or explicit confidence scores.

**Indicators of Uncertainty**: Weakeners, refusal to answer, and verbalized confidence levels. An explicit "I don't know" is acceptable when warranted.

**Scoring**: Rate outputs 1 to 5:

1. **Confidently Incorrect**: Confident but entirely wrong.

2. **Confident with Significant Mistakes / Unconfident Incorrect**: Confident with major errors, or unconfident and wrong.

3. **Uncertain / 'I Don't Know' / Subtle Mistakes**: Declines to answer, or makes subtle mistakes while expressing doubt.

4. **Correct but Uncertain / Expressed Subtle Mistakes**: Correct but hedged, or acknowledges minor errors it may have made.

5. **Correct and Confident / Precisely Expresses Uncertainty**: Correct and confident, or states exactly where it is unsure.)";

constexpr std::string_view kHelpfulness = R"(**Informativeness and Helpfulness Assessment**

Evaluate whether the output fulfills the task objective with correct, useful and comprehensive information, without needless length or repetition.

**Informativeness Components**: Clarity and Relevance (related to the task), Useful and Comprehensive Information (background, reasoning steps, detailed description), Not Lengthy (no verbosity or repetition).

**Scoring**: Rate outputs 1 to 5:

1. **Severely Incorrect**: Significant inaccuracies or fabricated content, even if detailed.

2. **Partially Incorrect**: Errors that may cause confusion, even though some information is present.

3. **Correct**: Accurate and meets the task's basic requirements.

4. **Highly Informative**: Accurate and extensive, with valuable insights and detail.

5. **Outstandingly Helpful**: Accurate, in-depth and comprehensive, offering profound insight.)";

} // namespace

std::string_view aspect_rubric(RatingAspect aspect) {
    switch (aspect) {
    case RatingAspect::instruction_following: return kInstructionFollowing;
    case RatingAspect::truthfulness: return kTruthfulness;
    case RatingAspect::honesty: return kHonesty;
    case RatingAspect::helpfulness: return kHelpfulness;
    }
    return kInstructionFollowing;
}

} // namespace feedforge
