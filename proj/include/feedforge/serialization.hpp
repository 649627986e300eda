#pragma once

#include "feedforge/annotate.hpp"
#include "feedforge/decontam.hpp"
#include "feedforge/genpool.hpp"
#include "feedforge/jsonl.hpp"
#include "feedforge/pairs.hpp"
#include "feedforge/select_eval.hpp"

// JSON forms of the stage records. Readers throw ParseError on unknown enum
// names or missing fields; nlohmann type errors propagate as json exceptions.
namespace feedforge {

json to_json(const Decoding& d);
Decoding decoding_from_json(const json& j);

json to_json(const Completion& c);
Completion completion_from_json(const json& j);

json to_json(const AspectRating& r);
AspectRating aspect_rating_from_json(const json& j);

json to_json(const Critique& c);
Critique critique_from_json(const json& j);

json to_json(const AnnotatedCompletion& a);
AnnotatedCompletion annotated_from_json(const json& j);

json to_json(const ComparisonPair& p);
ComparisonPair pair_from_json(const json& j);

json to_json(const FlaggedGram& g);

json to_json(const CandidatePool& p);
CandidatePool candidate_pool_from_json(const json& j);

json to_json(const MatchOutcome& m);
MatchOutcome match_outcome_from_json(const json& j);

json to_json(const Shortfall& s);

} // namespace feedforge
