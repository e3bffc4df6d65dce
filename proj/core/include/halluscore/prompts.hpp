#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore::prompts {

// Bump when any template body changes; recorded in run metadata so cached
// scores and fixtures can be invalidated.
inline constexpr std::string_view kVersion = "v1";

// The stored template body for a prompted scorer. Placeholders: {x} input,
// {z} candidate response, and for the rail prompt
// {K additional_sampled_responses} / {candidate_response}.
std::string_view template_for(ScorerBase kind);

// Placeholder substitution for the single-response prompts.
std::string render(std::string_view tmpl, std::string_view x,
                   std::string_view z);

// Rail prompt: context is the K samples joined by blank lines in order.
std::string render_rail(const std::vector<std::string>& samples,
                        std::string_view candidate_response);

}  // namespace halluscore::prompts
