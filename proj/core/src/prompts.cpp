#include "halluscore/prompts.hpp"

#include "halluscore/error.hpp"

namespace halluscore::prompts {

namespace {

// The template bodies are byte-significant, including the typographic quote
// characters (written as explicit UTF-8 escapes), doubled spaces, and line
// breaks. Do not reflow.

constexpr std::string_view kPTrue =
    "Provide a \"True\" or \"False\" response on whether the\n"
    "answer for the following question is correct. Give ONLY\n"
    "a True or False answer, no other words or explanation.\n"
    "\n"
    "The question is: {x}\n"
    "The answer is: {z}\n"
    "The answer is:";

constexpr std::string_view kInputContradict =
    "Provide a \xE2\x80\x9CTrue\xE2\x80\x9C or \xE2\x80\x9D"
    "False\xE2\x80\x9C response\n"
    "on whether the following texts are free of any direct\n"
    "logical or factual contradictions between them. Give\n"
    "ONLY a  True or False answer, no other words or explanation.\n"
    "\n"
    "First text: {x}\n"
    "Second text: {z}\n"
    "The answer is:";

constexpr std::string_view kSelfContradict =
    "Provide a \xE2\x80\x9CTrue\xE2\x80\x9C or \xE2\x80\x9D"
    "False\xE2\x80\x9C response\n"
    "on whether the  following text is free of internal\n"
    "factual or logical contradictions. Give ONLY a True or\n"
    "False answer, no other words or explanation.\n"
    "\n"
    "The text is: {z}\n"
    "The text is internally consistent:";

constexpr std::string_view kFactContradict =
    "Provide a \xE2\x80\x9CTrue\xE2\x80\x9C or \xE2\x80\x9D"
    "False\xE2\x80\x9C response\n"
    "on whether the following text contains no contradictions\n"
    "with generally established facts. Give ONLY a True or\n"
    "False answer, no other words or explanation.\n"
    "\n"
    "Text: {z}\n"
    "The text is factually sound:";

constexpr std::string_view kVerbalized =
    "Provide the probability between 0.0 and 1.0 that the\n"
    "answer for the following question is correct. Give\n"
    "ONLY the probability value between 0.0 and 1.0, no\n"
    "other words or explanation.\n"
    "\n"
    "The question is: {x}\n"
    "The answer is: {z}\n"
    "Probability the answer is correct:";

constexpr std::string_view kRail =
    "You are given a task to identify if the hypothesis is\n"
    "in agreement with the context below. You will only\n"
    "use the contents of the context and not rely on\n"
    "external knowledge. Answer with yes/no.\n"
    "\n"
    "context: {K additional_sampled_responses}\n"
    "hypothesis: {candidate_response}\n"
    "agreement:";

struct Substitution {
  std::string_view placeholder;
  std::string_view value;
};

// Single pass over the template; substituted values are never rescanned, so
// placeholder-looking text inside an input cannot trigger a second expansion.
std::string substitute(std::string_view tmpl,
                       std::initializer_list<Substitution> subs) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t next = std::string_view::npos;
    const Substitution* hit = nullptr;
    for (const Substitution& s : subs) {
      const std::size_t at = tmpl.find(s.placeholder, pos);
      if (at < next) {
        next = at;
        hit = &s;
      }
    }
    if (!hit) break;
    out.append(tmpl, pos, next - pos);
    out.append(hit->value);
    pos = next + hit->placeholder.size();
  }
  out.append(tmpl, pos, tmpl.size() - pos);
  return out;
}

}  // namespace

std::string_view template_for(ScorerBase kind) {
  switch (kind) {
    case ScorerBase::PTrue: return kPTrue;
    case ScorerBase::PInputContradict: return kInputContradict;
    case ScorerBase::PSelfContradict: return kSelfContradict;
    case ScorerBase::PFactContradict: return kFactContradict;
    case ScorerBase::PTrueVerbalized: return kVerbalized;
    case ScorerBase::HallucinationRail: return kRail;
    default:
      raise(ErrorCode::InvalidArgument,
            "scorer kind has no prompt template");
  }
}

std::string render(std::string_view tmpl, std::string_view x,
                   std::string_view z) {
  return substitute(tmpl, {{"{x}", x}, {"{z}", z}});
}

std::string render_rail(const std::vector<std::string>& samples,
                        std::string_view candidate_response) {
  std::string context;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) context += "\n\n";
    context += samples[i];
  }
  return substitute(kRail, {{"{K additional_sampled_responses}", context},
                            {"{candidate_response}", candidate_response}});
}

}  // namespace halluscore::prompts
