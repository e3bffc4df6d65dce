#pragma once

#include <string>
#include <string_view>

namespace halluscore {

// Canonical form used for containment labeling: lowercased, a small table of
// Unicode compatibility characters folded to ASCII, whitespace runs collapsed
// to single spaces, and leading/trailing whitespace plus surrounding
// punctuation stripped. Internal punctuation is kept.
std::string normalize_text(std::string_view t);

// 1 iff normalize_text(reference) is a substring of normalize_text(response).
// The reference must be non-empty after normalization.
int label_by_containment(std::string_view reference, std::string_view response);

}  // namespace halluscore
