#include "halluscore/text.hpp"

#include <cstdint>
#include <vector>

#include "halluscore/error.hpp"

namespace halluscore {

namespace {

// Decodes one UTF-8 code point starting at i; on malformed input consumes a
// single byte and returns it as-is so normalization never throws.
char32_t decode_one(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) {
    return static_cast<unsigned char>(s[k]);
  };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto cont = [&](std::size_t k) {
    return k < s.size() && (byte(k) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    char32_t cp = (char32_t(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    char32_t cp = (char32_t(b0 & 0x0F) << 12) |
                  (char32_t(byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    char32_t cp = (char32_t(b0 & 0x07) << 18) |
                  (char32_t(byte(i + 1) & 0x3F) << 12) |
                  (char32_t(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp;
  }
  i += 1;
  return b0;
}

void encode_one(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case 0x00A0:   // no-break space
    case 0x1680:
    case 0x202F:
    case 0x205F:
    case 0x3000:   // ideographic space
    case 0x200B:   // zero width space
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;  // en quad .. hair space
  }
}

// Folds a code point toward a lowercase ASCII-compatible form. This is a
// pragmatic subset of full compatibility normalization covering the forms
// that show up in question answering corpora.
char32_t fold_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  // fullwidth ASCII block
  if (cp >= 0xFF01 && cp <= 0xFF5E) {
    char32_t ascii = cp - 0xFEE0;
    if (ascii >= U'A' && ascii <= U'Z') ascii += 32;
    return ascii;
  }
  // Latin-1 uppercase letters (multiplication sign excluded)
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  switch (cp) {
    case 0x2018:  // left single quote
    case 0x2019:  // right single quote
    case 0x201A:
    case 0x2032:  // prime
      return U'\'';
    case 0x201C:  // left double quote
    case 0x201D:  // right double quote
    case 0x201E:
    case 0x2033:
      return U'"';
    case 0x2010:
    case 0x2011:
    case 0x2012:
    case 0x2013:  // en dash
    case 0x2014:  // em dash
    case 0x2212:  // minus sign
      return U'-';
    case 0x2026:  // ellipsis folds to a period
      return U'.';
    default:
      return cp;
  }
}

bool is_strip_punct(char32_t cp) {
  if (cp >= 0x80) return false;
  const char c = static_cast<char>(cp);
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

}  // namespace

std::string normalize_text(std::string_view t) {
  std::vector<char32_t> cps;
  cps.reserve(t.size());
  std::size_t i = 0;
  while (i < t.size()) {
    char32_t cp = fold_cp(decode_one(t, i));
    cps.push_back(is_space_cp(cp) ? U' ' : cp);
  }

  std::size_t begin = 0;
  std::size_t end = cps.size();
  while (begin < end && (cps[begin] == U' ' || is_strip_punct(cps[begin]))) {
    ++begin;
  }
  while (end > begin && (cps[end - 1] == U' ' || is_strip_punct(cps[end - 1]))) {
    --end;
  }

  std::string out;
  out.reserve(end - begin);
  bool pending_space = false;
  for (std::size_t k = begin; k < end; ++k) {
    if (cps[k] == U' ') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    encode_one(cps[k], out);
  }
  return out;
}

int label_by_containment(std::string_view reference,
                         std::string_view response) {
  const std::string ref = normalize_text(reference);
  if (ref.empty()) {
    raise(ErrorCode::EmptyReference,
          "reference answer is empty after normalization");
  }
  const std::string resp = normalize_text(response);
  return resp.find(ref) != std::string::npos ? 1 : 0;
}

}  // namespace halluscore
