#include "halluscore/fixtures.hpp"

#include <fstream>

#include "json.hpp"

#include "halluscore/error.hpp"

namespace halluscore {

using nlohmann::json;

FixtureStore FixtureStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open fixture file " + path);
  FixtureStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("digest") ||
        !rec.contains("endpoint") || !rec.contains("response")) {
      raise(ErrorCode::ParseError, "fixture file " + path + " line " +
                                       std::to_string(line_no) +
                                       ": expected {digest, endpoint, response}");
    }
    store.insert(rec["digest"].get<std::string>(),
                 rec["endpoint"].get<std::string>(), rec["response"].dump());
  }
  return store;
}

void FixtureStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write fixture file " + path);
  for (const auto& [digest, entry] : entries_) {
    json rec;
    rec["digest"] = digest;
    rec["endpoint"] = entry.endpoint;
    rec["response"] = json::parse(entry.response_json);
    out << rec.dump() << "\n";
  }
}

void FixtureStore::insert(const std::string& digest, const std::string& endpoint,
                          const std::string& response_json) {
  entries_[digest] = Entry{endpoint, response_json};
}

std::optional<std::string> FixtureStore::lookup(const std::string& digest) const {
  const auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response_json;
}

}  // namespace halluscore
