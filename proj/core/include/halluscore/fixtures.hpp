#pragma once

#include <map>
#include <optional>
#include <string>

namespace halluscore {

// Recorded wire responses keyed by request digest. File form: one JSON object
// per line with {digest, endpoint, response}; saved in digest order so that
// recorded files are reproducible.
class FixtureStore {
 public:
  FixtureStore() = default;

  static FixtureStore load(const std::string& path);
  void save(const std::string& path) const;

  void insert(const std::string& digest, const std::string& endpoint,
              const std::string& response_json);
  std::optional<std::string> lookup(const std::string& digest) const;

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string endpoint;
    std::string response_json;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace halluscore
