#include "halluscore/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

#include "halluscore/error.hpp"
#include "halluscore/rng.hpp"

namespace halluscore {

namespace {

using nlohmann::json;

Example parse_example(const json& rec, std::size_t line_no) {
  auto fail = [&](const std::string& what) -> void {
    raise(ErrorCode::ParseError,
          "line " + std::to_string(line_no) + ": " + what);
  };
  if (!rec.is_object()) fail("record is not an object");

  Example ex;
  for (const auto& [key, value] : rec.items()) {
    if (key == "id" || key == "input" || key == "response") {
      if (!value.is_string()) fail("key \"" + key + "\" must be a string");
      if (key == "id") ex.id = value.get<std::string>();
      if (key == "input") ex.input = value.get<std::string>();
      if (key == "response") ex.response = value.get<std::string>();
    } else if (key == "label") {
      if (!value.is_number_integer() ||
          (value.get<int>() != 0 && value.get<int>() != 1)) {
        fail("key \"label\" must be 0 or 1");
      }
      ex.label = value.get<int>();
    } else if (key == "reference_answer") {
      if (!value.is_string()) fail("key \"reference_answer\" must be a string");
      ex.reference_answer = value.get<std::string>();
    } else if (key == "samples") {
      if (!value.is_array()) fail("key \"samples\" must be an array");
      for (const auto& s : value) {
        if (!s.is_string()) fail("key \"samples\" must contain only strings");
        ex.samples.push_back(s.get<std::string>());
      }
    } else {
      ex.extras[key] = value.dump();
    }
  }
  if (!rec.contains("id")) fail("missing required key \"id\"");
  if (!rec.contains("input")) fail("missing required key \"input\"");
  if (!rec.contains("response")) fail("missing required key \"response\"");
  if (ex.id.empty()) fail("key \"id\" must be non-empty");
  return ex;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open dataset file " + path);

  Dataset d;
  d.name = std::filesystem::path(path).stem().string();

  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      raise(ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": invalid JSON");
    }
    Example ex = parse_example(rec, line_no);
    if (!seen.insert(ex.id).second) {
      raise(ErrorCode::DuplicateId,
            "duplicate example id \"" + ex.id + "\" at line " +
                std::to_string(line_no));
    }
    d.examples.push_back(std::move(ex));
  }
  if (d.examples.empty()) {
    raise(ErrorCode::EmptyDataset, "dataset file " + path + " has no records");
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write dataset file " + path);
  for (const auto& ex : d.examples) {
    json rec;
    rec["id"] = ex.id;
    rec["input"] = ex.input;
    rec["response"] = ex.response;
    if (ex.label) rec["label"] = *ex.label;
    if (ex.reference_answer) rec["reference_answer"] = *ex.reference_answer;
    if (!ex.samples.empty()) rec["samples"] = ex.samples;
    for (const auto& [key, value] : ex.extras) {
      rec[key] = json::parse(value);
    }
    out << rec.dump() << "\n";
  }
}

SplitAssignment split_dataset(const Dataset& d, double calib_fraction,
                              std::uint64_t seed) {
  if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
    raise(ErrorCode::InvalidArgument,
          "calib_fraction must be strictly between 0 and 1");
  }
  const std::size_t n = d.size();
  if (n < 2) {
    raise(ErrorCode::TooSmall,
          "dataset has " + std::to_string(n) +
              " examples, need at least 2 to split");
  }
  const auto n_cal =
      static_cast<std::size_t>(std::llround(calib_fraction * double(n)));
  if (n_cal == 0 || n_cal == n) {
    raise(ErrorCode::TooSmall, "split would leave an empty fold (n=" +
                                   std::to_string(n) + ", fraction=" +
                                   std::to_string(calib_fraction) + ")");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> cal_idx(order.begin(), order.begin() + n_cal);
  std::vector<std::size_t> test_idx(order.begin() + n_cal, order.end());
  std::sort(cal_idx.begin(), cal_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  SplitAssignment split;
  split.seed = seed;
  split.calibration_ids.reserve(cal_idx.size());
  for (auto i : cal_idx) split.calibration_ids.push_back(d.examples[i].id);
  split.test_ids.reserve(test_idx.size());
  for (auto i : test_idx) split.test_ids.push_back(d.examples[i].id);
  return split;
}

std::string split_id(const Dataset& d, const SplitAssignment& split,
                     double calib_fraction) {
  const auto pct = static_cast<int>(std::llround(calib_fraction * 100.0));
  return d.name + "_n" + std::to_string(d.size()) + "_seed" +
         std::to_string(split.seed) + "_cal" + std::to_string(pct);
}

}  // namespace halluscore
