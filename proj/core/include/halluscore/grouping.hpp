#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "halluscore/types.hpp"

namespace halluscore {

// Group 0 is the always-on global group; cluster c maps to group id c + 1.
struct Group {
  int group_id = 0;
  int component = -1;  // -1 for the global group
  std::vector<std::string> member_ids;
};

struct GroupSet {
  std::vector<Group> groups;
  std::size_t embedding_dim = 0;  // raw concatenated dimension
  int reducer_dim = 0;
  int gmm_components = 0;
};

struct GroupingConfig {
  int reducer_dim = 8;
  double responsibility_threshold = 0.2;
  int max_components = 10;
  int em_max_iters = 200;
  double em_tol = 1e-6;
  double covariance_reg = 1e-6;
  std::uint64_t seed = 0;
};

// Fitted projection and mixture; enough to recompute memberships for unseen
// examples.
struct GroupingModel {
  std::vector<double> center;       // raw dimension
  std::vector<double> projection;   // reduced_dim x raw_dim, row-major
  std::size_t raw_dim = 0;
  std::size_t reduced_dim = 0;
  std::vector<double> mixture_weights;
  std::vector<double> mixture_means;  // components x reduced_dim
  std::vector<double> mixture_covs;   // components x reduced_dim x reduced_dim
  double responsibility_threshold = 0.2;

  std::size_t components() const { return mixture_weights.size(); }
  std::vector<double> project(const std::vector<double>& raw_embedding) const;
  std::vector<double> responsibilities(
      const std::vector<double>& raw_embedding) const;
  // Sorted group ids for one example: always 0, plus c+1 for every component
  // whose responsibility reaches the threshold.
  std::vector<int> assign(const std::vector<double>& raw_embedding) const;
};

struct GroupingResult {
  GroupSet groups;
  GroupingModel model;
};

// Fits the reducer on the calibration fold (principal components of the
// centered embeddings), fits mixtures with 1..max_components by EM, picks the
// component count with the lowest BIC, then assigns every example to its
// groups. embeddings[i] belongs to ids[i].
GroupingResult build_groups(const std::vector<std::string>& ids,
                            const std::vector<std::vector<double>>& embeddings,
                            const SplitAssignment& split,
                            const GroupingConfig& cfg);

// Per-id group memberships in `ids` order, read off a GroupSet.
std::vector<std::vector<int>> memberships_for(const GroupSet& groups,
                                              const std::vector<std::string>& ids);

std::string grouping_model_to_json(const GroupingModel& model);
GroupingModel grouping_model_from_json(const std::string& text);

}  // namespace halluscore
