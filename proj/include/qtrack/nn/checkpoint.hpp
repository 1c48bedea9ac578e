#pragma once

#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "qtrack/nn/mlp.hpp"

namespace qtrack::nn {

struct NetSnapshot {
  MlpSpec spec;
  Eigen::VectorXd theta;
};

/* A checkpoint bundles named parameter vectors plus free-form metadata.
 * On disk: a versioned binary blob at `path` and a human-readable JSON
 * sidecar at `path`.json describing what the blob contains. */
struct Checkpoint {
  std::map<std::string, NetSnapshot> nets;
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qtrack::nn
