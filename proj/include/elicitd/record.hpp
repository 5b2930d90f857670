#pragma once

#include <optional>
#include <string>
#include <vector>

namespace elicitd {

// One expert-decided case. `features` is flattened row-major; images are
// stored channels-first (C x H x W).
struct DecisionRecord {
  std::string id;
  std::vector<double> features;
  int label = 0;
  // Number of panel experts who agreed with the majority label.
  std::optional<int> agreement;

  bool operator==(const DecisionRecord&) const = default;
};

}  // namespace elicitd
