#pragma once

#include <string>
#include <vector>

#include "dcd/model.hpp"

namespace dcd {

struct Fixture {
  std::string name;
  MatrixXd K;                 // gain pattern, entries a..s numbered 1..19
  Topology topology;
  std::vector<int> n_off;     // expected off-diagonal block counts
  std::vector<int> X_init;    // zero based, caseb_init only
  std::vector<int> U_init;
};

std::vector<std::string> fixture_names();
Fixture fixture_loader(const std::string& name);

}  // namespace dcd
