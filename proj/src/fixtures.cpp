#include "dcd/fixtures.hpp"

#include <stdexcept>

namespace dcd {

namespace {

MatrixXd example_gain() {
  // (row, col) of entries a..s, zero based
  static const int pos[19][2] = {{0, 0}, {0, 3}, {0, 5}, {0, 6}, {1, 1},
                                 {1, 2}, {1, 4}, {1, 6}, {2, 2}, {2, 3},
                                 {2, 5}, {3, 2}, {3, 3}, {3, 6}, {4, 3},
                                 {4, 4}, {4, 5}, {5, 3}, {5, 5}};
  MatrixXd K = MatrixXd::Zero(6, 7);
  for (int e = 0; e < 19; ++e) K(pos[e][0], pos[e][1]) = e + 1;
  return K;
}

std::vector<int> zero_based(std::vector<int> v) {
  for (int& x : v) --x;
  return v;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"example1", "example2", "caseb_init"};
}

Fixture fixture_loader(const std::string& name) {
  Fixture f;
  f.name = name;
  if (name == "example1") {
    f.K = example_gain();
    f.topology = make_topology({0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 3, 4, 5},
                               {1, 2, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1});
    f.n_off = {0, 2, 4, 2, 3, 3};
  } else if (name == "example2") {
    f.K = example_gain();
    f.topology = make_topology(zero_based({2, 1, 5, 7, 3, 4, 6}),
                               zero_based({2, 1, 5, 4, 3, 6}),
                               {1, 1, 1, 1, 1, 2}, {1, 1, 1, 1, 1, 1});
    f.n_off = {0, 0, 1, 2, 2, 4};
  } else if (name == "caseb_init") {
    f.X_init = zero_based({30, 20, 22, 1,  25, 18, 11, 24, 16, 2,
                           28, 26, 3,  5,  7,  4,  10, 12, 6,  21,
                           27, 9,  15, 19, 8,  17, 23, 13, 29, 14});
    f.U_init = zero_based({26, 15, 24, 12, 9,  1,  13, 27, 8,  10,
                           22, 11, 5,  23, 16, 20, 6,  14, 19, 25,
                           7,  17, 4,  21, 18, 2,  3,  29, 28, 30});
    f.topology = make_topology(f.X_init, f.U_init, std::vector<int>(30, 1),
                               std::vector<int>(30, 1));
  } else {
    throw std::invalid_argument("unknown fixture: " + name);
  }
  return f;
}

}  // namespace dcd
