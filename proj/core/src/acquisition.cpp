#include "logbo/acquisition.hpp"

#include <algorithm>
#include <numeric>

namespace logbo {

std::vector<int> canonical_batch_order(const Mat& X) {
  std::vector<int> idx(X.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    for (Eigen::Index t = 0; t < X.cols(); ++t) {
      if (X(a, t) != X(b, t)) return X(a, t) < X(b, t);
    }
    return false;
  });
  return idx;
}

}  // namespace logbo
