#include "logbo/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace logbo {

namespace {

const int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                       41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

}  // namespace

Eigen::MatrixXd halton_scrambled(int n, int d, Rng& rng) {
  constexpr int kMaxDim = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("halton_scrambled: dim out of range");
  // one digit permutation per dimension, fixed for the whole sequence
  std::vector<std::vector<int>> perms(d);
  for (int k = 0; k < d; ++k) {
    std::vector<int> p(kPrimes[k]);
    std::iota(p.begin(), p.end(), 0);
    for (int i = static_cast<int>(p.size()) - 1; i > 0; --i)
      std::swap(p[i], p[rng.uniform_int(i + 1)]);
    perms[k] = std::move(p);
  }
  Eigen::MatrixXd out(n, d);
  for (int k = 0; k < d; ++k) {
    const int b = kPrimes[k];
    const auto& perm = perms[k];
    for (int i = 0; i < n; ++i) {
      double f = 1.0, r = 0.0;
      int idx = i + 1;
      while (idx > 0) {
        f /= b;
        r += f * perm[idx % b];
        idx /= b;
      }
      out(i, k) = std::min(r, std::nextafter(1.0, 0.0));
    }
  }
  return out;
}

}  // namespace logbo
