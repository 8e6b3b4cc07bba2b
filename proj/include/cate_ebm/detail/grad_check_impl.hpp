#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cate_ebm {

template <class Loss>
double grad_check(Loss&& loss, std::span<const double> analytic, std::span<const double> params,
                  double h, std::uint64_t subsample_seed) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
  if (analytic.size() != params.size())
    throw std::invalid_argument("grad_check: gradient and parameter sizes differ");

  constexpr std::size_t max_checked = 10000;
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > max_checked) {
    SeededRng rng(subsample_seed);
    rng.shuffle(coords);
    coords.resize(max_checked);
    std::sort(coords.begin(), coords.end());
  }

  std::vector<double> work(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = work[i];
    work[i] = saved + h;
    const double up = loss(std::span<const double>(work));
    work[i] = saved - h;
    const double down = loss(std::span<const double>(work));
    work[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

} // namespace cate_ebm
