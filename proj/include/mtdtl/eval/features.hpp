#pragma once

#include <cmath>
#include <vector>

#include "mtdtl/arch/network.hpp"
#include "mtdtl/dsp/mfcc.hpp"

namespace mtdtl::eval {

/// Per-dimension mean then population sd over rows (slices): 2 x D values.
inline std::vector<double> aggregate_slices(const std::vector<std::vector<double>>& slices) {
  require(!slices.empty(), "aggregate: no slices");
  const std::size_t D = slices[0].size();
  std::vector<double> out(2 * D, 0.0);
  const double n = static_cast<double>(slices.size());
  for (const auto& s : slices) {
    require(s.size() == D, "aggregate: slices differ in length");
    for (std::size_t i = 0; i < D; ++i) out[i] += s[i];
  }
  for (std::size_t i = 0; i < D; ++i) out[i] /= n;
  for (const auto& s : slices)
    for (std::size_t i = 0; i < D; ++i) out[D + i] += (s[i] - out[i]) * (s[i] - out[i]);
  for (std::size_t i = 0; i < D; ++i) out[D + i] = std::sqrt(out[D + i] / n);
  return out;
}

/// Non-overlapping `slice`-frame windows (trailing partial dropped) through the network in eval mode.
template <typename T>
std::vector<double> extract_aggregate(const arch::BranchedNetwork<T>& net, const Tensor<T>& spec,
                                      std::size_t slice = 216) {
  require(spec.rank() == 3, "extract: expected channels x frames x bands");
  const std::size_t count = spec.dim(1) / slice;
  if (count == 0)
    throw InvalidArgument("extract: " + std::to_string(spec.dim(1)) + " frames is shorter than one slice of " +
                          std::to_string(slice));
  const std::size_t C = spec.dim(0), B = spec.dim(2);
  Tensor<T> batch({count, C, slice, B});
  for (std::size_t s = 0; s < count; ++s)
    for (std::size_t c = 0; c < C; ++c)
      std::copy(spec.data() + (c * spec.dim(1) + s * slice) * B, spec.data() + (c * spec.dim(1) + (s + 1) * slice) * B,
                batch.data() + ((s * C + c) * slice) * B);
  const auto rep = arch::extract_representation(net, batch);
  std::vector<std::vector<double>> rows(count, std::vector<double>(rep.dim(1)));
  for (std::size_t s = 0; s < count; ++s)
    for (std::size_t i = 0; i < rep.dim(1); ++i) rows[s][i] = rep.at(s, i);
  return aggregate_slices(rows);
}

} // namespace mtdtl::eval
