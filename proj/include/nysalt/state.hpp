#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nysalt {

// Phase-space point. Positions and momenta are stored as two contiguous
// arrays of equal length d (not interleaved); every operation in the
// library relies on this layout.
struct State {
  std::vector<double> q;
  std::vector<double> p;

  State() = default;
  State(std::vector<double> q_in, std::vector<double> p_in)
      : q(std::move(q_in)), p(std::move(p_in)) {
    if (q.size() != p.size())
      throw std::invalid_argument("State: q and p must have equal length");
    if (q.empty()) throw std::invalid_argument("State: dimension must be >= 1");
  }
  explicit State(std::size_t dim) : q(dim, 0.0), p(dim, 0.0) {}

  std::size_t dim() const { return q.size(); }

  bool finite() const {
    for (double v : q)
      if (!std::isfinite(v)) return false;
    for (double v : p)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch, expected " +
                                std::to_string(expected) + ", got " + std::to_string(got));
}

// Index of the first non-finite state in a trajectory, or -1 if all finite.
inline long first_nonfinite(const std::vector<State>& traj) {
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (!traj[i].finite()) return static_cast<long>(i);
  return -1;
}

}  // namespace nysalt
