#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hafi/errors.hpp"
#include "hafi/microdata.hpp"
#include "hafi/provider.hpp"
#include "hafi/random.hpp"
#include "hafi/statespace.hpp"

namespace hafi {

struct JointSample {
  Eigen::MatrixXd z;  // T x n_z
  Eigen::MatrixXd x;  // T x n_x
  MicroDataset micro;
};

/// Macro path of length T and micro blocks of N units at each t in `times`.
inline JointSample simulate_joint(const ModelProvider& provider, const Eigen::VectorXd& theta, int T,
                                  const std::vector<int>& times, std::size_t N, std::uint64_t seed) {
  if (T < 1) throw InvalidInput("simulate_joint: T must be >= 1");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < 1 || times[k] > T) throw InvalidInput("simulate_joint: observation times must lie in 1..T");
    if (k > 0 && times[k] <= times[k - 1]) throw InvalidInput("simulate_joint: observation times must increase");
  }
  const StateSpaceModel model = provider.state_space(theta);
  const SimulatedPaths paths = simulate(model, T, derive_seed(seed, 0, stream_domain::simulate));
  JointSample out;
  out.z = paths.z;
  out.x = paths.x;
  out.micro.observables = provider.micro_observables();
  const std::uint64_t micro_seed = derive_seed(seed, 1, stream_domain::cross_section);
  for (int t : times) out.micro.blocks.push_back(provider.simulate_micro(theta, paths.z, t, N, micro_seed));
  out.micro.validate();
  return out;
}

}  // namespace hafi
