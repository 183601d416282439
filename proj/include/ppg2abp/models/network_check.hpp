#pragma once

#include "ppg2abp/models/network.hpp"
#include "ppg2abp/tensorops/gradcheck.hpp"

namespace ppg2abp::models {

/// Finite-difference check of a whole network in train mode. The objective
/// is the MSE of every output (final and auxiliary) against seeded random
/// targets, on a seeded random input batch. All-zero weight blocks (such as
/// a residual head) are first filled with seeded noise so that gradients
/// reach every layer.
tensorops::GradCheckReport check_network_gradients(Network& net, std::size_t batch, std::uint64_t seed,
                                                   const tensorops::GradCheckOptions& options = {});

}  // namespace ppg2abp::models
