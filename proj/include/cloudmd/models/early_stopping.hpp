// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace cloudmd::models {

struct EarlyStopDecision {
    bool stop = false;
    std::size_t best_epoch = 0;  ///< first epoch holding the highest accuracy
};

/// Decides after the last entry of `history` (validation accuracy per epoch).
/// Stops once the last epoch is `patience` or more epochs past the best one.
/// Throws DomainError on an empty history.
EarlyStopDecision early_stop(std::span<const double> history, std::size_t patience);

}  // namespace cloudmd::models
