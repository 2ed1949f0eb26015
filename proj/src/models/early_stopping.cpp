// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/models/early_stopping.hpp"

#include <algorithm>

#include "cloudmd/domain.hpp"

namespace cloudmd::models {

EarlyStopDecision early_stop(std::span<const double> history, std::size_t patience) {
    if (history.empty()) throw DomainError("early stopping needs at least one epoch");
    // max_element returns the first maximum
    const auto best = static_cast<std::size_t>(std::max_element(history.begin(), history.end()) - history.begin());
    const std::size_t current = history.size() - 1;
    return {current - best >= patience, best};
}

}  // namespace cloudmd::models
