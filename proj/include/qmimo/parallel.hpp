// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace qmimo {

/// Worker count: QMIMO_WORKERS environment variable if set (>= 1), else
/// hardware concurrency.
int default_worker_count();

/// Runs body(i) for i in [0, n) on a small thread pool. Tasks must write
/// only to their own index slot so results are independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int workers = 0);

}  // namespace qmimo
