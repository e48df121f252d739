// SPDX-License-Identifier: Apache-2.0
#include "convbench/core/coro.hpp"

namespace convbench::core {

Detached launch(Co<void> co, std::function<void(std::exception_ptr)> done) {
    std::exception_ptr error;
    try {
        co_await std::move(co);
    } catch (...) {
        error = std::current_exception();
    }
    if (done) done(error);
}

}  // namespace convbench::core
