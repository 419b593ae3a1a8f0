#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace irrbench {

/// Applies `fn` to every element with at most `max_inflight` concurrent calls.
/// Results keep input order. The first exception (by index) is rethrown after
/// all workers finish.
template <class In, class Fn>
auto parallel_map(const std::vector<In>& inputs, std::size_t max_inflight, Fn fn)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
    using Out = std::invoke_result_t<Fn&, const In&>;
    std::vector<Out> results(inputs.size());
    std::vector<std::exception_ptr> errors(inputs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(max_inflight, inputs.size()));

    auto run = [&](std::size_t i) {
        try {
            results[i] = fn(inputs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (workers == 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < inputs.size(); i = next++) run(i);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace irrbench
