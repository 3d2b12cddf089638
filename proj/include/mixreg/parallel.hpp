#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mixreg {

// Static-chunked parallel loop. Work is placed by index, so results are
// identical to the sequential run regardless of scheduling.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    const std::size_t hw = std::thread::hardware_concurrency();
    const std::size_t workers = hw > 1 ? std::min(hw, count) : 1;
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mixreg
