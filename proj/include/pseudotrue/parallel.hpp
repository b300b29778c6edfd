/*
 * Copyright 2026 The pseudotrue Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace pseudotrue
{

/// Worker count from PSEUDOTRUE_THREADS (unset or 0 = hardware concurrency).
inline unsigned thread_count()
{
    unsigned requested = 0;
    if (const char* env = std::getenv("PSEUDOTRUE_THREADS"); env != nullptr)
    {
        try
        {
            requested = static_cast<unsigned>(std::stoul(env));
        }
        catch (const std::exception&)
        {
            requested = 0;
        }
    }
    if (requested == 0)
    {
        requested = std::max(1U, std::thread::hardware_concurrency());
    }
    return requested;
}

/// Calls body(i) for i in [0, count) over contiguous chunks. Callers write
/// results into index-addressed slots, so output never depends on the
/// schedule. The first exception (by chunk order) is rethrown.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = thread_count())
{
    threads = static_cast<unsigned>(
        std::max<std::size_t>(1, std::min<std::size_t>(threads, count)));
    if (threads <= 1)
    {
        for (std::size_t i = 0; i < count; ++i)
        {
            body(i);
        }
        return;
    }

    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        const std::size_t chunk = (count + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t)
        {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            workers.emplace_back(
                [&, t, begin, end]
                {
                    try
                    {
                        for (std::size_t i = begin; i < end; ++i)
                        {
                            body(i);
                        }
                    }
                    catch (...)
                    {
                        errors[t] = std::current_exception();
                    }
                });
        }
    }
    for (const auto& error : errors)
    {
        if (error)
        {
            std::rethrow_exception(error);
        }
    }
}

}  // namespace pseudotrue
