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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pseudotrue/error.hpp"

namespace pseudotrue
{

/// Grid {(a_1/s, ..., a_k/s) : a_i >= 0 integers, sum a_i = s}. Points are
/// stored as integer ticks so the sum-to-one constraint is exact.
struct SimplexGrid
{
    int steps = 100;
    int components = 2;

    double step() const { return 1.0 / steps; }

    /// C(s + k - 1, k - 1).
    std::uint64_t count() const
    {
        std::uint64_t c = 1;
        const int k = components - 1;
        for (int i = 1; i <= k; ++i)
        {
            c = c * static_cast<std::uint64_t>(steps + i) / static_cast<std::uint64_t>(i);
        }
        return c;
    }

    std::vector<double> weights(std::span<const int> ticks) const
    {
        std::vector<double> w(ticks.size());
        for (std::size_t i = 0; i < ticks.size(); ++i)
        {
            w[i] = static_cast<double>(ticks[i]) / steps;
        }
        return w;
    }
};

/// Grid with the given step; 1/step must be (within 1e-9) an integer.
inline SimplexGrid grid_from_step(double step, int components)
{
    if (!(step > 0.0) || step > 1.0)
    {
        throw UsageError("grid step must lie in (0, 1]");
    }
    const double inverse = 1.0 / step;
    const long rounded = std::lround(inverse);
    if (std::abs(inverse - static_cast<double>(rounded)) > 1e-9 * inverse)
    {
        throw UsageError("grid step must be 1/s for an integer s");
    }
    return {static_cast<int>(rounded), components};
}

using Ticks = std::vector<int>;

namespace detail
{

inline void enumerate_into(int remaining, std::size_t slot, Ticks& current, std::vector<Ticks>& out)
{
    if (slot + 1 == current.size())
    {
        current[slot] = remaining;
        out.push_back(current);
        return;
    }
    for (int a = remaining; a >= 0; --a)
    {
        current[slot] = a;
        enumerate_into(remaining - a, slot + 1, current, out);
    }
}

}  // namespace detail

/// All grid points, in lexicographic tick order with the first component
/// running from s down to 0.
inline std::vector<Ticks> enumerate_grid(const SimplexGrid& grid)
{
    if (grid.steps < 1 || grid.components < 1)
    {
        throw Error("simplex grid needs s >= 1 and k >= 1");
    }
    std::vector<Ticks> out;
    out.reserve(grid.count());
    Ticks current(static_cast<std::size_t>(grid.components), 0);
    detail::enumerate_into(grid.steps, 0, current, out);
    return out;
}

struct SimplexSearchOptions
{
    double initial_step = 0.01;
    double tolerance = 1e-6;  // simplex diameter
    int max_iterations = 20000;
};

struct SimplexSearchResult
{
    std::vector<double> point;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Nelder-Mead on the probability simplex, parameterized by the first k-1
/// coordinates (the last is 1 - sum). Points with a negative coordinate
/// count as +inf, as does anything the objective reports as +inf. The best
/// vertex never gets worse, so the result is never worse than `start`.
template <typename Objective>
SimplexSearchResult minimize_on_simplex(
    Objective&& objective,
    const std::vector<double>& start,
    const SimplexSearchOptions& options = {})
{
    const std::size_t k = start.size();
    SimplexSearchResult result;
    if (k == 0)
    {
        throw Error("minimize_on_simplex: empty start point");
    }

    auto full = [k](const std::vector<double>& reduced)
    {
        std::vector<double> theta(k);
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < k; ++i)
        {
            theta[i] = reduced[i];
            sum += reduced[i];
        }
        theta[k - 1] = 1.0 - sum;
        return theta;
    };
    auto evaluate = [&](const std::vector<double>& reduced)
    {
        const auto theta = full(reduced);
        for (double v : theta)
        {
            if (v < 0.0)
            {
                return std::numeric_limits<double>::infinity();
            }
        }
        ++result.evaluations;
        const double f = objective(std::span<const double>(theta));
        return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
    };

    const std::size_t dim = k - 1;
    std::vector<double> x0(start.begin(), start.begin() + static_cast<std::ptrdiff_t>(dim));
    if (dim == 0)
    {
        result.point = start;
        result.value = evaluate(x0);
        result.converged = true;
        return result;
    }

    std::vector<std::vector<double>> vertices{x0};
    std::vector<double> values{evaluate(x0)};
    for (std::size_t i = 0; i < dim; ++i)
    {
        auto v = x0;
        v[i] += options.initial_step;
        double f = evaluate(v);
        if (!std::isfinite(f))
        {
            v[i] = x0[i] - options.initial_step;
            f = evaluate(v);
        }
        vertices.push_back(std::move(v));
        values.push_back(f);
    }

    auto diameter = [&]
    {
        double d = 0.0;
        for (std::size_t a = 0; a < vertices.size(); ++a)
        {
            const auto ta = full(vertices[a]);
            for (std::size_t b = a + 1; b < vertices.size(); ++b)
            {
                const auto tb = full(vertices[b]);
                double s = 0.0;
                for (std::size_t i = 0; i < k; ++i)
                {
                    s += (ta[i] - tb[i]) * (ta[i] - tb[i]);
                }
                d = std::max(d, std::sqrt(s));
            }
        }
        return d;
    };

    std::vector<std::size_t> order(vertices.size());
    for (; result.iterations < options.max_iterations; ++result.iterations)
    {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(
            order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        {
            std::vector<std::vector<double>> v2;
            std::vector<double> f2;
            for (auto i : order)
            {
                v2.push_back(vertices[i]);
                f2.push_back(values[i]);
            }
            vertices = std::move(v2);
            values = std::move(f2);
        }
        if (diameter() < options.tolerance)
        {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(dim, 0.0);
        for (std::size_t v = 0; v < dim; ++v)
        {
            for (std::size_t i = 0; i < dim; ++i)
            {
                centroid[i] += vertices[v][i] / static_cast<double>(dim);
            }
        }
        auto along = [&](double t)
        {
            std::vector<double> p(dim);
            for (std::size_t i = 0; i < dim; ++i)
            {
                p[i] = centroid[i] + t * (vertices[dim][i] - centroid[i]);
            }
            return p;
        };

        const auto reflected = along(-1.0);
        const double fr = evaluate(reflected);
        if (fr < values[0])
        {
            const auto expanded = along(-2.0);
            const double fe = evaluate(expanded);
            if (fe < fr)
            {
                vertices[dim] = expanded;
                values[dim] = fe;
            }
            else
            {
                vertices[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if (fr < values[dim - 1])
        {
            vertices[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        const bool outside = fr < values[dim];
        const auto contracted = along(outside ? -0.5 : 0.5);
        const double fc = evaluate(contracted);
        if (fc < (outside ? fr : values[dim]))
        {
            vertices[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        for (std::size_t v = 1; v <= dim; ++v)
        {
            for (std::size_t i = 0; i < dim; ++i)
            {
                vertices[v][i] = vertices[0][i] + 0.5 * (vertices[v][i] - vertices[0][i]);
            }
            values[v] = evaluate(vertices[v]);
        }
    }

    std::size_t best = 0;
    for (std::size_t v = 1; v < values.size(); ++v)
    {
        if (values[v] < values[best])
        {
            best = v;
        }
    }
    result.point = full(vertices[best]);
    result.value = values[best];
    return result;
}

}  // namespace pseudotrue
