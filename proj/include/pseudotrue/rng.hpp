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

// Counter-based random numbers.
//
// Every random stream is addressed by (seed, stream id); draws within a
// stream are addressed by a 64-bit counter. Because nothing is shared
// between streams, marker columns, phenotype replicates and Monte-Carlo
// replicates can be generated in any order or in parallel and still be
// bit-identical.
//
// Fixed method choices (part of the reproducibility contract):
//   engine    Philox4x32-10 (Salmon et al. 2011), key = seed, counter =
//             (draw index, stream id); each block yields two 64-bit words
//   uniform   boost::random::uniform_01<double>
//   normal    boost::random::normal_distribution<double> (ziggurat)
//   gamma     boost::random::gamma_distribution<double>
//   beta      boost::random::beta_distribution<double>

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace pseudotrue
{

namespace detail
{

inline void philox_mulhilo(
    std::uint32_t a,
    std::uint32_t b,
    std::uint32_t& hi,
    std::uint32_t& lo)
{
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace detail

/// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> counter,
    std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t kMul0 = 0xD2511F53U;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;

    for (int round = 0; round < 10; ++round)
    {
        std::uint32_t hi0{};
        std::uint32_t lo0{};
        std::uint32_t hi1{};
        std::uint32_t lo1{};
        detail::philox_mulhilo(kMul0, counter[0], hi0, lo0);
        detail::philox_mulhilo(kMul1, counter[2], hi1, lo1);
        counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return counter;
}

/// UniformRandomBitGenerator over one Philox stream.
class Philox
{
   public:
    using result_type = std::uint64_t;

    explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()()
    {
        if (index_ == 2)
        {
            refill();
        }
        return buffer_[index_++];
    }

    std::uint64_t stream() const noexcept { return stream_; }

   private:
    void refill()
    {
        const std::array<std::uint32_t, 4> counter{
            static_cast<std::uint32_t>(block_),
            static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_),
            static_cast<std::uint32_t>(stream_ >> 32)};
        const auto out = philox4x32_10(counter, key_);
        buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        ++block_;
        index_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int index_ = 2;
};

inline double uniform01(Philox& rng)
{
    return boost::random::uniform_01<double>{}(rng);
}

inline double uniform(Philox& rng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(rng);
}

inline double standard_normal(Philox& rng)
{
    return boost::random::normal_distribution<double>{}(rng);
}

inline double beta_variate(Philox& rng, double alpha, double beta)
{
    return boost::random::beta_distribution<double>{alpha, beta}(rng);
}

/// Binomial(2, p) dosage from two Bernoulli trials.
inline int binomial2(Philox& rng, double p)
{
    return static_cast<int>(uniform01(rng) < p) + static_cast<int>(uniform01(rng) < p);
}

}  // namespace pseudotrue
