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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pseudotrue
{

/// Base class for all computation errors raised by the library.
class Error : public std::runtime_error
{
   public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input detected before any computation (CLI exit code 1).
class UsageError : public Error
{
   public:
    using Error::Error;
};

class NotPositiveDefinite : public Error
{
   public:
    explicit NotPositiveDefinite(std::ptrdiff_t index)
        : Error(
              "not positive definite (non-positive pivot at index "
              + std::to_string(index) + ")"),
          index_(index)
    {
    }

    std::ptrdiff_t index() const noexcept { return index_; }

   private:
    std::ptrdiff_t index_;
};

}  // namespace pseudotrue
