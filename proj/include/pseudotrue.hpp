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

#include "pseudotrue/error.hpp"
#include "pseudotrue/experiment.hpp"
#include "pseudotrue/gaussian.hpp"
#include "pseudotrue/io.hpp"
#include "pseudotrue/kernel.hpp"
#include "pseudotrue/kl_minimize.hpp"
#include "pseudotrue/mlfit.hpp"
#include "pseudotrue/parallel.hpp"
#include "pseudotrue/rng.hpp"
#include "pseudotrue/scenarios.hpp"
#include "pseudotrue/simplex.hpp"
#include "pseudotrue/simulate.hpp"
#include "pseudotrue/spectral.hpp"
