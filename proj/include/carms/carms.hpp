// Copyright 2026 The carms Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CARMS_CARMS_HPP_
#define CARMS_CARMS_HPP_

#include "carms/categorical_sampling.hpp"
#include "carms/copula.hpp"
#include "carms/core.hpp"
#include "carms/estimators.hpp"
#include "carms/gradient.hpp"
#include "carms/oracle.hpp"

#endif  // CARMS_CARMS_HPP_
