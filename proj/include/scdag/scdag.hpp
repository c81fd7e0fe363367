// Copyright 2026 The SCDAG Authors.
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

#pragma once

#include "scdag/augment.hpp"
#include "scdag/classifiers.hpp"
#include "scdag/corpus.hpp"
#include "scdag/ensemble.hpp"
#include "scdag/gazetteer.hpp"
#include "scdag/matcher.hpp"
#include "scdag/metrics.hpp"
#include "scdag/synthetic.hpp"
#include "scdag/taxonomy.hpp"
#include "scdag/trainer.hpp"
