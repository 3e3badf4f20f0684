/*
Copyright 2026 The pplaw Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include "pplaw/corpus.hpp"
#include "pplaw/dos_selector.hpp"
#include "pplaw/error.hpp"
#include "pplaw/io.hpp"
#include "pplaw/landscape.hpp"
#include "pplaw/law_fitting.hpp"
#include "pplaw/nelder_mead.hpp"
#include "pplaw/ppl_stats.hpp"
#include "pplaw/scaling_law.hpp"
#include "pplaw/synthetic.hpp"
