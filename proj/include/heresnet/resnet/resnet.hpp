/*
 * Copyright 2026 The heresnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include "heresnet/resnet/activations.hpp"
#include "heresnet/resnet/graph.hpp"
#include "heresnet/resnet/image.hpp"
#include "heresnet/resnet/infer.hpp"
#include "heresnet/resnet/layers.hpp"
#include "heresnet/resnet/layout.hpp"
#include "heresnet/resnet/oracle.hpp"
#include "heresnet/resnet/weights.hpp"
