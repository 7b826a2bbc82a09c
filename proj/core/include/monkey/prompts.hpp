// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace monkey {

/// The 20 bundled background prompts used by the eval harness. Also shipped
/// as data/background_prompts.txt (one prompt per line).
const std::vector<std::string>& bundled_background_prompts();

/// Words used by the synthetic training corpus captions
/// ("<color> <shape> on <background>").
const std::vector<std::string>& dataset_caption_words();

const std::vector<std::string>& dataset_colors();
const std::vector<std::string>& dataset_shapes();
const std::vector<std::string>& dataset_backgrounds();

}  // namespace monkey
