// SPDX-License-Identifier: Apache-2.0
#include "monkey/prompts.hpp"

namespace monkey {

const std::vector<std::string>& bundled_background_prompts() {
    static const std::vector<std::string> prompts = {
        "in the jungle",
        "in the snow",
        "on the beach",
        "on a cobblestone street",
        "on top of pink fabric",
        "on top of a wooden floor",
        "with a city in the background",
        "with a mountain in the background",
        "with a blue house in the background",
        "on top of a purple rug in a forest",
        "with a wheat field in the background",
        "with a tree and autumn leaves in the background",
        "with the Eiffel Tower in the background",
        "floating on top of water",
        "floating in an ocean of milk",
        "on top of green grass with sunflowers around it",
        "on top of a mirror",
        "on top of the sidewalk in a crowded street",
        "on top of a dirt road",
        "on top of a white rug",
    };
    return prompts;
}

const std::vector<std::string>& dataset_colors() {
    static const std::vector<std::string> v = {"red", "blue", "yellow", "purple", "orange", "white"};
    return v;
}

const std::vector<std::string>& dataset_shapes() {
    static const std::vector<std::string> v = {"circle", "square", "triangle"};
    return v;
}

const std::vector<std::string>& dataset_backgrounds() {
    static const std::vector<std::string> v = {"grass", "sand", "stone"};
    return v;
}

const std::vector<std::string>& dataset_caption_words() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> w;
        for (const auto& c : dataset_colors()) w.push_back(c);
        for (const auto& s : dataset_shapes()) w.push_back(s);
        for (const auto& b : dataset_backgrounds()) w.push_back(b);
        w.push_back("on");
        return w;
    }();
    return words;
}

}  // namespace monkey
