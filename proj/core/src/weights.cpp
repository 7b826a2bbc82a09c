// SPDX-License-Identifier: Apache-2.0
#include "monkey/weights.hpp"

#include "monkey/error.hpp"

namespace monkey {

const Tensor& param(const ModelWeights& w, const std::string& name) {
    auto it = w.find(name);
    if (it == w.end()) throw Error("weights", "missing parameter '" + name + "'");
    return it->second;
}

Tensor& param(ModelWeights& w, const std::string& name) {
    auto it = w.find(name);
    if (it == w.end()) throw Error("weights", "missing parameter '" + name + "'");
    return it->second;
}

}  // namespace monkey
