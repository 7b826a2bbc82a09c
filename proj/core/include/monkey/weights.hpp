// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "monkey/tensor.hpp"

namespace monkey {

/// Named parameter store. std::map keeps iteration (and therefore
/// serialization) order deterministic.
using ModelWeights = std::map<std::string, Tensor>;

/// Looks up a required parameter; throws naming the missing key.
const Tensor& param(const ModelWeights& w, const std::string& name);
Tensor& param(ModelWeights& w, const std::string& name);

/// Declares one parameter: its name, shape, and how init_model fills it.
struct ParamSpec {
    enum class Init { kConvHe, kLinear, kOnes, kZeros };

    std::string name;
    std::vector<int> shape;
    Init init = Init::kZeros;
};

}  // namespace monkey
