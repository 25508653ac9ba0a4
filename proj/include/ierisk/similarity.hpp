#pragma once

#include <functional>
#include <string_view>

namespace ierisk {

// Similarity between two element names (or a step text and a name), in [-1, 1].
using NameSimilarity = std::function<double(std::string_view, std::string_view)>;

} // namespace ierisk
