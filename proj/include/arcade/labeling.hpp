#pragma once

#include <vector>

namespace arcade {

// 8-connected component labeling over a boolean mask (row-major rows x cols).
struct Components {
    std::vector<int> label;                // per element; -1 = background
    std::vector<std::vector<int>> members; // element indices per component
};

Components connected_components8(const std::vector<char>& mask, int rows, int cols);

}  // namespace arcade
