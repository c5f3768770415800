#include "arcade/labeling.hpp"

#include <cassert>

namespace arcade {

Components connected_components8(const std::vector<char>& mask, int rows, int cols) {
    assert(static_cast<int>(mask.size()) == rows * cols);
    Components out;
    out.label.assign(mask.size(), -1);
    std::vector<int> stack;
    for (int start = 0; start < rows * cols; ++start) {
        if (!mask[start] || out.label[start] != -1) continue;
        const int id = static_cast<int>(out.members.size());
        out.members.emplace_back();
        stack.push_back(start);
        out.label[start] = id;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            out.members[id].push_back(i);
            const int r = i / cols, c = i % cols;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    const int j = rr * cols + cc;
                    if (mask[j] && out.label[j] == -1) {
                        out.label[j] = id;
                        stack.push_back(j);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace arcade
