#pragma once
#include <vector>
#include <gsam/core.hpp>

namespace gsam::prox {

/// Weighted least-squares monotone fit by pooling adjacent violators.
inline Vector isotonic_pava(const Vector& y, const Vector& w, bool increasing = true)
{
    const Index n = y.size();
    struct Block
    {
        double mean;
        double weight;
        Index count;
    };
    std::vector<Block> stack;
    stack.reserve(n);
    const double sign = increasing ? 1.0 : -1.0;
    for (Index i = 0; i < n; ++i) {
        Block cur{sign * y(i), w(i), 1};
        while (!stack.empty() && stack.back().mean >= cur.mean) {
            const Block& top = stack.back();
            const double tw = top.weight + cur.weight;
            cur = {(top.mean * top.weight + cur.mean * cur.weight) / tw, tw, top.count + cur.count};
            stack.pop_back();
        }
        stack.push_back(cur);
    }
    Vector out(n);
    Index pos = 0;
    for (const auto& blk : stack) {
        out.segment(pos, blk.count).setConstant(sign * blk.mean);
        pos += blk.count;
    }
    return out;
}

} // namespace gsam::prox
