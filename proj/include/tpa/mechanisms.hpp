#pragma once

#include "tpa/attention_ref.hpp"
#include "tpa/linalg.hpp"

namespace tpa {

// Native formulations of the classic mechanisms, computed head by head from
// their own projections. These are the comparison targets for the
// non-contextual TPA constructions; they never touch the factor path.

// X is T x d_model; outputs are T x h x d_h (no output projection).
HeadTensor mha_forward(const Matrix& x, const MhaWeights& w, bool causal);
HeadTensor mqa_forward(const Matrix& x, const MqaWeights& w, bool causal);
HeadTensor gqa_forward(const Matrix& x, const GqaWeights& w, std::size_t groups, bool causal);

}  // namespace tpa
