#pragma once

#include <string>

#include "tpa/factor.hpp"
#include "tpa/kv_cache.hpp"

namespace tpa {

// Container format shared by weights and cache snapshots:
//   "TPAF" magic, u64 LE header length, JSON header, raw doubles LE.
// The header lists {config, tensor names, shapes, element offsets}. Loading
// what was saved reproduces every payload bit.

void save_weights(const FactorWeights& w, const std::string& path);
FactorWeights load_weights(const std::string& path);

void save_cache(const FactorizedKvCache& cache, const std::string& path);
FactorizedKvCache load_cache(const std::string& path);

}  // namespace tpa
