#include "lipflow/rng.hpp"

namespace lipflow {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  SplitMix64 g(base ^ (stream * 0xd1b54a32d192ed03ULL));
  g();
  return g();
}

}  // namespace lipflow
