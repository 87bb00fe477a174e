#pragma once

#include <string>

#include "rpo/policy.hpp"

namespace rpo {

// Checkpoint file, plain text:
//   line 1: "rpo-policy-checkpoint <version> V=<V> W=<W> E=<E> H=<H> P=<P>"
//   line 2: the V vocab tokens, space separated
//   next P lines: one parameter per line, shortest round-trip decimal
// Values are written with std::to_chars, so save -> load -> save is
// byte-identical and every double survives exactly.
inline constexpr int kCheckpointVersion = 1;

void checkpoint_save(const Policy& policy, const std::string& path);
Policy checkpoint_load(const std::string& path);

} // namespace rpo
