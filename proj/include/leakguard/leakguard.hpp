#pragma once

#include "leakguard/core.hpp"
#include "leakguard/harness.hpp"
#include "leakguard/io.hpp"
#include "leakguard/leakage.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/rng.hpp"
#include "leakguard/serialize.hpp"
#include "leakguard/splitter.hpp"
#include "leakguard/synth.hpp"

namespace leakguard {

inline constexpr std::string_view version = "0.1.0";

}  // namespace leakguard
