#pragma once

#include "bootstrap.hpp"
#include "cure.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "io.hpp"
#include "kernel.hpp"
#include "models.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "survival.hpp"

namespace npcure {

inline constexpr const char* version = "0.1.0";

} // namespace npcure
