#pragma once

#include <string>

#include "tvemi/cox_tve.hpp"
#include "tvemi/pool.hpp"

namespace tvemi {

// Line-based key/value text formats; numbers %.17g so text round-trips the
// doubles exactly.
std::string model_to_text(const CoxTveModel& model);
CoxTveModel model_from_text(const std::string& text);

std::string pooled_to_text(const PooledFit& fit);
PooledFit pooled_from_text(const std::string& text);

}  // namespace tvemi
