#pragma once

#include "ubsr/projection.hpp"

namespace ubsr::detail {

// Fills out with the trivial projection when x is already in Z.
bool interior_result(const ProjectionInstance& inst, ProjectionSolver solver, ProjectionResult& out);

// Computes the KKT residual of a finished result.
void finish(const ProjectionInstance& inst, ProjectionResult& out);

}  // namespace ubsr::detail
