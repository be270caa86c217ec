#pragma once

// Built-in model manifolds: round spheres in hyperspherical coordinates,
// products of round spheres (factor curvatures must agree for the shrinker
// structure), and a generic finite-difference demo surface.

#include <string>
#include <vector>

#include "grslab/model.hpp"

namespace grs {

ManifoldModel build_round_sphere(int n, double radius);
ManifoldModel build_sphere_product(int n1, double r1, int n2, double r2);
ManifoldModel build_ellipsoid();

// Parse a model spec string.  Accepted forms:
//   s2 | s3 | s4 | s2xs2 | ellipsoid
//   sphere:n=2,r=1.5
//   product:n1=2,r1=1,n2=2,r2=1
//   generic:ellipsoid
ManifoldModel build_model(const std::string& spec);

// Default per-axis quadrature resolution for a model.
std::vector<int> default_resolution(const ManifoldModel& m);

// For finite-difference models, tie the stencil step to the grid resolution
// (axis length / node count).  No-op on closed-form models.
void set_fd_steps(ManifoldModel& m, const std::vector<int>& per_axis);

}  // namespace grs
