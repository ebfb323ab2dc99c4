#pragma once

#include "ndg/basis.hpp"
#include "ndg/mesh.hpp"
#include "ndg/space.hpp"
#include "ndg/assembly.hpp"
#include "ndg/linsolve.hpp"
#include "ndg/newton.hpp"
#include "ndg/estimator.hpp"
#include "ndg/adapt.hpp"
#include "ndg/problem.hpp"
#include "ndg/driver.hpp"
#include "ndg/io.hpp"
