#ifndef FSCBF_FSCBF_HPP
#define FSCBF_FSCBF_HPP

#include "fscbf/barrier.hpp"
#include "fscbf/chebyshev.hpp"
#include "fscbf/config.hpp"
#include "fscbf/controller.hpp"
#include "fscbf/dynamics.hpp"
#include "fscbf/ellipsoid.hpp"
#include "fscbf/experiments.hpp"
#include "fscbf/grid.hpp"
#include "fscbf/humans.hpp"
#include "fscbf/polytope.hpp"
#include "fscbf/qp.hpp"
#include "fscbf/reference.hpp"
#include "fscbf/scenario.hpp"
#include "fscbf/types.hpp"
#include "fscbf/volume.hpp"

#endif // FSCBF_FSCBF_HPP
