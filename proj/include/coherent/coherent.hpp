#pragma once

#include "coherent/errors.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/coherence_maps.hpp"
#include "coherent/linalg.hpp"
#include "coherent/model.hpp"
#include "coherent/constraints.hpp"
#include "coherent/numeric_verify.hpp"
#include "coherent/spec_io.hpp"
