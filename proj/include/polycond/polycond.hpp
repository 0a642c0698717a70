#pragma once

#include "poly_core.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "serialize.hpp"
#include "random_model.hpp"
#include "linalg.hpp"
#include "sphere_opt.hpp"
#include "condition.hpp"
#include "stiefel.hpp"
#include "matrix_toolkit.hpp"
#include "experiments.hpp"
#include "config.hpp"
#include "verify.hpp"
