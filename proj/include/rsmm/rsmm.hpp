#pragma once

#include "rsmm/dataset.hpp"
#include "rsmm/error.hpp"
#include "rsmm/eval.hpp"
#include "rsmm/explain.hpp"
#include "rsmm/gmm.hpp"
#include "rsmm/model.hpp"
#include "rsmm/model_io.hpp"
#include "rsmm/numeric.hpp"
#include "rsmm/random.hpp"
#include "rsmm/subspace.hpp"
