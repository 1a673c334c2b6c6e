#pragma once

#include "adahop/error.hpp"
#include "adahop/matrix.hpp"
#include "adahop/matrix_io.hpp"
#include "adahop/rng.hpp"
#include "adahop/mxfp4.hpp"
#include "adahop/hadamard.hpp"
#include "adahop/pattern.hpp"
#include "adahop/strategy.hpp"
#include "adahop/synth.hpp"
#include "adahop/analysis.hpp"
#include "adahop/toytrain.hpp"
#include "adahop/serialize.hpp"
