#pragma once

#include "pfcvm/data.hpp"
#include "pfcvm/dataset.hpp"
#include "pfcvm/diagnostics.hpp"
#include "pfcvm/error.hpp"
#include "pfcvm/hyper.hpp"
#include "pfcvm/kernel.hpp"
#include "pfcvm/laplace.hpp"
#include "pfcvm/linalg.hpp"
#include "pfcvm/metrics.hpp"
#include "pfcvm/model.hpp"
#include "pfcvm/serialize.hpp"
#include "pfcvm/state.hpp"
#include "pfcvm/train.hpp"
#include "pfcvm/types.hpp"
