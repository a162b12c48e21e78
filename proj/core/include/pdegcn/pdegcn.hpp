#pragma once

#include "pdegcn/autodiff.hpp"
#include "pdegcn/checkpoint.hpp"
#include "pdegcn/dataset.hpp"
#include "pdegcn/diagnostics.hpp"
#include "pdegcn/errors.hpp"
#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/graph.hpp"
#include "pdegcn/network.hpp"
#include "pdegcn/random.hpp"
#include "pdegcn/sparse_operator.hpp"
#include "pdegcn/training.hpp"
