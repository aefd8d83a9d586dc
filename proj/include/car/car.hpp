#pragma once

#include "car/benchgen.hpp"
#include "car/cluster.hpp"
#include "car/common.hpp"
#include "car/costing.hpp"
#include "car/dataset.hpp"
#include "car/embedding.hpp"
#include "car/evaluation.hpp"
#include "car/manifest.hpp"
#include "car/pca.hpp"
#include "car/prompts.hpp"
#include "car/scorer.hpp"
#include "car/selection.hpp"
