#pragma once

#include "sparseot/point_cloud.hpp"
#include "sparseot/cost.hpp"
#include "sparseot/sinkhorn.hpp"
#include "sparseot/entropic_map.hpp"
#include "sparseot/metrics.hpp"
#include "sparseot/synthetic.hpp"
#include "sparseot/io.hpp"
#include "sparseot/experiment.hpp"
