#pragma once

#include "rampflow/boosting.hpp"
#include "rampflow/common.hpp"
#include "rampflow/csv.hpp"
#include "rampflow/dataset.hpp"
#include "rampflow/eval.hpp"
#include "rampflow/ingest.hpp"
#include "rampflow/matching.hpp"
#include "rampflow/model_io.hpp"
#include "rampflow/pipeline.hpp"
#include "rampflow/ridge.hpp"
#include "rampflow/stats.hpp"
#include "rampflow/synth.hpp"
#include "rampflow/tree.hpp"
