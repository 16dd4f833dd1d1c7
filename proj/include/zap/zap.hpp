#pragma once

#include "zap/alc.hpp"
#include "zap/evaluation.hpp"
#include "zap/io.hpp"
#include "zap/meta_dataset.hpp"
#include "zap/pipeline_space.hpp"
#include "zap/report.hpp"
#include "zap/selector.hpp"
#include "zap/stats.hpp"
#include "zap/surrogate.hpp"
#include "zap/synthetic.hpp"
