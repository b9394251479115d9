#pragma once

#include "gta/error.hpp"
#include "gta/random.hpp"
#include "gta/numerics/tensor.hpp"
#include "gta/numerics/ops.hpp"
#include "gta/numerics/adam.hpp"
#include "gta/numerics/checkpoint.hpp"
#include "gta/numerics/gradcheck.hpp"
#include "gta/graph/policy.hpp"
#include "gta/graph/ip_conv.hpp"
#include "gta/encoder/temporal_encoder.hpp"
#include "gta/forecaster/attention.hpp"
#include "gta/forecaster/complexity.hpp"
#include "gta/forecaster/transformer.hpp"
#include "gta/detector/detector.hpp"
#include "gta/data/series.hpp"
#include "gta/data/synthetic.hpp"
#include "gta/model/gta_model.hpp"
#include "gta/model/trainer.hpp"
#include "gta/app/config.hpp"
#include "gta/app/commands.hpp"
