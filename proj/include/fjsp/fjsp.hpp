#pragma once

#include "fjsp/core/instance.hpp"
#include "fjsp/core/rng.hpp"
#include "fjsp/sim/env.hpp"
#include "fjsp/sim/schedule.hpp"
#include "fjsp/pdr/rules.hpp"
#include "fjsp/nn/tensor.hpp"
#include "fjsp/nn/ops.hpp"
#include "fjsp/nn/layers.hpp"
#include "fjsp/nn/param_store.hpp"
#include "fjsp/nn/checkpoint.hpp"
#include "fjsp/nn/grad_check.hpp"
#include "fjsp/policy/ssm.hpp"
#include "fjsp/policy/mamba.hpp"
#include "fjsp/policy/network.hpp"
#include "fjsp/policy/select.hpp"
#include "fjsp/train/adam.hpp"
#include "fjsp/train/ppo.hpp"
#include "fjsp/train/trainer.hpp"
#include "fjsp/bench/benchmark.hpp"
#include "fjsp/bench/gantt.hpp"
