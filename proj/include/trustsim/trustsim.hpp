#pragma once

#include "trustsim/behavior_table.hpp"
#include "trustsim/corpus.hpp"
#include "trustsim/error.hpp"
#include "trustsim/eval.hpp"
#include "trustsim/generator.hpp"
#include "trustsim/random.hpp"
#include "trustsim/rl_env.hpp"
#include "trustsim/simulator.hpp"
#include "trustsim/stats.hpp"
#include "trustsim/trust_model.hpp"
#include "trustsim/truncated_gaussian.hpp"
#include "trustsim/types.hpp"
#include "trustsim/user_model.hpp"
