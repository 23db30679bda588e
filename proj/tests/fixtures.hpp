#pragma once

#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "trustsim/trustsim.hpp"

namespace fixtures {

using namespace trustsim;

inline UserRecord make_user(const std::string& id, double expertise = 2.0, double propensity = 2.0,
                            double affinity = 2.0) {
  UserRecord u;
  u.user_id = id;
  u.domain_expertise = expertise;
  u.trust_propensity = propensity;
  u.technical_affinity = affinity;
  return u;
}

/// Twelve valid exchanges, all with `act`.
inline Dialog make_dialog(const UserRecord& u, ProactiveAct act = ProactiveAct::None) {
  Dialog d;
  d.user = u;
  for (int s = 1; s <= kStepsPerDialog; ++s) {
    Exchange& e = d.exchanges[static_cast<std::size_t>(s - 1)];
    e.dialog_id = u.user_id;
    e.step = s;
    e.complexity = complexity_of_step(s);
    e.proactive_act = act;
    e.game_score = 10.0 * e.complexity;
    e.duration = 40.0;
  }
  return d;
}

inline std::string uid(int i) { return "p" + std::to_string(i); }

}  // namespace fixtures

#define EXPECT_TS_ERROR(stmt, expected_kind)                                          \
  do {                                                                                \
    try {                                                                             \
      stmt;                                                                           \
      ADD_FAILURE() << "expected " << trustsim::to_string(expected_kind);             \
    } catch (const trustsim::Error& ts_err_) {                                        \
      EXPECT_EQ(ts_err_.kind(), expected_kind) << ts_err_.what();                     \
    }                                                                                 \
  } while (0)
