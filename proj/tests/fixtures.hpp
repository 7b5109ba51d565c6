#pragma once
// Reference two-node nested plant used across the test suites.
#include "yoss/plant.hpp"

namespace yoss::testutil {

inline Subsystem nested_subsystem(bool with_b1) {
  Subsystem s;
  s.A.resize(2, 2);
  s.A << 0.5, 0.0, 0.3, 1.2;
  if (with_b1) {
    s.B1.resize(2, 1);
    s.B1 << 1.0, -0.5;
  }
  s.B2.resize(2, 1);
  s.B2 << 0.5, 1.0;
  s.C1.resize(1, 2);
  s.C1 << 1.0, 2.0;
  s.D12.resize(1, 1);
  s.D12 << 1.0;
  s.C2.resize(1, 2);
  s.C2 << 0.1, 1.0;
  s.D21.resize(1, 1);
  s.D21 << 1.0;
  return s;
}

inline CouplingLink nested_link() {
  CouplingLink cl;
  cl.link = Link{0, 1, 1};
  cl.B3.resize(2, 1);
  cl.B3 << 1.0, 0.1;
  cl.C3.resize(1, 2);
  cl.C3 << 0.2, 0.1;
  return cl;
}

// literal wiring: the second subsystem has no exogenous-to-state path
inline GeneralizedPlant nested_plant_literal() {
  Subsystem s1 = nested_subsystem(true), s2 = nested_subsystem(false);
  s1.name = "P1";
  s2.name = "P2";
  s2.D21.resize(1, 1);
  s2.D21 << 1.0;
  return plant_from_subsystems({s1, s2}, {nested_link()});
}

// reference wiring: both subsystems driven by their own disturbance
inline GeneralizedPlant nested_plant() {
  Subsystem s1 = nested_subsystem(true), s2 = nested_subsystem(true);
  s1.name = "P1";
  s2.name = "P2";
  return plant_from_subsystems({s1, s2}, {nested_link()});
}

}  // namespace yoss::testutil
