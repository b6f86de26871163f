#ifndef HNMPC_HNMPC_HPP
#define HNMPC_HNMPC_HPP

#include "hnmpc/controller.hpp"
#include "hnmpc/dynamics.hpp"
#include "hnmpc/geometry.hpp"
#include "hnmpc/harness.hpp"
#include "hnmpc/ocp.hpp"
#include "hnmpc/problem.hpp"
#include "hnmpc/solver.hpp"
#include "hnmpc/trajectory.hpp"

#endif  // HNMPC_HNMPC_HPP
