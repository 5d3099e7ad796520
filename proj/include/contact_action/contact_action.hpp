#pragma once

#include "error.hpp"
#include "torus.hpp"
#include "hamiltonian.hpp"
#include "legendre.hpp"
#include "parallel.hpp"
#include "contact_flow.hpp"
#include "shooting.hpp"
#include "action_field.hpp"
#include "action_solver.hpp"
#include "modification.hpp"
#include "config.hpp"
#include "harness.hpp"
