#pragma once

#include "asymlyap/error.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/lyapunov.hpp"
#include "asymlyap/system.hpp"
#include "asymlyap/lmi.hpp"
#include "asymlyap/sdpsolve.hpp"
#include "asymlyap/riccati.hpp"
#include "asymlyap/verify.hpp"
#include "asymlyap/design.hpp"
#include "asymlyap/report.hpp"
#include "asymlyap/consensus.hpp"
