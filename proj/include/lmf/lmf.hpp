#pragma once

#include "lmf/driver.hpp"
#include "lmf/engine.hpp"
#include "lmf/events.hpp"
#include "lmf/fabric.hpp"
#include "lmf/oracle.hpp"
#include "lmf/report.hpp"
#include "lmf/scenario.hpp"
#include "lmf/simulation.hpp"
#include "lmf/trace.hpp"
#include "lmf/types.hpp"
