#pragma once

#include "trimsim/sim_core.hpp"
#include "trimsim/packet.hpp"
#include "trimsim/meter.hpp"
#include "trimsim/trim_policy.hpp"
#include "trimsim/switch_model.hpp"
#include "trimsim/ndp.hpp"
#include "trimsim/harness.hpp"
#include "trimsim/config.hpp"
#include "trimsim/report.hpp"
