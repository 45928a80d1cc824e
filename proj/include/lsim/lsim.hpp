#pragma once

#include "lsim/axi.hpp"
#include "lsim/design.hpp"
#include "lsim/engine.hpp"
#include "lsim/error.hpp"
#include "lsim/mini_ir.hpp"
#include "lsim/report.hpp"
#include "lsim/resolver.hpp"
#include "lsim/session.hpp"
#include "lsim/trace.hpp"
