#pragma once

#include "errors.hpp"
#include "precision.hpp"
#include "linalg.hpp"
#include "core.hpp"
#include "special.hpp"
#include "quad.hpp"
#include "ed.hpp"
#include "solve.hpp"
#include "det.hpp"
#include "thermo.hpp"
