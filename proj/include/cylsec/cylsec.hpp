#pragma once

#include "cylsec/cutoffs.hpp"
#include "cylsec/flow.hpp"
#include "cylsec/geometry.hpp"
#include "cylsec/hamiltonians.hpp"
#include "cylsec/io.hpp"
#include "cylsec/phase.hpp"
#include "cylsec/sections.hpp"
