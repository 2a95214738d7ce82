#pragma once

// Everything except the command-line front end.

#include "pmols/csv_io.hpp"
#include "pmols/errors.hpp"
#include "pmols/experiments.hpp"
#include "pmols/imaging.hpp"
#include "pmols/matrix_core.hpp"
#include "pmols/precondition.hpp"
#include "pmols/recovery.hpp"
#include "pmols/theory_checks.hpp"
