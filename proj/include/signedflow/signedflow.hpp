#pragma once

#include "signedflow/classification.hpp"
#include "signedflow/dynamics.hpp"
#include "signedflow/errors.hpp"
#include "signedflow/io.hpp"
#include "signedflow/outcome.hpp"
#include "signedflow/schedule.hpp"
#include "signedflow/signed_matrix.hpp"
#include "signedflow/time_varying.hpp"
#include "signedflow/topology.hpp"
