#pragma once

#include "error.hpp"
#include "experiment.hpp"
#include "metasurface.hpp"
#include "minimize.hpp"
#include "optics.hpp"
#include "quantum.hpp"
#include "quantum_json.hpp"
#include "tomography.hpp"
