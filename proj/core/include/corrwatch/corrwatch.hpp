#pragma once

#include "corrwatch/calibrate.hpp"
#include "corrwatch/corrstat.hpp"
#include "corrwatch/detectors.hpp"
#include "corrwatch/enhance.hpp"
#include "corrwatch/io.hpp"
#include "corrwatch/simlab.hpp"
#include "corrwatch/types.hpp"
