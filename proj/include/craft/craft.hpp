#pragma once

#include "craft/error.hpp"
#include "craft/geometry.hpp"
#include "craft/rastermap.hpp"
#include "craft/gtgen.hpp"
#include "craft/losses.hpp"
#include "craft/postproc.hpp"
#include "craft/rectify.hpp"
#include "craft/synth.hpp"
#include "craft/evalkit.hpp"
#include "craft/json_io.hpp"
