#pragma once

#include "langsub/error.hpp"
#include "langsub/evalmetrics.hpp"
#include "langsub/inlp.hpp"
#include "langsub/intervention.hpp"
#include "langsub/langvec.hpp"
#include "langsub/linalg.hpp"
#include "langsub/manifest.hpp"
#include "langsub/repr_store.hpp"
#include "langsub/synth.hpp"
#include "langsub/unicode.hpp"
