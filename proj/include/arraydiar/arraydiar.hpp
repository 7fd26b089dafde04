#pragma once

#include "arraydiar/audio.hpp"
#include "arraydiar/census.hpp"
#include "arraydiar/cluster.hpp"
#include "arraydiar/common.hpp"
#include "arraydiar/config.hpp"
#include "arraydiar/der.hpp"
#include "arraydiar/doa.hpp"
#include "arraydiar/embeddings.hpp"
#include "arraydiar/fusion.hpp"
#include "arraydiar/geometry.hpp"
#include "arraydiar/hungarian.hpp"
#include "arraydiar/pipeline.hpp"
#include "arraydiar/rttm.hpp"
#include "arraydiar/sectors.hpp"
#include "arraydiar/synth.hpp"
