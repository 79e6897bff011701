#pragma once

// Umbrella header for the offline-capable surface. The HTTP-backed transport
// and embedding backend live in llm_http.hpp and similarity_endpoint.hpp;
// include those separately when a build needs network access.

#include "goalkp/config.hpp"
#include "goalkp/consistency.hpp"
#include "goalkp/corpus.hpp"
#include "goalkp/errors.hpp"
#include "goalkp/events.hpp"
#include "goalkp/goals.hpp"
#include "goalkp/jsonl.hpp"
#include "goalkp/llm.hpp"
#include "goalkp/metrics.hpp"
#include "goalkp/parallel.hpp"
#include "goalkp/pipeline.hpp"
#include "goalkp/similarity.hpp"
#include "goalkp/text.hpp"
