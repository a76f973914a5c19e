#pragma once

// Peer-review tournament evaluation for language models: a pool of models
// takes turns writing questions, answering independently and judging each
// other's answers; scores aggregate into capability rankings with
// consistency and difficulty analytics, all replayable from append-only
// event logs.

#include "crowdeval/backends.hpp"
#include "crowdeval/builtin_domains.hpp"
#include "crowdeval/config.hpp"
#include "crowdeval/domain.hpp"
#include "crowdeval/event_log.hpp"
#include "crowdeval/http_backend.hpp"
#include "crowdeval/mock_backend.hpp"
#include "crowdeval/orchestrator.hpp"
#include "crowdeval/report.hpp"
#include "crowdeval/retry.hpp"
#include "crowdeval/scoring.hpp"
#include "crowdeval/svg.hpp"
#include "crowdeval/types.hpp"
#include "crowdeval/util.hpp"
